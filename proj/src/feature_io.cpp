#include "sevq/feature_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sevq/error.hpp"
#include "sevq/report.hpp"

namespace sevq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, fmt::format("failed reading '{}'", path.string()));
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write '{}'", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, fmt::format("failed writing '{}'", path.string()));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits text into non-empty, non-comment lines.
std::vector<std::string_view> data_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(pos, end - pos));
    if (!line.empty() && line.front() != '#') lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

template <typename T>
std::vector<T> parse_cells(std::string_view line, std::size_t row) {
  std::vector<T> cells;
  std::size_t col = 0;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) end = line.size();
    const auto cell = trim(line.substr(pos, end - pos));
    T value{};
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
      throw Error(ErrorKind::kParse, fmt::format("non-numeric cell '{}' at row {}, column {}",
                                                 std::string(cell), row, col));
    }
    cells.push_back(value);
    ++col;
    if (end == line.size()) break;
    pos = end + 1;
  }
  return cells;
}

FeatureMatrix load_csv(const fs::path& path) {
  const std::string text = read_file(path);
  const auto lines = data_lines(text);
  if (lines.empty()) throw Error(ErrorKind::kShape, fmt::format("'{}' has no data rows", path.string()));
  std::vector<double> data;
  std::size_t cols = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    auto cells = parse_cells<double>(lines[r], r);
    if (r == 0) {
      cols = cells.size();
    } else if (cells.size() != cols) {
      throw Error(ErrorKind::kShape, fmt::format("row {} has {} columns, expected {}", r,
                                                 cells.size(), cols));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!std::isfinite(cells[c])) {
        throw Error(ErrorKind::kValue, fmt::format("non-finite value at row {}, column {}", r, c));
      }
    }
    data.insert(data.end(), cells.begin(), cells.end());
  }
  return FeatureMatrix(lines.size(), cols, std::move(data));
}

FeatureMatrix load_raw(const fs::path& path) {
  fs::path sidecar = path;
  sidecar += ".json";
  if (!fs::exists(path)) throw Error(ErrorKind::kIo, fmt::format("cannot open '{}'", path.string()));
  if (!fs::exists(sidecar)) {
    throw Error(ErrorKind::kIo, fmt::format("missing sidecar '{}'", sidecar.string()));
  }
  std::size_t rows = 0;
  std::size_t cols = 0;
  try {
    const json meta = json::parse(read_file(sidecar));
    rows = meta.at("rows").get<std::size_t>();
    cols = meta.at("cols").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("bad sidecar '{}': {}", sidecar.string(), e.what()));
  }
  if (rows == 0 || cols == 0) throw Error(ErrorKind::kShape, "sidecar declares an empty matrix");
  const std::string bytes = read_file(path);
  const std::size_t expected = rows * cols * sizeof(float);
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kShape,
                fmt::format("'{}' has {} bytes but sidecar {{rows: {}, cols: {}}} requires {}",
                            path.string(), bytes.size(), rows, cols, expected));
  }
  FeatureMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    std::uint32_t word;
    std::memcpy(&word, bytes.data() + i * 4, 4);
    if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
    const float f = std::bit_cast<float>(word);
    if (!std::isfinite(f)) {
      throw Error(ErrorKind::kValue, fmt::format("non-finite value at row {}, column {}", i / cols, i % cols));
    }
    m.data()[i] = f;
  }
  return m;
}

json matrix_to_json(const FeatureMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

FeatureMatrix matrix_from_json(const json& j, std::size_t cols) {
  if (!j.is_array()) throw Error(ErrorKind::kCorrupt, "matrix is not an array");
  FeatureMatrix m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (row.size() != cols) {
      throw Error(ErrorKind::kCorrupt, fmt::format("matrix row {} has {} values, expected {}", r,
                                                   row.size(), cols));
    }
    std::ranges::copy(row, m.row(r).begin());
  }
  return m;
}

}  // namespace

FeatureFormat feature_format_for(const fs::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".f32" || ext == ".bin" || ext == ".raw") ? FeatureFormat::kRawF32 : FeatureFormat::kCsv;
}

TokenFormat token_format_for(const fs::path& path) {
  return path.extension() == ".json" ? TokenFormat::kJson : TokenFormat::kCsv;
}

FeatureMatrix load_features(const fs::path& path, FeatureFormat format) {
  return format == FeatureFormat::kCsv ? load_csv(path) : load_raw(path);
}

FeatureMatrix load_features(const fs::path& path) {
  return load_features(path, feature_format_for(path));
}

void save_features(const FeatureMatrix& features, const fs::path& path, FeatureFormat format) {
  if (format == FeatureFormat::kCsv) {
    std::string out;
    for (std::size_t r = 0; r < features.rows(); ++r) {
      const auto row = features.row(r);
      out += fmt::format("{}\n", fmt::join(row.begin(), row.end(), ","));
    }
    write_file(path, out);
    return;
  }
  std::string bytes(features.data().size() * 4, '\0');
  for (std::size_t i = 0; i < features.data().size(); ++i) {
    auto word = std::bit_cast<std::uint32_t>(static_cast<float>(features.data()[i]));
    if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
    std::memcpy(bytes.data() + i * 4, &word, 4);
  }
  write_file(path, bytes);
  fs::path sidecar = path;
  sidecar += ".json";
  write_file(sidecar, json{{"rows", features.rows()}, {"cols", features.cols()}}.dump() + "\n");
}

std::string model_to_json(const CodecModel& model) {
  json stages = json::array();
  for (const auto& s : model.stages) {
    stages.push_back({{"method", s.method() == StageMethod::kEuclidean ? "euclidean" : "structural_entropy"},
                      {"k", s.size()},
                      {"tau", s.threshold()},
                      {"member_counts", s.member_counts()},
                      {"centroids", matrix_to_json(s.centroids())},
                      {"anchors", matrix_to_json(s.anchors())},
                      {"anchor_labels", s.anchor_labels()}});
  }
  const json doc = {{"format_version", kModelFormatVersion},
                    {"feature_dim", model.dim},
                    {"config", config_to_json(model.config)},
                    {"stages_trained", model.stages.size()},
                    {"truncated", model.truncated},
                    {"stop_reason", model.stop_reason},
                    {"stages", stages}};
  return doc.dump(1) + "\n";
}

CodecModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorrupt, fmt::format("model file is not valid JSON: {}", e.what()));
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorKind::kVersion, fmt::format("unsupported model format_version {} (expected {})",
                                                   version, kModelFormatVersion));
    }
    CodecModel model;
    model.dim = doc.at("feature_dim").get<std::size_t>();
    model.config = config_from_json(doc.at("config"));
    model.truncated = doc.at("truncated").get<bool>();
    model.stop_reason = doc.at("stop_reason").get<std::string>();
    for (const auto& s : doc.at("stages")) {
      const auto method = s.at("method").get<std::string>();
      if (method != "euclidean" && method != "structural_entropy") {
        throw Error(ErrorKind::kCorrupt, fmt::format("unknown stage method '{}'", method));
      }
      FeatureMatrix centroids = matrix_from_json(s.at("centroids"), model.dim);
      if (centroids.rows() != s.at("k").get<std::size_t>()) {
        throw Error(ErrorKind::kCorrupt, "stage k does not match centroid count");
      }
      model.stages.push_back(StageModel::create(
          std::move(centroids), s.at("member_counts").get<std::vector<std::size_t>>(),
          matrix_from_json(s.at("anchors"), model.dim),
          s.at("anchor_labels").get<std::vector<ClusterId>>(), s.at("tau").get<double>(),
          method == "euclidean" ? StageMethod::kEuclidean : StageMethod::kStructuralEntropy));
    }
    if (model.stages.empty()) throw Error(ErrorKind::kCorrupt, "model has no stages");
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorrupt, fmt::format("model file is malformed: {}", e.what()));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kVersion || e.kind() == ErrorKind::kCorrupt) throw;
    throw Error(ErrorKind::kCorrupt, fmt::format("model file is inconsistent: {}", e.what()));
  }
}

void save_model(const CodecModel& model, const fs::path& path) {
  write_file(path, model_to_json(model));
}

CodecModel load_model(const fs::path& path) { return model_from_json(read_file(path)); }

std::string tokens_to_csv(const TokenSequence& tokens) {
  std::string out;
  for (std::size_t t = 0; t < tokens.frames; ++t) {
    for (std::size_t s = 0; s < tokens.stages; ++s) {
      if (s) out += ',';
      out += std::to_string(tokens.at(t, s));
    }
    out += '\n';
  }
  return out;
}

void save_tokens(const TokenSequence& tokens, const fs::path& path, TokenFormat format) {
  if (tokens.stages < 1) throw Error(ErrorKind::kShape, "token matrix needs at least one stage");
  if (tokens.tokens.size() != tokens.frames * tokens.stages) {
    throw Error(ErrorKind::kShape, "token matrix size does not match its shape");
  }
  if (format == TokenFormat::kCsv) {
    write_file(path, tokens_to_csv(tokens));
    return;
  }
  json rows = json::array();
  for (std::size_t t = 0; t < tokens.frames; ++t) {
    rows.push_back(std::vector<int>(tokens.tokens.begin() + static_cast<std::ptrdiff_t>(t * tokens.stages),
                                    tokens.tokens.begin() + static_cast<std::ptrdiff_t>((t + 1) * tokens.stages)));
  }
  write_file(path, json{{"frames", tokens.frames}, {"stages", tokens.stages}, {"tokens", rows}}.dump() + "\n");
}

TokenSequence load_tokens(const fs::path& path, TokenFormat format) {
  const std::string text = read_file(path);
  TokenSequence seq;
  if (format == TokenFormat::kCsv) {
    const auto lines = data_lines(text);
    for (std::size_t r = 0; r < lines.size(); ++r) {
      auto cells = parse_cells<int>(lines[r], r);
      if (r == 0) {
        seq.stages = cells.size();
      } else if (cells.size() != seq.stages) {
        throw Error(ErrorKind::kShape, fmt::format("token row {} has {} stages, expected {}", r,
                                                   cells.size(), seq.stages));
      }
      seq.tokens.insert(seq.tokens.end(), cells.begin(), cells.end());
    }
    seq.frames = lines.size();
  } else {
    try {
      const json doc = json::parse(text);
      seq.frames = doc.at("frames").get<std::size_t>();
      seq.stages = doc.at("stages").get<std::size_t>();
      for (const auto& row : doc.at("tokens")) {
        const auto values = row.get<std::vector<int>>();
        if (values.size() != seq.stages) throw Error(ErrorKind::kCorrupt, "token row has wrong length");
        seq.tokens.insert(seq.tokens.end(), values.begin(), values.end());
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kCorrupt, fmt::format("token file is malformed: {}", e.what()));
    }
    if (seq.tokens.size() != seq.frames * seq.stages) {
      throw Error(ErrorKind::kCorrupt, "token count does not match declared shape");
    }
  }
  if (seq.stages < 1 || seq.frames < 1) throw Error(ErrorKind::kShape, "token file is empty");
  return seq;
}

}  // namespace sevq
