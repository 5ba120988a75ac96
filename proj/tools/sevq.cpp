#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "sevq/baselines.hpp"
#include "sevq/error.hpp"
#include "sevq/feature_io.hpp"
#include "sevq/graph.hpp"
#include "sevq/quantizer.hpp"
#include "sevq/random.hpp"
#include "sevq/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Options {
  std::string features;
  std::string model = "model.json";
  std::string tokens;
  std::string output;
  std::string reference;
  std::string report;
  std::string format;
  std::optional<std::string> dump_graph;
  bool diagnostic_eq4 = false;
  bool csv = false;
  sevq::TrainConfig train;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw sevq::Error(sevq::ErrorKind::kIo, fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw sevq::Error(sevq::ErrorKind::kIo, fmt::format("failed writing '{}'", path));
}

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw sevq::Error(sevq::ErrorKind::kConfig, fmt::format("{} is required", flag));
  if (!fs::exists(path)) throw sevq::Error(sevq::ErrorKind::kIo, fmt::format("{} '{}' does not exist", flag, path));
}

// JSON goes to --report when given; stdout gets JSON, or CSV under --csv.
void emit(const Options& opt, const json& report, const std::string& csv) {
  if (!opt.report.empty()) write_text(opt.report, report.dump(2) + "\n");
  if (opt.csv) {
    std::cout << csv;
  } else if (opt.report.empty()) {
    std::cout << report.dump(2) << "\n";
  }
}

sevq::TokenFormat token_format(const Options& opt, const std::string& path) {
  if (opt.format == "csv") return sevq::TokenFormat::kCsv;
  if (opt.format == "json") return sevq::TokenFormat::kJson;
  return sevq::token_format_for(path);
}

// The effective training set: at most max_nodes rows, uniformly sampled.
sevq::FeatureMatrix training_rows(const sevq::FeatureMatrix& x, const sevq::TrainConfig& cfg) {
  return sevq::subsample_rows(x, cfg.max_nodes, cfg.seed);
}

int cmd_train(const Options& opt) {
  require_file("--features", opt.features);
  const auto start = Clock::now();
  const auto all = sevq::load_features(opt.features);
  const auto x = training_rows(all, opt.train);
  sevq::TrainLog log;
  const auto model = sevq::train_codec(x, opt.train, &log);
  sevq::save_model(model, opt.model);
  if (opt.dump_graph) {
    const std::string path = opt.dump_graph->empty() ? "graph.csv" : *opt.dump_graph;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw sevq::Error(sevq::ErrorKind::kIo, fmt::format("cannot write '{}'", path));
    sevq::write_edge_list(log.first_graph, out);
  }
  json report = sevq::train_report(model, log, seconds_since(start));
  report["input_rows"] = all.rows();
  report["training_rows"] = x.rows();
  report["model"] = opt.model;
  emit(opt, report, sevq::train_report_csv(log));
  return kExitOk;
}

int cmd_encode(const Options& opt) {
  require_file("--model", opt.model);
  require_file("--features", opt.features);
  if (opt.tokens.empty()) throw sevq::Error(sevq::ErrorKind::kConfig, "--tokens is required");
  const auto model = sevq::load_model(opt.model);
  const auto x = sevq::load_features(opt.features);
  const auto tokens = sevq::encode(model, x);
  sevq::save_tokens(tokens, opt.tokens, token_format(opt, opt.tokens));

  json report = {{"frames", tokens.frames},
                 {"stages", tokens.stages},
                 {"tokens", opt.tokens},
                 {"config", sevq::config_to_json(model.config)}};
  std::string csv = "stage,fallbacks,argmax_disagreements\n";
  if (opt.diagnostic_eq4) {
    // Replays assignment with traces; the printed closed form is compared
    // against the normative SE difference per candidate and per argmax.
    json stages = json::array();
    std::vector<double> residual(x.data().begin(), x.data().end());
    for (std::size_t s = 0; s < model.stages.size(); ++s) {
      const auto& stage = model.stages[s];
      std::size_t fallbacks = 0, disagreements = 0, candidates = 0;
      double max_abs_diff = 0.0;
      for (std::size_t t = 0; t < x.rows(); ++t) {
        std::span<double> r(residual.data() + t * x.cols(), x.cols());
        sevq::AssignTrace trace;
        const int token = sevq::assign(stage, r, &trace);
        if (trace.fallback) {
          ++fallbacks;
        } else {
          const auto* best = &trace.candidates.front();
          for (const auto& c : trace.candidates) {
            ++candidates;
            max_abs_diff = std::max(max_abs_diff, std::abs(c.printed_delta - c.delta));
            if (c.printed_delta > best->printed_delta) best = &c;
          }
          if (best->cluster != static_cast<sevq::ClusterId>(token)) ++disagreements;
        }
        const auto c = stage.centroids().row(static_cast<std::size_t>(token));
        for (std::size_t h = 0; h < x.cols(); ++h) r[h] -= c[h];
      }
      stages.push_back({{"stage", s + 1},
                        {"fallbacks", fallbacks},
                        {"candidates", candidates},
                        {"argmax_disagreements", disagreements},
                        {"max_abs_delta_difference", max_abs_diff}});
      csv += fmt::format("{},{},{}\n", s + 1, fallbacks, disagreements);
    }
    report["diagnostic_eq4"] = stages;
  }
  emit(opt, report, csv);
  return kExitOk;
}

int cmd_decode(const Options& opt) {
  require_file("--model", opt.model);
  require_file("--tokens", opt.tokens);
  const auto model = sevq::load_model(opt.model);
  const auto tokens = sevq::load_tokens(opt.tokens, token_format(opt, opt.tokens));
  const auto stages = sevq::decode_stages(model, tokens);
  if (!opt.output.empty()) {
    sevq::save_features(stages.back(), opt.output, sevq::feature_format_for(opt.output));
  }
  json report = {{"frames", tokens.frames}, {"stages", tokens.stages}};
  if (!opt.output.empty()) report["output"] = opt.output;
  std::string csv = "stage,mse\n";
  if (!opt.reference.empty()) {
    require_file("--reference", opt.reference);
    const auto reference = sevq::load_features(opt.reference);
    const auto distortion = sevq::distortion_report(reference, stages);
    report["distortion"] = sevq::distortion_to_json(distortion);
    csv = sevq::distortion_csv(distortion);
  }
  emit(opt, report, csv);
  return kExitOk;
}

json codec_block(const sevq::CodecModel& model, const sevq::DistortionReport& distortion) {
  json stages = json::array();
  std::vector<std::size_t> ks;
  for (std::size_t s = 0; s < model.stages.size(); ++s) {
    ks.push_back(model.stages[s].size());
    stages.push_back({{"stage", s + 1}, {"k", model.stages[s].size()}});
  }
  return {{"codebook_sizes", ks}, {"stages", stages}, {"held_out", sevq::distortion_to_json(distortion)}};
}

int cmd_compare(const Options& opt) {
  require_file("--features", opt.features);
  const auto all = sevq::load_features(opt.features);
  if (all.rows() < 5) throw sevq::Error(sevq::ErrorKind::kShape, "compare needs at least 5 rows");

  // 80/20 split from one seeded shuffle; both parts keep ascending row order.
  sevq::Rng rng(opt.train.seed);
  auto order = rng.sample_without_replacement(all.rows(), all.rows());
  const std::size_t n_train = all.rows() * 4 / 5;
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::ranges::sort(train_idx);
  std::ranges::sort(test_idx);
  const auto train = training_rows(all.select_rows(train_idx), opt.train);
  const auto test = all.select_rows(test_idx);

  auto start = Clock::now();
  const auto se_model = sevq::train_codec(train, opt.train);
  const double se_seconds = seconds_since(start);

  std::vector<std::size_t> ks;
  for (const auto& s : se_model.stages) ks.push_back(s.size());
  start = Clock::now();
  const auto baseline = sevq::euclidean_rvq(train, ks, opt.train.seed);
  const double rvq_seconds = seconds_since(start);

  const auto se_dist = sevq::distortion_report(test, sevq::decode_stages(se_model, sevq::encode(se_model, test)));
  const auto rvq_dist = sevq::distortion_report(
      test, sevq::decode_stages(baseline.model, sevq::encode(baseline.model, test)));

  json report = {{"config", sevq::config_to_json(opt.train)},
                 {"train_rows", train.rows()},
                 {"held_out_rows", test.rows()},
                 {"se", codec_block(se_model, se_dist)},
                 {"kmeans_rvq", codec_block(baseline.model, rvq_dist)},
                 {"final_mse_ratio", rvq_dist.final_mse > 0.0 ? se_dist.final_mse / rvq_dist.final_mse : 1.0},
                 {"timing", {{"se_seconds", se_seconds}, {"kmeans_rvq_seconds", rvq_seconds}}}};
  std::string csv = "stage,k,se_mse,kmeans_rvq_mse\n";
  for (std::size_t s = 0; s < ks.size(); ++s) {
    csv += fmt::format("{},{},{},{}\n", s + 1, ks[s], se_dist.stage_mse[s], rvq_dist.stage_mse[s]);
  }
  emit(opt, report, csv);
  return kExitOk;
}

int exit_code_for(sevq::ErrorKind kind) {
  switch (kind) {
    case sevq::ErrorKind::kIo:
    case sevq::ErrorKind::kConfig:
      return kExitUsage;
    case sevq::ErrorKind::kInvariant:
      return kExitInternal;
    default:
      return kExitData;
  }
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Structural-entropy vector quantization codec"};
  app.require_subcommand(1);

  auto add_common = [&opt](CLI::App* cmd) {
    cmd->add_option("--features", opt.features, "Feature matrix (CSV, or .f32 with .json sidecar)");
    cmd->add_option("--model", opt.model, "Model JSON path")->capture_default_str();
    cmd->add_option("--report", opt.report, "Write the JSON report here instead of stdout");
    cmd->add_flag("--csv", opt.csv, "Print plot-ready CSV on stdout");
  };
  auto add_train = [&opt](CLI::App* cmd) {
    auto& c = opt.train;
    cmd->add_option("--tau", c.threshold, "Cosine edge threshold")->capture_default_str();
    cmd->add_option("--subset-n", c.subset_size, "Hierarchical minimization group size")->capture_default_str();
    cmd->add_option("--stages", c.stages, "Residual stages")->capture_default_str();
    cmd->add_option("--anchors-per-cluster", c.anchors_per_cluster, "Anchors kept per cluster")
        ->capture_default_str();
    cmd->add_option("--max-nodes", c.max_nodes, "Maximum training rows (uniform seeded subsample)")
        ->capture_default_str();
    cmd->add_option("--seed", c.seed, "Seed for every random draw")->capture_default_str();
    cmd->add_flag("--disentangle", c.disentangle, "Apply vCLUB centroid disentanglement");
    cmd->add_option("--disentangle-steps", c.disentangle_steps, "Disentanglement steps")->capture_default_str();
    cmd->add_option("--learning-rate", c.learning_rate, "Disentanglement step size")->capture_default_str();
    cmd->add_option("--euclidean-stage", c.euclidean_stages,
                    "1-based stage that assigns by Euclidean distance (repeatable)");
  };

  auto* train = app.add_subcommand("train", "Train a codec and write model + report");
  add_common(train);
  add_train(train);
  train->add_option("--dump-graph", opt.dump_graph, "Write the stage-1 graph as i,j,w CSV")
      ->expected(0, 1)
      ->default_str("graph.csv");

  auto* encode = app.add_subcommand("encode", "Quantize features to tokens");
  add_common(encode);
  encode->add_option("--tokens", opt.tokens, "Token output path (.csv or .json)");
  encode->add_option("--format", opt.format, "Token format")->check(CLI::IsMember({"csv", "json"}));
  encode->add_flag("--diagnostic-eq4", opt.diagnostic_eq4,
                   "Report agreement of the printed closed-form delta with the direct difference");

  auto* decode = app.add_subcommand("decode", "Reconstruct features from tokens");
  add_common(decode);
  decode->add_option("--tokens", opt.tokens, "Token input path (.csv or .json)");
  decode->add_option("--format", opt.format, "Token format")->check(CLI::IsMember({"csv", "json"}));
  decode->add_option("--output", opt.output, "Reconstruction output path");
  decode->add_option("--reference", opt.reference, "Reference features for a distortion report");

  auto* compare = app.add_subcommand("compare", "Compare against Euclidean k-means RVQ on a held-out split");
  add_common(compare);
  add_train(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, "usage", e.what());
  }

  try {
    if (opt.train.threshold >= 1.0) throw sevq::Error(sevq::ErrorKind::kConfig, "--tau must be < 1");
    if (opt.train.subset_size < 2) throw sevq::Error(sevq::ErrorKind::kConfig, "--subset-n must be >= 2");
    if (opt.train.stages < 1) throw sevq::Error(sevq::ErrorKind::kConfig, "--stages must be >= 1");
    if (opt.train.anchors_per_cluster < 1 || opt.train.max_nodes < 2) {
      throw sevq::Error(sevq::ErrorKind::kConfig, "--anchors-per-cluster must be >= 1 and --max-nodes >= 2");
    }
    if (train->parsed()) return cmd_train(opt);
    if (encode->parsed()) return cmd_encode(opt);
    if (decode->parsed()) return cmd_decode(opt);
    return cmd_compare(opt);
  } catch (const sevq::Error& e) {
    const int code = exit_code_for(e.kind());
    return fail(code, std::string(sevq::to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return fail(kExitInternal, "internal", e.what());
  }
}
