#include "sevq/quantizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "sevq/error.hpp"
#include "sevq/random.hpp"

namespace sevq {

namespace {

// Residual rows at or below this fraction of the largest input norm count as
// zero: they are reconstructed exactly and carry no direction to cluster.
constexpr double kZeroResidual = 1e-12;

void check_dimension(std::size_t got, std::size_t expected) {
  if (got != expected) {
    throw Error(ErrorKind::kShape,
                fmt::format("feature dimension mismatch: expected H = {}, got {}", expected, got));
  }
}

// Up to `cap` members per cluster, most cosine-similar to the cluster mean
// first (ties to lower row); returned sorted by row.
std::vector<std::size_t> pick_anchors(const Partition& partition, const FeatureMatrix& rows,
                                      const FeatureMatrix& means, std::size_t cap) {
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < partition.cluster_count(); ++c) {
    const auto members = partition.members(static_cast<ClusterId>(c));
    std::vector<std::pair<double, std::size_t>> scored;
    const double mean_norm = norm(means.row(c));
    for (VertexId v : members) {
      const double score = mean_norm > 0.0 ? cosine(rows.row(v), means.row(c)) : 0.0;
      scored.emplace_back(score, v);
    }
    std::ranges::stable_sort(scored, [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t i = 0; i < std::min(cap, scored.size()); ++i) picked.push_back(scored[i].second);
  }
  std::ranges::sort(picked);
  return picked;
}

bool is_euclidean_stage(const TrainConfig& config, std::size_t stage_index) {
  return std::ranges::find(config.euclidean_stages, stage_index + 1) != config.euclidean_stages.end();
}

}  // namespace

StageModel StageModel::create(FeatureMatrix centroids, std::vector<std::size_t> member_counts,
                              FeatureMatrix anchors, std::vector<ClusterId> anchor_labels,
                              double threshold, StageMethod method) {
  if (centroids.rows() == 0) throw Error(ErrorKind::kShape, "stage has an empty codebook");
  centroids.check_finite();
  if (member_counts.size() != centroids.rows()) {
    throw Error(ErrorKind::kShape, "member_counts does not match codebook size");
  }
  if (anchor_labels.size() != anchors.rows()) {
    throw Error(ErrorKind::kShape, "anchor label count does not match anchor rows");
  }
  StageModel s;
  s.threshold_ = threshold;
  s.method_ = method;
  if (anchors.rows() > 0) {
    check_dimension(anchors.cols(), centroids.cols());
    std::vector<char> covered(centroids.rows(), 0);
    for (ClusterId l : anchor_labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= centroids.rows()) {
        throw Error(ErrorKind::kRange, fmt::format("anchor label {} outside codebook of size {}", l,
                                                   centroids.rows()));
      }
      covered[l] = 1;
    }
    if (std::ranges::find(covered, 0) != covered.end()) {
      throw Error(ErrorKind::kValue, "every cluster needs at least one anchor");
    }
    s.anchor_graph_ = build_graph(anchors, threshold);
    s.anchor_partition_ = Partition::from_labels(s.anchor_graph_, anchor_labels);
    s.anchor_summary_ = summarize(s.anchor_graph_, s.anchor_partition_);
  } else if (method == StageMethod::kStructuralEntropy) {
    throw Error(ErrorKind::kValue, "structural-entropy stage needs anchors");
  }
  s.centroids_ = std::move(centroids);
  s.member_counts_ = std::move(member_counts);
  s.anchors_ = std::move(anchors);
  s.anchor_labels_ = std::move(anchor_labels);
  return s;
}

FeatureMatrix subsample_rows(const FeatureMatrix& features, std::size_t max_rows,
                             std::uint64_t seed) {
  if (features.rows() <= max_rows) return features;
  Rng rng(seed);
  auto picked = rng.sample_without_replacement(features.rows(), max_rows);
  std::ranges::sort(picked);
  return features.select_rows(picked);
}

CodecModel train_codec(const FeatureMatrix& features, const TrainConfig& config, TrainLog* log) {
  if (features.rows() < 2) throw Error(ErrorKind::kShape, "training needs at least two rows");
  if (config.stages < 1) throw Error(ErrorKind::kConfig, "stage count must be at least 1");
  if (config.anchors_per_cluster < 1) {
    throw Error(ErrorKind::kConfig, "anchors per cluster must be at least 1");
  }
  features.check_finite();

  double scale = 0.0;
  for (std::size_t t = 0; t < features.rows(); ++t) scale = std::max(scale, norm(features.row(t)));
  if (!(scale > 0.0)) throw Error(ErrorKind::kValue, "every feature row is zero");
  const double zero_norm = kZeroResidual * scale;

  CodecModel model;
  model.dim = features.cols();
  model.config = config;
  if (log) log->stages.clear();
  Rng rng(config.seed);

  FeatureMatrix residual = features;
  for (std::size_t s = 0; s < config.stages; ++s) {
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> active;
    for (std::size_t t = 0; t < residual.rows(); ++t) {
      if (norm(residual.row(t)) > zero_norm) active.push_back(t);
    }
    const FeatureMatrix rows = residual.select_rows(active);
    const FeatureGraph graph = build_graph(rows, config.threshold);

    StageTrainStats stats;
    stats.rows = rows.rows();
    stats.edges = graph.edge_count();
    for (double d : graph.degrees()) stats.isolated += d > 0.0 ? 0 : 1;

    HierarchyStats hierarchy;
    Partition partition = hierarchical_minimize(graph, config.subset_size, &hierarchy);
    stats.hierarchy_rounds = hierarchy.rounds;
    if (graph.volume() > 0.0) {
      stats.se_singletons = partition_se(graph, Partition::singletons(graph));
      stats.se_minimized = partition_se(graph, partition);
    }
    partition = fold_isolated_vertices(graph, partition, rows);
    Codebook codebook = extract_centroids(partition, rows);
    const FeatureMatrix means = codebook.centroids;

    if (config.disentangle && codebook.size() >= 2) {
      std::vector<FeatureMatrix> samples(codebook.size());
      for (std::size_t c = 0; c < codebook.size(); ++c) {
        const auto members = partition.members(static_cast<ClusterId>(c));
        auto picks = rng.sample_without_replacement(members.size(),
                                                    std::min(members.size(), config.disentangle_samples));
        std::vector<std::size_t> picked_rows;
        for (std::size_t p : picks) picked_rows.push_back(members[p]);
        samples[c] = rows.select_rows(picked_rows);
      }
      DisentangleOptions options;
      options.steps = config.disentangle_steps;
      options.learning_rate = config.learning_rate;
      auto result = disentangle(codebook, samples, options);
      if (!result.objective_trace.empty()) {
        stats.disentangle_start = result.objective_trace.front();
        stats.disentangle_end = result.objective_trace.back();
      }
      codebook = std::move(result.codebook);
    }

    const auto anchor_rows = pick_anchors(partition, rows, means, config.anchors_per_cluster);
    std::vector<ClusterId> anchor_labels;
    for (std::size_t r : anchor_rows) anchor_labels.push_back(partition.label(static_cast<VertexId>(r)));
    stats.anchors = anchor_rows.size();
    stats.clusters = codebook.size();

    // Training labels: graph labels for active rows, nearest centroid for zero rows.
    std::vector<int> labels(residual.rows(), -1);
    for (std::size_t i = 0; i < active.size(); ++i) labels[active[i]] = partition.label(static_cast<VertexId>(i));
    for (std::size_t t = 0; t < residual.rows(); ++t) {
      if (labels[t] < 0) labels[t] = nearest_centroid(codebook.centroids, residual.row(t));
    }
    for (std::size_t t = 0; t < residual.rows(); ++t) {
      auto r = residual.row(t);
      const auto c = codebook.centroids.row(static_cast<std::size_t>(labels[t]));
      for (std::size_t d = 0; d < r.size(); ++d) r[d] -= c[d];
    }

    model.stages.push_back(StageModel::create(
        codebook.centroids, codebook.member_counts, rows.select_rows(anchor_rows),
        std::move(anchor_labels), config.threshold,
        is_euclidean_stage(config, s) ? StageMethod::kEuclidean : StageMethod::kStructuralEntropy));

    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (log) {
      if (s == 0) log->first_graph = graph;
      log->stages.push_back(stats);
    }

    double largest = 0.0;
    for (std::size_t t = 0; t < residual.rows(); ++t) largest = std::max(largest, norm(residual.row(t)));
    if (largest <= zero_norm && s + 1 < config.stages) {
      model.truncated = true;
      model.stop_reason = fmt::format("residual collapse after stage {}", s + 1);
      break;
    }
  }
  return model;
}

int nearest_centroid(const FeatureMatrix& centroids, std::span<const double> x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.rows(); ++k) {
    const double d = squared_distance(centroids.row(k), x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

int assign(const StageModel& stage, std::span<const double> x, AssignTrace* trace) {
  check_dimension(x.size(), stage.dim());
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kValue, "query has non-finite values");
  }
  if (trace) *trace = {};
  auto fallback = [&] {
    if (trace) trace->fallback = true;
    return nearest_centroid(stage.centroids(), x);
  };
  if (stage.method() == StageMethod::kEuclidean || stage.anchors().rows() == 0) {
    return nearest_centroid(stage.centroids(), x);
  }
  if (!(norm(x) > 0.0)) return fallback();

  const QueryAttachment query = attach_query(stage.anchors(), x, stage.threshold());
  if (query.degree == 0.0) return fallback();

  const auto& graph = stage.anchor_graph();
  const auto& partition = stage.anchor_partition();
  int best = -1;
  double best_delta = 0.0;
  for (const auto& [cluster, w] : query_cluster_weights(partition, query)) {
    const SEDelta d = assign_delta(graph, partition, stage.anchor_summary(), query, cluster);
    if (trace) {
      trace->candidates.push_back(
          {cluster, d.delta, printed_select_delta(graph, partition, query, cluster)});
    }
    if (best < 0 || d.delta > best_delta) {
      best = cluster;
      best_delta = d.delta;
    }
  }
  return best;
}

TokenSequence encode(const CodecModel& model, const FeatureMatrix& features) {
  if (model.stages.empty()) throw Error(ErrorKind::kValue, "model has no stages");
  check_dimension(features.cols(), model.dim);
  TokenSequence out;
  out.frames = features.rows();
  out.stages = model.stages.size();
  out.tokens.resize(out.frames * out.stages);
  std::vector<double> r(model.dim);
  for (std::size_t t = 0; t < features.rows(); ++t) {
    std::ranges::copy(features.row(t), r.begin());
    for (std::size_t s = 0; s < model.stages.size(); ++s) {
      const StageModel& stage = model.stages[s];
      const int token = assign(stage, r);
      out.at(t, s) = token;
      const auto c = stage.centroids().row(static_cast<std::size_t>(token));
      for (std::size_t d = 0; d < r.size(); ++d) r[d] -= c[d];
    }
  }
  return out;
}

std::vector<FeatureMatrix> decode_stages(const CodecModel& model, const TokenSequence& tokens) {
  if (tokens.stages > model.stages.size()) {
    throw Error(ErrorKind::kShape, fmt::format("tokens have {} stages, model has {}",
                                               tokens.stages, model.stages.size()));
  }
  if (tokens.tokens.size() != tokens.frames * tokens.stages) {
    throw Error(ErrorKind::kShape, "token matrix size does not match its shape");
  }
  std::vector<FeatureMatrix> out;
  FeatureMatrix acc(tokens.frames, model.dim);
  for (std::size_t s = 0; s < tokens.stages; ++s) {
    const StageModel& stage = model.stages[s];
    for (std::size_t t = 0; t < tokens.frames; ++t) {
      const int token = tokens.at(t, s);
      if (token < 0 || static_cast<std::size_t>(token) >= stage.size()) {
        throw Error(ErrorKind::kRange,
                    fmt::format("token {} at frame {}, stage {} is outside codebook of size {}",
                                token, t, s + 1, stage.size()));
      }
      const auto c = stage.centroids().row(static_cast<std::size_t>(token));
      auto row = acc.row(t);
      for (std::size_t d = 0; d < row.size(); ++d) row[d] += c[d];
    }
    out.push_back(acc);
  }
  return out;
}

FeatureMatrix decode(const CodecModel& model, const TokenSequence& tokens, std::size_t stage_limit) {
  auto stages = decode_stages(model, tokens);
  if (stages.empty()) throw Error(ErrorKind::kValue, "token matrix has no stages");
  const std::size_t k = std::min(stage_limit, stages.size());
  if (k == 0) return FeatureMatrix(tokens.frames, model.dim);
  return std::move(stages[k - 1]);
}

double mean_squared_error(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kShape, fmt::format("shape mismatch: {}x{} vs {}x{}", a.rows(), a.cols(),
                                               b.rows(), b.cols()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return a.data().empty() ? 0.0 : s / static_cast<double>(a.data().size());
}

DistortionReport distortion_report(const FeatureMatrix& reference,
                                   std::span<const FeatureMatrix> cumulative) {
  if (cumulative.empty()) throw Error(ErrorKind::kValue, "no reconstruction to compare");
  DistortionReport r;
  for (const auto& x : cumulative) r.stage_mse.push_back(mean_squared_error(reference, x));
  const FeatureMatrix& last = cumulative.back();
  r.final_mse = r.stage_mse.back();

  double cos_sum = 0.0;
  for (std::size_t t = 0; t < reference.rows(); ++t) {
    const double na = norm(reference.row(t));
    const double nb = norm(last.row(t));
    if (na == 0.0 && nb == 0.0) {
      cos_sum += 1.0;
    } else if (na > 0.0 && nb > 0.0) {
      cos_sum += cosine(reference.row(t), last.row(t));
    }
  }
  r.mean_cosine = reference.rows() ? cos_sum / static_cast<double>(reference.rows()) : 0.0;

  r.rmse.assign(reference.cols(), 0.0);
  for (std::size_t t = 0; t < reference.rows(); ++t) {
    for (std::size_t d = 0; d < reference.cols(); ++d) {
      const double e = reference(t, d) - last(t, d);
      r.rmse[d] += e * e;
    }
  }
  for (double& v : r.rmse) v = std::sqrt(v / static_cast<double>(std::max<std::size_t>(1, reference.rows())));
  return r;
}

DistortionReport distortion_report(const FeatureMatrix& reference,
                                   const FeatureMatrix& reconstruction) {
  return distortion_report(reference, std::span<const FeatureMatrix>(&reconstruction, 1));
}

}  // namespace sevq
