#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sevq/codebook.hpp"
#include "sevq/entropy.hpp"
#include "sevq/graph.hpp"
#include "sevq/matrix.hpp"

namespace sevq {

enum class StageMethod {
  kStructuralEntropy,  // node-game assignment on the anchor graph
  kEuclidean,          // nearest centroid
};

/// One residual stage: its codebook and the anchor graph that out-of-sample
/// vectors attach to at quantization time. Immutable once created.
class StageModel {
 public:
  StageModel() = default;

  /// Builds the anchor graph and partition. Every cluster needs at least one
  /// anchor unless the stage has no anchors at all (pure Euclidean stage).
  static StageModel create(FeatureMatrix centroids, std::vector<std::size_t> member_counts,
                           FeatureMatrix anchors, std::vector<ClusterId> anchor_labels,
                           double threshold, StageMethod method);

  std::size_t size() const { return centroids_.rows(); }
  std::size_t dim() const { return centroids_.cols(); }
  const FeatureMatrix& centroids() const { return centroids_; }
  const std::vector<std::size_t>& member_counts() const { return member_counts_; }
  const FeatureMatrix& anchors() const { return anchors_; }
  const std::vector<ClusterId>& anchor_labels() const { return anchor_labels_; }
  const FeatureGraph& anchor_graph() const { return anchor_graph_; }
  const Partition& anchor_partition() const { return anchor_partition_; }
  const PartitionSummary& anchor_summary() const { return anchor_summary_; }
  double threshold() const { return threshold_; }
  StageMethod method() const { return method_; }

 private:
  FeatureMatrix centroids_;
  std::vector<std::size_t> member_counts_;
  FeatureMatrix anchors_;
  std::vector<ClusterId> anchor_labels_;
  FeatureGraph anchor_graph_;
  Partition anchor_partition_;
  PartitionSummary anchor_summary_;
  double threshold_ = 0.0;
  StageMethod method_ = StageMethod::kStructuralEntropy;
};

struct TrainConfig {
  double threshold = 0.2;
  std::size_t subset_size = 1024;
  std::size_t stages = 8;
  std::size_t anchors_per_cluster = 64;
  std::size_t max_nodes = 10000;
  std::uint64_t seed = 0;
  bool disentangle = false;
  std::size_t disentangle_steps = 100;
  double learning_rate = 0.01;
  std::size_t disentangle_samples = 256;
  std::vector<std::size_t> euclidean_stages;  // 1-based stages that assign by Euclidean distance
};

struct CodecModel {
  std::size_t dim = 0;
  std::vector<StageModel> stages;
  TrainConfig config;
  bool truncated = false;     // fewer stages than requested
  std::string stop_reason;    // empty unless truncated
};

/// T x S token matrix, row-major.
struct TokenSequence {
  std::size_t frames = 0;
  std::size_t stages = 0;
  std::vector<int> tokens;

  int at(std::size_t t, std::size_t s) const { return tokens[t * stages + s]; }
  int& at(std::size_t t, std::size_t s) { return tokens[t * stages + s]; }
  bool operator==(const TokenSequence&) const = default;
};

struct StageTrainStats {
  std::size_t clusters = 0;
  std::size_t rows = 0;           // rows with a nonzero residual
  std::size_t edges = 0;
  std::size_t isolated = 0;
  std::size_t anchors = 0;
  std::size_t hierarchy_rounds = 0;
  double se_singletons = 0.0;
  double se_minimized = 0.0;
  double disentangle_start = 0.0;
  double disentangle_end = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<StageTrainStats> stages;
  FeatureGraph first_graph;       // stage-1 similarity graph, for dumping
};

/// Residual structural-entropy codec. Stage 1 clusters X; stage s > 1 clusters
/// the residual left by stages 1..s-1. Stops early when every residual is zero.
CodecModel train_codec(const FeatureMatrix& features, const TrainConfig& config,
                       TrainLog* log = nullptr);

/// Uniform sample of at most `max_rows` rows without replacement (seeded),
/// returned in ascending row order.
FeatureMatrix subsample_rows(const FeatureMatrix& features, std::size_t max_rows,
                             std::uint64_t seed);

struct CandidateDelta {
  ClusterId cluster;
  double delta;          // normative SE decrease
  double printed_delta;  // four-term closed form, diagnostic
};

struct AssignTrace {
  bool fallback = false;  // Euclidean nearest centroid was used
  std::vector<CandidateDelta> candidates;
};

/// Token for one vector at one stage. Joins the edge-connected cluster whose
/// join leaves the smallest 2D SE (ties to the lowest id); a vector with no
/// edge to any anchor falls back to the nearest centroid.
int assign(const StageModel& stage, std::span<const double> x, AssignTrace* trace = nullptr);

int nearest_centroid(const FeatureMatrix& centroids, std::span<const double> x);

TokenSequence encode(const CodecModel& model, const FeatureMatrix& features);

/// Sum of the selected centroids over the first `stage_limit` stages (all by default).
FeatureMatrix decode(const CodecModel& model, const TokenSequence& tokens,
                     std::size_t stage_limit = static_cast<std::size_t>(-1));

/// Cumulative reconstructions after 1, 2, ..., S stages.
std::vector<FeatureMatrix> decode_stages(const CodecModel& model, const TokenSequence& tokens);

struct DistortionReport {
  std::vector<double> stage_mse;
  double final_mse = 0.0;
  double mean_cosine = 0.0;
  std::vector<double> rmse;  // per dimension
};

DistortionReport distortion_report(const FeatureMatrix& reference,
                                   std::span<const FeatureMatrix> cumulative);
DistortionReport distortion_report(const FeatureMatrix& reference,
                                   const FeatureMatrix& reconstruction);

double mean_squared_error(const FeatureMatrix& a, const FeatureMatrix& b);

}  // namespace sevq
