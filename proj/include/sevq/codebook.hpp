#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "sevq/entropy.hpp"
#include "sevq/graph.hpp"
#include "sevq/matrix.hpp"

namespace sevq {

/// Cluster centroids plus the clustering they were computed from.
struct Codebook {
  FeatureMatrix centroids;                  // K x H
  std::vector<std::size_t> member_counts;   // per cluster
  std::vector<ClusterId> labels;            // training row -> cluster

  std::size_t size() const { return centroids.rows(); }
};

/// Minimum merge gain for the greedy optimizers to accept a merge.
inline constexpr double kMergeTolerance = 1e-12;

/// Agglomerative 2D SE minimization: repeatedly merges the edge-connected
/// cluster pair with the largest SE decrease (ties to the smallest (a, b))
/// until no merge decreases SE by more than kMergeTolerance. If `se_trace`
/// is given it receives the SE before the first merge and after every merge.
Partition vanilla_greedy(const FeatureGraph& graph, const Partition& start,
                         std::vector<double>* se_trace = nullptr);
Partition vanilla_greedy(const FeatureGraph& graph);

struct HierarchyStats {
  std::size_t rounds = 0;
  std::size_t final_subset_size = 0;
};

/// Subset-wise minimization. Clusters, ordered by smallest vertex id, are cut
/// into consecutive groups of `subset_size`; each group's induced subgraph is
/// minimized greedily and the surviving clusters carry over. Stops after a
/// round with a single group; a round without any merge doubles the subset
/// size. Returned cluster ids are ordered by smallest vertex.
Partition hierarchical_minimize(const FeatureGraph& graph, std::size_t subset_size,
                                HierarchyStats* stats = nullptr);

/// Moves every zero-degree vertex into the cluster of its most cosine-similar
/// non-isolated vertex (ties to the lower cluster id). If no vertex has an
/// edge the partition is returned unchanged.
Partition fold_isolated_vertices(const FeatureGraph& graph, const Partition& partition,
                                 const FeatureMatrix& features);

/// Per-cluster mean of the member rows.
Codebook extract_centroids(const Partition& partition, const FeatureMatrix& features);

// ---------------------------------------------------------------- vCLUB

/// Linear-Gaussian conditional density N(y; W x + b, diag(variance)).
struct GaussianConditional {
  FeatureMatrix weights;          // out x in
  std::vector<double> bias;       // out
  std::vector<double> variance;   // out, all > 0

  double log_density(std::span<const double> target, std::span<const double> input) const;
};

inline constexpr double kDefaultRidge = 1e-6;

/// Ridge-regularized least squares fit of targets on inputs (the intercept is
/// not penalized). Each residual variance is the mean squared residual plus
/// `ridge`, which keeps exactly reproducible data from collapsing the density.
GaussianConditional fit_conditional(const FeatureMatrix& targets, const FeatureMatrix& inputs,
                                    double ridge = kDefaultRidge);

/// Contrastive log-ratio estimate of I(e_i; e_j) from N paired samples:
///   (1/N^2) sum_M sum_J [log q(e_i,M | e_j,M) - log q(e_i,J | e_j,M)]
/// with q = `model` fitted for e_i given e_j. Can be negative for finite N.
double vclub_estimate(const FeatureMatrix& samples_i, const FeatureMatrix& samples_j,
                      const GaussianConditional& model);

/// One fitted conditional per ordered cluster pair (i, j), i < j, modelling
/// the i-th cluster's representation given the j-th one.
struct VariationalModel {
  std::vector<std::pair<ClusterId, ClusterId>> pairs;
  std::vector<GaussianConditional> conditionals;
};

/// Sum over cluster pairs of the vCLUB estimate between their sample clouds.
/// A cluster's samples move rigidly with its centroid and are read on the unit
/// sphere (cosine geometry), i.e. sample m of cluster k is represented by
/// normalize(c_k + x_km - c0_k) where c0_k is the starting centroid.
class DisentangleObjective {
 public:
  DisentangleObjective(const FeatureMatrix& initial_centroids,
                       std::vector<FeatureMatrix> cluster_samples, double ridge = kDefaultRidge);

  const std::vector<std::pair<ClusterId, ClusterId>>& pairs() const { return pairs_; }

  std::vector<FeatureMatrix> representations(const FeatureMatrix& centroids) const;
  VariationalModel fit(const FeatureMatrix& centroids) const;
  double value(const FeatureMatrix& centroids, const VariationalModel& model) const;
  /// Gradient of value() with the variational model held fixed.
  FeatureMatrix gradient(const FeatureMatrix& centroids, const VariationalModel& model) const;

 private:
  FeatureMatrix initial_;
  std::vector<FeatureMatrix> samples_;
  std::vector<std::pair<ClusterId, ClusterId>> pairs_;
  double ridge_;
};

struct DisentangleOptions {
  std::size_t steps = 100;
  double learning_rate = 0.01;
  double ridge = kDefaultRidge;
};

struct DisentangleResult {
  Codebook codebook;
  std::vector<double> objective_trace;  // after refitting, one entry per accepted step plus the start
};

/// Gradient descent on the pairwise vCLUB objective over centroids. The
/// variational model is refit after every step and a step is only accepted
/// if the refit objective does not increase (step halving otherwise).
/// Clusters with fewer than two samples stay fixed; labels and member counts
/// are never changed.
DisentangleResult disentangle(const Codebook& codebook,
                              std::span<const FeatureMatrix> cluster_samples,
                              const DisentangleOptions& options = {});

}  // namespace sevq
