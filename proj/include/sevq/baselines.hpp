#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sevq/codebook.hpp"
#include "sevq/entropy.hpp"
#include "sevq/quantizer.hpp"

namespace sevq {

inline constexpr std::size_t kMaxExactVertices = 12;

struct ExactResult {
  Partition best_partition;
  double best_se = 0.0;
  std::uint64_t partitions_evaluated = 0;
};

/// Global 2D SE minimum over every set partition of the vertices, enumerated
/// as restricted-growth strings in lexicographic order (first minimum wins).
ExactResult brute_force_min_se(const FeatureGraph& graph);

struct KMeansResult {
  Codebook codebook;
  std::vector<double> objective_trace;  // within-cluster sum of squares per iteration
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKMeansMaxIterations = 300;

/// Lloyd's algorithm from a seeded k-means++ start. Stops when assignments
/// are stable or after `max_iterations`. Empty clusters keep their centroid.
KMeansResult kmeans(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = kKMeansMaxIterations);

struct RvqBaseline {
  CodecModel model;       // Euclidean stages, no anchors
  TokenSequence tokens;   // training tokens
};

/// Euclidean residual VQ: per stage, k-means on the residual with
/// `cluster_counts[s]` centroids and nearest-centroid assignment.
RvqBaseline euclidean_rvq(const FeatureMatrix& features,
                          const std::vector<std::size_t>& cluster_counts, std::uint64_t seed);
RvqBaseline euclidean_rvq(const FeatureMatrix& features, std::size_t k, std::size_t stages,
                          std::uint64_t seed);

}  // namespace sevq
