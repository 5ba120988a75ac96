#include "sevq/baselines.hpp"

#include <limits>

#include <fmt/format.h>

#include "sevq/error.hpp"
#include "sevq/random.hpp"

namespace sevq {

ExactResult brute_force_min_se(const FeatureGraph& graph) {
  const std::size_t n = graph.vertex_count();
  if (n > kMaxExactVertices) {
    throw Error(ErrorKind::kConfig, fmt::format("exhaustive search is capped at {} vertices, got {}",
                                                kMaxExactVertices, n));
  }
  if (n == 0 || !(graph.volume() > 0.0)) {
    throw Error(ErrorKind::kValue, "graph has zero volume; nothing to minimize");
  }
  // a[i] <= 1 + max(a[0..i-1]); advance the rightmost position that can grow.
  std::vector<ClusterId> rgs(n, 0);
  std::vector<ClusterId> prefix_max(n, 0);
  ExactResult best;
  best.best_se = std::numeric_limits<double>::infinity();
  while (true) {
    const Partition p = Partition::from_labels(graph, rgs);
    const double se = partition_se(graph, p);
    ++best.partitions_evaluated;
    if (se < best.best_se) {
      best.best_se = se;
      best.best_partition = p;
    }
    std::size_t i = n - 1;
    while (i > 0 && rgs[i] > prefix_max[i - 1]) --i;
    if (i == 0) break;
    ++rgs[i];
    prefix_max[i] = std::max(prefix_max[i - 1], rgs[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      rgs[j] = 0;
      prefix_max[j] = prefix_max[i];
    }
  }
  return best;
}

namespace {

double assign_all(const FeatureMatrix& x, const FeatureMatrix& centroids, std::vector<ClusterId>& labels) {
  double wcss = 0.0;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const int k = nearest_centroid(centroids, x.row(t));
    labels[t] = k;
    wcss += squared_distance(x.row(t), centroids.row(static_cast<std::size_t>(k)));
  }
  return wcss;
}

FeatureMatrix kmeans_plus_plus(const FeatureMatrix& x, std::size_t k, Rng& rng) {
  FeatureMatrix centroids(k, x.cols());
  std::vector<double> closest(x.rows(), std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.index(x.rows()));
  for (std::size_t c = 0; c < k; ++c) {
    std::ranges::copy(x.row(pick), centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t t = 0; t < x.rows(); ++t) {
      closest[t] = std::min(closest[t], squared_distance(x.row(t), centroids.row(c)));
      total += closest[t];
    }
    if (c + 1 == k) break;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = x.rows() - 1;
      for (std::size_t t = 0; t < x.rows(); ++t) {
        acc += closest[t];
        if (acc > target && closest[t] > 0.0) {
          pick = t;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.index(x.rows()));
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  if (features.rows() == 0) throw Error(ErrorKind::kShape, "k-means on empty input");
  if (k == 0 || k > features.rows()) {
    throw Error(ErrorKind::kConfig,
                fmt::format("k-means needs 1 <= K <= rows, got K = {} for {} rows", k, features.rows()));
  }
  Rng rng(seed);
  KMeansResult r;
  FeatureMatrix centroids = kmeans_plus_plus(features, k, rng);
  std::vector<ClusterId> labels(features.rows(), -1);
  std::vector<ClusterId> previous;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    previous = labels;
    r.objective_trace.push_back(assign_all(features, centroids, labels));
    r.iterations = it + 1;
    if (labels == previous) break;
    FeatureMatrix sums(k, features.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t t = 0; t < features.rows(); ++t) {
      auto s = sums.row(static_cast<std::size_t>(labels[t]));
      const auto x = features.row(t);
      for (std::size_t d = 0; d < s.size(); ++d) s[d] += x[d];
      ++counts[static_cast<std::size_t>(labels[t])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto dst = centroids.row(c);
      const auto s = sums.row(c);
      for (std::size_t d = 0; d < dst.size(); ++d) dst[d] = s[d] / static_cast<double>(counts[c]);
    }
  }
  r.codebook.centroids = std::move(centroids);
  r.codebook.labels = std::move(labels);
  r.codebook.member_counts.assign(k, 0);
  for (ClusterId l : r.codebook.labels) ++r.codebook.member_counts[static_cast<std::size_t>(l)];
  return r;
}

RvqBaseline euclidean_rvq(const FeatureMatrix& features,
                          const std::vector<std::size_t>& cluster_counts, std::uint64_t seed) {
  if (cluster_counts.empty()) throw Error(ErrorKind::kConfig, "need at least one stage");
  features.check_finite();
  RvqBaseline out;
  out.model.dim = features.cols();
  out.model.config.stages = cluster_counts.size();
  out.model.config.seed = seed;
  Rng seeds(seed);
  FeatureMatrix residual = features;
  for (std::size_t s = 0; s < cluster_counts.size(); ++s) {
    KMeansResult km = kmeans(residual, cluster_counts[s], seeds.next());
    auto stage = StageModel::create(km.codebook.centroids, km.codebook.member_counts, FeatureMatrix(),
                                    {}, 0.0, StageMethod::kEuclidean);
    for (std::size_t t = 0; t < residual.rows(); ++t) {
      auto r = residual.row(t);
      const auto c = stage.centroids().row(static_cast<std::size_t>(nearest_centroid(stage.centroids(), r)));
      for (std::size_t d = 0; d < r.size(); ++d) r[d] -= c[d];
    }
    out.model.stages.push_back(std::move(stage));
  }
  out.tokens = encode(out.model, features);
  return out;
}

RvqBaseline euclidean_rvq(const FeatureMatrix& features, std::size_t k, std::size_t stages,
                          std::uint64_t seed) {
  return euclidean_rvq(features, std::vector<std::size_t>(stages, k), seed);
}

}  // namespace sevq
