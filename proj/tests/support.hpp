#pragma once

// Fixtures and independent oracles shared by the unit and acceptance tests.
// The oracles recompute everything from raw edge lists and plain loops and
// never call into the SE code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sevq/graph.hpp"
#include "sevq/matrix.hpp"
#include "sevq/quantizer.hpp"
#include "sevq/random.hpp"

namespace fixture {

using sevq::FeatureGraph;
using sevq::FeatureMatrix;
using sevq::WeightedEdge;

inline FeatureGraph graph(std::size_t n, std::vector<WeightedEdge> edges) {
  return FeatureGraph::from_edges(n, edges);
}

inline FeatureGraph two_unit_edges() { return graph(4, {{0, 1, 1.0}, {2, 3, 1.0}}); }

/// `cliques` groups of `size` vertices, internal weight 1, every cross pair `cross`.
inline FeatureGraph planted_cliques(std::size_t cliques, std::size_t size, double cross) {
  std::vector<WeightedEdge> edges;
  const std::size_t n = cliques * size;
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      const bool same = u / size == v / size;
      if (same) edges.push_back({u, v, 1.0});
      else if (cross > 0.0) edges.push_back({u, v, cross});
    }
  }
  return graph(n, edges);
}

/// Erdos-Renyi graph with weights uniform in (0.05, 1].
inline FeatureGraph random_graph(sevq::Rng& rng, std::size_t n, double p) {
  std::vector<WeightedEdge> edges;
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < p) edges.push_back({u, v, 0.05 + 0.95 * (1.0 - rng.uniform())});
    }
  }
  return graph(n, edges);
}

/// Two or three dense groups joined by a couple of weak links.
inline FeatureGraph planted_groups(sevq::Rng& rng, std::size_t n) {
  const std::size_t groups = n >= 6 ? 2 + rng.index(2) : 2;
  std::vector<std::uint32_t> group(n);
  for (std::size_t v = 0; v < n; ++v) group[v] = static_cast<std::uint32_t>(v * groups / n);
  std::vector<WeightedEdge> edges;
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      if (group[u] == group[v]) edges.push_back({u, v, 0.8 + 0.2 * rng.uniform()});
    }
  }
  for (std::uint32_t g = 0; g + 1 < groups; ++g) {
    // Weak bridge from the last vertex of group g to the first of group g+1.
    std::uint32_t last = 0, first = 0;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (group[v] == g) last = v;
      if (group[v] == g + 1 && first == 0) first = v;
    }
    edges.push_back({last, first, 0.05 + 0.1 * rng.uniform()});
  }
  return graph(n, edges);
}

/// Group labels matching planted_groups for the same n and group count.
inline std::size_t planted_group_count(const FeatureGraph& g) {
  std::size_t bridges = 0;
  for (const auto& e : g.edges()) bridges += e.weight < 0.5;
  return bridges + 1;
}

/// 500 x 16 mixture: component k = i mod 5 has mean 10 e_k, unit noise.
inline FeatureMatrix mixture(std::uint64_t seed = 0, std::size_t rows = 500, std::size_t dim = 16,
                             std::size_t components = 5) {
  sevq::Rng rng(seed);
  FeatureMatrix x(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t h = 0; h < dim; ++h) x(i, h) = rng.normal();
    x(i, i % components) += 10.0;
  }
  return x;
}

inline FeatureMatrix gaussian(sevq::Rng& rng, std::size_t rows, std::size_t cols) {
  FeatureMatrix x(rows, cols);
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

}  // namespace fixture

namespace oracle {

using sevq::FeatureMatrix;

struct Edge {
  std::size_t u, v;
  double w;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

/// Every pair with a positive cosine at or above tau.
inline std::vector<Edge> cosine_edges(const FeatureMatrix& x, double tau) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      const double c = cosine(x.row(i), x.row(j));
      if (c > 0.0 && c >= tau) edges.push_back({i, j, c});
    }
  }
  return edges;
}

inline std::vector<Edge> edges_of(const sevq::FeatureGraph& g) {
  std::vector<Edge> out;
  for (const auto& e : g.edges()) out.push_back({e.u, e.v, e.weight});
  return out;
}

/// 2D structural entropy straight from the definition:
///   -sum_X sum_{i in X} (d_i/V) log2(d_i/V_X) - sum_X (g_X/V) log2(V_X/V)
inline double se(std::size_t n, const std::vector<Edge>& edges, const std::vector<int>& labels) {
  std::vector<double> degree(n, 0.0);
  std::map<int, double> vol, cut;
  for (std::size_t v = 0; v < n; ++v) vol[labels[v]] += 0.0;
  for (const auto& e : edges) {
    degree[e.u] += e.w;
    degree[e.v] += e.w;
    if (labels[e.u] != labels[e.v]) {
      cut[labels[e.u]] += e.w;
      cut[labels[e.v]] += e.w;
    }
  }
  double total = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    vol[labels[v]] += degree[v];
    total += degree[v];
  }
  double h = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (degree[v] > 0.0) h -= degree[v] / total * std::log2(degree[v] / vol[labels[v]]);
  }
  for (const auto& [x, g] : cut) {
    if (g > 0.0) h -= g / total * std::log2(vol[x] / total);
  }
  return h;
}

inline double se(const sevq::FeatureGraph& g, const std::vector<int>& labels) {
  return se(g.vertex_count(), edges_of(g), labels);
}

/// Exhaustive assignment: add x to the anchor graph, then for every cluster
/// with an edge to x recompute the full SE with x joined; the lowest SE wins
/// (ties within 1e-12 to the lower id). No edges: Euclidean nearest centroid.
inline int assign(const sevq::StageModel& stage, std::span<const double> x) {
  const auto& anchors = stage.anchors();
  const std::size_t n = anchors.rows();
  auto edges = cosine_edges(anchors, stage.threshold());
  std::set<int> connected;
  bool nonzero = false;
  for (double v : x) nonzero |= v != 0.0;
  if (nonzero) {
    for (std::size_t a = 0; a < n; ++a) {
      const double c = cosine(anchors.row(a), x);
      if (c > 0.0 && c >= stage.threshold()) {
        edges.push_back({a, n, c});
        connected.insert(stage.anchor_labels()[a]);
      }
    }
  }
  if (connected.empty()) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < stage.size(); ++k) {
      double d = 0.0;
      for (std::size_t h = 0; h < x.size(); ++h) {
        const double diff = x[h] - stage.centroids()(k, h);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    return best;
  }
  std::vector<int> labels(stage.anchor_labels().begin(), stage.anchor_labels().end());
  labels.push_back(0);
  int best = -1;
  double best_se = std::numeric_limits<double>::infinity();
  for (int c : connected) {
    labels.back() = c;
    const double h = se(n + 1, edges, labels);
    if (best < 0 || h < best_se - 1e-12 * std::max(1.0, std::abs(best_se))) {
      best_se = h;
      best = c;
    }
  }
  return best;
}

inline double mse(const FeatureMatrix& a, const FeatureMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t h = 0; h < a.cols(); ++h) s += (a(i, h) - b(i, h)) * (a(i, h) - b(i, h));
  }
  return s / static_cast<double>(a.rows() * a.cols());
}

/// Set-of-sets view of labels.
inline std::set<std::set<std::size_t>> clusters(const std::vector<int>& labels) {
  std::map<int, std::set<std::size_t>> groups;
  for (std::size_t v = 0; v < labels.size(); ++v) groups[labels[v]].insert(v);
  std::set<std::set<std::size_t>> out;
  for (auto& [k, s] : groups) out.insert(s);
  return out;
}

}  // namespace oracle
