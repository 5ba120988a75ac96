#include "sevq/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <ostream>
#include <string>

#include "sevq/error.hpp"

namespace sevq {

namespace {

bool edge_passes(double similarity, double threshold) {
  return similarity > 0.0 && similarity >= threshold;
}

std::vector<double> row_norms(const FeatureMatrix& m, const char* what) {
  std::vector<double> norms(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    norms[r] = norm(m.row(r));
    if (!(norms[r] > 0.0)) {
      throw Error(ErrorKind::kValue, std::string(what) + " row " + std::to_string(r) +
                                         " has zero norm; cosine similarity is undefined");
    }
  }
  return norms;
}

}  // namespace

void FeatureGraph::finalize() {
  degree_.assign(adjacency_.size(), 0.0);
  volume_ = 0.0;
  std::size_t half_edges = 0;
  for (std::size_t v = 0; v < adjacency_.size(); ++v) {
    auto& list = adjacency_[v];
    std::ranges::sort(list, {}, &Neighbor::vertex);
    double d = 0.0;
    for (const auto& n : list) d += n.weight;
    degree_[v] = d;
    volume_ += d;
    half_edges += list.size();
  }
  edge_count_ = half_edges / 2;
}

FeatureGraph FeatureGraph::from_edges(std::size_t vertex_count,
                                      std::span<const WeightedEdge> edges, double threshold) {
  FeatureGraph g;
  g.threshold_ = threshold;
  g.adjacency_.resize(vertex_count);
  for (const auto& e : edges) {
    if (e.u >= vertex_count || e.v >= vertex_count) {
      throw Error(ErrorKind::kRange,
                  fmt::format("edge ({}, {}) has an endpoint outside [0, {})", e.u, e.v, vertex_count));
    }
    if (e.u == e.v) {
      throw Error(ErrorKind::kValue, fmt::format("self-loop on vertex {}", e.u));
    }
    if (!std::isfinite(e.weight) || !(e.weight > 0.0)) {
      throw Error(ErrorKind::kValue,
                  fmt::format("edge ({}, {}) has invalid weight {}", e.u, e.v, e.weight));
    }
    g.adjacency_[e.u].push_back({e.v, e.weight});
    g.adjacency_[e.v].push_back({e.u, e.weight});
  }
  g.finalize();
  for (std::size_t v = 0; v < vertex_count; ++v) {
    const auto& list = g.adjacency_[v];
    for (std::size_t k = 1; k < list.size(); ++k) {
      if (list[k].vertex == list[k - 1].vertex) {
        throw Error(ErrorKind::kValue,
                    fmt::format("duplicate edge ({}, {})", v, list[k].vertex));
      }
    }
  }
  return g;
}

double FeatureGraph::weight(VertexId u, VertexId v) const {
  const auto& list = adjacency_[u];
  auto it = std::ranges::lower_bound(list, v, {}, &Neighbor::vertex);
  return (it != list.end() && it->vertex == v) ? it->weight : 0.0;
}

std::vector<WeightedEdge> FeatureGraph::edges() const {
  std::vector<WeightedEdge> out;
  out.reserve(edge_count_);
  for (VertexId u = 0; u < adjacency_.size(); ++u) {
    for (const auto& n : adjacency_[u]) {
      if (n.vertex > u) out.push_back({u, n.vertex, n.weight});
    }
  }
  return out;
}

FeatureGraph build_graph(const FeatureMatrix& features, double threshold) {
  if (!(threshold < 1.0) || !std::isfinite(threshold)) {
    throw Error(ErrorKind::kConfig, fmt::format("similarity threshold {} must be < 1", threshold));
  }
  features.check_finite();
  const auto norms = row_norms(features, "feature");
  const std::size_t n = features.rows();

  FeatureGraph g;
  g.threshold_ = threshold;
  g.adjacency_.resize(n);
  // Upper triangle only; every weight is computed once and mirrored, so
  // w(i, j) and w(j, i) are bit-identical.
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = features.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      double c = dot(xi, features.row(j)) / (norms[i] * norms[j]);
      c = std::clamp(c, -1.0, 1.0);
      if (edge_passes(c, threshold)) {
        g.adjacency_[i].push_back({static_cast<VertexId>(j), c});
        g.adjacency_[j].push_back({static_cast<VertexId>(i), c});
      }
    }
  }
  g.finalize();
  return g;
}

QueryAttachment attach_query(const FeatureMatrix& anchors, std::span<const double> query,
                             double threshold) {
  if (anchors.rows() == 0) throw Error(ErrorKind::kShape, "anchor set is empty");
  if (query.size() != anchors.cols()) {
    throw Error(ErrorKind::kShape, fmt::format("query has dimension {}, anchors have {}",
                                               query.size(), anchors.cols()));
  }
  const double qn = norm(query);
  if (!std::isfinite(qn)) throw Error(ErrorKind::kValue, "query has non-finite values");
  if (!(qn > 0.0)) throw Error(ErrorKind::kValue, "query has zero norm");

  QueryAttachment q;
  for (std::size_t a = 0; a < anchors.rows(); ++a) {
    const auto row = anchors.row(a);
    const double an = norm(row);
    if (!(an > 0.0)) continue;
    const double c = std::clamp(dot(query, row) / (qn * an), -1.0, 1.0);
    if (edge_passes(c, threshold)) {
      q.incident.push_back({static_cast<VertexId>(a), c});
      q.degree += c;
    }
  }
  return q;
}

FeatureGraph induced_subgraph(const FeatureGraph& graph, std::span<const VertexId> vertices) {
  constexpr VertexId kAbsent = static_cast<VertexId>(-1);
  std::vector<VertexId> local(graph.vertex_count(), kAbsent);
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    const VertexId v = vertices[k];
    if (v >= graph.vertex_count()) {
      throw Error(ErrorKind::kRange, fmt::format("vertex {} out of range [0, {})", v,
                                                 graph.vertex_count()));
    }
    if (local[v] != kAbsent) {
      throw Error(ErrorKind::kValue, fmt::format("vertex {} listed twice", v));
    }
    local[v] = static_cast<VertexId>(k);
  }

  FeatureGraph sub;
  sub.threshold_ = graph.threshold_;
  sub.adjacency_.resize(vertices.size());
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    for (const auto& n : graph.neighbors(vertices[k])) {
      if (local[n.vertex] != kAbsent) sub.adjacency_[k].push_back({local[n.vertex], n.weight});
    }
  }
  sub.finalize();
  return sub;
}

void write_edge_list(const FeatureGraph& graph, std::ostream& out) {
  for (const auto& e : graph.edges()) {
    out << fmt::format("{},{},{}\n", e.u, e.v, e.weight);
  }
}

}  // namespace sevq
