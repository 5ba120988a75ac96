#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sevq/matrix.hpp"

namespace sevq {

using VertexId = std::uint32_t;

struct Neighbor {
  VertexId vertex;
  double weight;

  bool operator==(const Neighbor&) const = default;
};

struct WeightedEdge {
  VertexId u;
  VertexId v;
  double weight;
};

/// Sparse undirected weighted graph over feature frames. Adjacency lists are
/// sorted by neighbour id; degrees and volume are cached at construction and
/// the graph is immutable afterwards.
class FeatureGraph {
 public:
  FeatureGraph() = default;

  /// Builds from a list of undirected edges. Rejects self-loops, duplicate
  /// pairs, out-of-range endpoints and non-positive or non-finite weights.
  static FeatureGraph from_edges(std::size_t vertex_count, std::span<const WeightedEdge> edges,
                                 double threshold = 0.0);

  std::size_t vertex_count() const { return adjacency_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  std::span<const Neighbor> neighbors(VertexId v) const { return adjacency_[v]; }
  double degree(VertexId v) const { return degree_[v]; }
  const std::vector<double>& degrees() const { return degree_; }
  double volume() const { return volume_; }
  double threshold() const { return threshold_; }

  /// Weight of edge (u, v), or 0 if absent.
  double weight(VertexId u, VertexId v) const;

  /// Distinct edges (u < v) in lexicographic order.
  std::vector<WeightedEdge> edges() const;

  bool operator==(const FeatureGraph&) const = default;

 private:
  friend FeatureGraph build_graph(const FeatureMatrix&, double);
  friend FeatureGraph induced_subgraph(const FeatureGraph&, std::span<const VertexId>);

  void finalize();

  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<double> degree_;
  double volume_ = 0.0;
  double threshold_ = 0.0;
  std::size_t edge_count_ = 0;
};

/// Out-of-sample node attached to a stored anchor set.
struct QueryAttachment {
  std::vector<Neighbor> incident;  // (anchor, cosine) with cosine >= threshold, sorted by anchor
  double degree = 0.0;
};

/// Cosine-similarity graph: edge (i, j) iff cos(x_i, x_j) >= threshold and the
/// cosine is positive. Zero-norm rows are rejected.
FeatureGraph build_graph(const FeatureMatrix& features, double threshold);

QueryAttachment attach_query(const FeatureMatrix& anchors, std::span<const double> query,
                             double threshold);

/// Subgraph on `vertices` (distinct ids). Local vertex k corresponds to
/// vertices[k]; only edges with both endpoints inside are kept.
FeatureGraph induced_subgraph(const FeatureGraph& graph, std::span<const VertexId> vertices);

/// Writes "i,j,w" lines for every distinct edge (i < j).
void write_edge_list(const FeatureGraph& graph, std::ostream& out);

}  // namespace sevq
