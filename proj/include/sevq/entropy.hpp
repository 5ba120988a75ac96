#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "sevq/graph.hpp"

namespace sevq {

using ClusterId = int;

/// Disjoint clusters covering every vertex of a graph, with cached per-cluster
/// volume (sum of degrees) and cut (weight leaving the cluster). Cluster ids
/// are dense in [0, cluster_count()).
class Partition {
 public:
  Partition() = default;

  /// Labels must use every id in [0, max label]; ids are kept as given.
  static Partition from_labels(const FeatureGraph& graph, std::vector<ClusterId> labels);
  static Partition singletons(const FeatureGraph& graph);
  static Partition single_cluster(const FeatureGraph& graph);

  std::size_t vertex_count() const { return labels_.size(); }
  std::size_t cluster_count() const { return members_.size(); }
  ClusterId label(VertexId v) const { return labels_[v]; }
  const std::vector<ClusterId>& labels() const { return labels_; }
  std::span<const VertexId> members(ClusterId c) const { return members_[c]; }
  double volume(ClusterId c) const { return volume_[c]; }
  double cut(ClusterId c) const { return cut_[c]; }

  /// a and b joined under min(a, b); ids above max(a, b) shift down by one.
  Partition merged(const FeatureGraph& graph, ClusterId a, ClusterId b) const;

  /// Clusters as sorted vertex lists, ordered by smallest vertex. Two
  /// partitions are equal as sets of sets iff their canonical forms match.
  std::vector<std::vector<VertexId>> canonical_sets() const;

  /// Same clustering with ids renumbered by smallest member vertex.
  Partition canonicalized(const FeatureGraph& graph) const;

  /// Recomputes volume and cut from the graph; throws kInvariant on drift
  /// beyond 1e-12 relative error.
  void validate(const FeatureGraph& graph) const;

 private:
  std::vector<ClusterId> labels_;
  std::vector<std::vector<VertexId>> members_;
  std::vector<double> volume_;
  std::vector<double> cut_;
};

/// Rooted tree of vertex sets. Node 0 is the root and carries every vertex;
/// leaves carry single vertices.
struct EncodingTree {
  struct Node {
    int parent = -1;
    std::vector<VertexId> vertices;
  };
  std::vector<Node> nodes;

  /// Root -> one node per cluster -> one leaf per vertex.
  static EncodingTree from_partition(const Partition& partition);
  /// Root with one leaf per vertex.
  static EncodingTree flat(std::size_t vertex_count);

  /// Throws kInvariant unless the tree is a valid encoding tree over
  /// `vertex_count` vertices.
  void validate(std::size_t vertex_count) const;
};

struct SEDelta {
  ClusterId cluster = 0;
  double delta = 0.0;         // decrease of 2D structural entropy
  double resulting_se = 0.0;  // baseline - delta
};

/// -sum_i (d_i/V) log2(d_i/V) over vertices with positive degree.
double one_dim_entropy(const FeatureGraph& graph);

/// Two-dimensional structural entropy of `graph` under `partition`,
/// evaluated term by term with base-2 logarithms and 0 log 0 = 0.
double partition_se(const FeatureGraph& graph, const Partition& partition);

/// Structural entropy of an arbitrary encoding tree: the sum over non-root
/// nodes of -(g/V) log2(V_node / V_parent).
double encoding_tree_se(const FeatureGraph& graph, const EncodingTree& tree);

/// Total edge weight between clusters a and b.
double inter_cluster_weight(const FeatureGraph& graph, const Partition& partition, ClusterId a,
                            ClusterId b);

/// Decrease in 2D SE from joining clusters a and b, from cached volumes and
/// cuts plus the weight between the two clusters.
double merge_delta(const FeatureGraph& graph, const Partition& partition, ClusterId a,
                   ClusterId b);

/// Closed-form merge gain used by the greedy optimizers. All arguments are
/// in the same graph with total volume `graph_volume`.
double merge_gain(double volume_a, double cut_a, double volume_b, double cut_b,
                  double between, double graph_volume);

/// Aggregates that make SE updates for an added query node O(|incident|).
struct PartitionSummary {
  double volume = 0.0;
  double sum_degree_log = 0.0;     // sum_i d_i log2 d_i
  double sum_internal_log = 0.0;   // sum_X (V_X - g_X) log2 V_X
  double sum_cut = 0.0;            // sum_X g_X
};

PartitionSummary summarize(const FeatureGraph& graph, const Partition& partition);

/// Per-cluster incident weight of a query, sorted by cluster id; only
/// clusters with at least one edge to the query appear.
std::vector<std::pair<ClusterId, double>> query_cluster_weights(const Partition& partition,
                                                                const QueryAttachment& query);

/// 2D SE of the anchor graph with the query added as its own singleton cluster.
double query_baseline_se(const FeatureGraph& graph, const Partition& partition,
                         const PartitionSummary& summary, const QueryAttachment& query);

/// SE decrease when the query joins `cluster` instead of standing alone:
/// SE(G+, P + {x}) - SE(G+, P with x in cluster). Zero for an isolated
/// query; throws kNoCandidate when the query has edges but none into
/// `cluster`.
SEDelta assign_delta(const FeatureGraph& graph, const Partition& partition,
                     const QueryAttachment& query, ClusterId cluster);

/// Same, reusing a precomputed summary of (graph, partition).
SEDelta assign_delta(const FeatureGraph& graph, const Partition& partition,
                     const PartitionSummary& summary, const QueryAttachment& query,
                     ClusterId cluster);

/// The four-term closed form for the select delta exactly as it is usually
/// printed (with e the cluster before and e' the cluster after the join).
/// Diagnostic only; assignment decisions use assign_delta.
double printed_select_delta(const FeatureGraph& graph, const Partition& partition,
                            const QueryAttachment& query, ClusterId cluster);

}  // namespace sevq
