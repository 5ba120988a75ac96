#include "sevq/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "sevq/error.hpp"

namespace sevq {

namespace {

// a * log2(b) with the 0 log 0 = 0 convention on the coefficient.
double xlog2(double a, double b) { return a == 0.0 ? 0.0 : a * std::log2(b); }

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

void require_volume(const FeatureGraph& graph) {
  if (!(graph.volume() > 0.0)) {
    throw Error(ErrorKind::kValue, "graph has zero volume (no edges); structural entropy is undefined");
  }
}

double set_cut(const FeatureGraph& graph, std::span<const VertexId> set, std::vector<char>& mark) {
  for (VertexId v : set) mark[v] = 1;
  double g = 0.0;
  for (VertexId v : set) {
    for (const auto& n : graph.neighbors(v)) {
      if (!mark[n.vertex]) g += n.weight;
    }
  }
  for (VertexId v : set) mark[v] = 0;
  return g;
}

}  // namespace

// ---------------------------------------------------------------- Partition

Partition Partition::from_labels(const FeatureGraph& graph, std::vector<ClusterId> labels) {
  if (labels.size() != graph.vertex_count()) {
    throw Error(ErrorKind::kShape, fmt::format("partition has {} labels for {} vertices",
                                               labels.size(), graph.vertex_count()));
  }
  Partition p;
  ClusterId max_label = -1;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] < 0) {
      throw Error(ErrorKind::kRange, fmt::format("vertex {} has negative cluster id", v));
    }
    max_label = std::max(max_label, labels[v]);
  }
  p.labels_ = std::move(labels);
  const std::size_t k = static_cast<std::size_t>(max_label + 1);
  p.members_.resize(k);
  p.volume_.assign(k, 0.0);
  p.cut_.assign(k, 0.0);
  for (VertexId v = 0; v < p.labels_.size(); ++v) {
    const ClusterId c = p.labels_[v];
    p.members_[c].push_back(v);
    p.volume_[c] += graph.degree(v);
    for (const auto& n : graph.neighbors(v)) {
      if (p.labels_[n.vertex] != c) p.cut_[c] += n.weight;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (p.members_[c].empty()) {
      throw Error(ErrorKind::kValue, fmt::format("cluster id {} is unused", c));
    }
  }
  return p;
}

Partition Partition::singletons(const FeatureGraph& graph) {
  std::vector<ClusterId> labels(graph.vertex_count());
  for (std::size_t v = 0; v < labels.size(); ++v) labels[v] = static_cast<ClusterId>(v);
  return from_labels(graph, std::move(labels));
}

Partition Partition::single_cluster(const FeatureGraph& graph) {
  return from_labels(graph, std::vector<ClusterId>(graph.vertex_count(), 0));
}

Partition Partition::merged(const FeatureGraph& graph, ClusterId a, ClusterId b) const {
  const auto k = static_cast<ClusterId>(cluster_count());
  if (a < 0 || b < 0 || a >= k || b >= k) {
    throw Error(ErrorKind::kRange, fmt::format("cluster ids ({}, {}) outside [0, {})", a, b, k));
  }
  if (a == b) throw Error(ErrorKind::kValue, "cannot merge a cluster with itself");
  const ClusterId keep = std::min(a, b);
  const ClusterId drop = std::max(a, b);
  std::vector<ClusterId> labels = labels_;
  for (auto& l : labels) {
    if (l == drop) {
      l = keep;
    } else if (l > drop) {
      --l;
    }
  }
  return from_labels(graph, std::move(labels));
}

std::vector<std::vector<VertexId>> Partition::canonical_sets() const {
  auto sets = members_;
  for (auto& s : sets) std::ranges::sort(s);
  std::ranges::sort(sets, {}, [](const auto& s) { return s.front(); });
  return sets;
}

Partition Partition::canonicalized(const FeatureGraph& graph) const {
  std::vector<ClusterId> remap(cluster_count(), -1);
  ClusterId next = 0;
  for (ClusterId l : labels_) {
    if (remap[l] < 0) remap[l] = next++;
  }
  std::vector<ClusterId> labels(labels_.size());
  for (std::size_t v = 0; v < labels.size(); ++v) labels[v] = remap[labels_[v]];
  return from_labels(graph, std::move(labels));
}

void Partition::validate(const FeatureGraph& graph) const {
  if (labels_.size() != graph.vertex_count()) {
    throw Error(ErrorKind::kInvariant, "partition does not cover the graph");
  }
  const Partition fresh = from_labels(graph, labels_);
  double total = 0.0;
  for (std::size_t c = 0; c < cluster_count(); ++c) {
    if (!close_rel(volume_[c], fresh.volume_[c], 1e-12) || !close_rel(cut_[c], fresh.cut_[c], 1e-12)) {
      throw Error(ErrorKind::kInvariant, fmt::format("cached volume/cut of cluster {} drifted", c));
    }
    total += volume_[c];
  }
  if (!close_rel(total, graph.volume(), 1e-12)) {
    throw Error(ErrorKind::kInvariant, "cluster volumes do not sum to the graph volume");
  }
}

// ------------------------------------------------------------- EncodingTree

EncodingTree EncodingTree::from_partition(const Partition& partition) {
  EncodingTree t;
  Node root;
  for (VertexId v = 0; v < partition.vertex_count(); ++v) root.vertices.push_back(v);
  t.nodes.push_back(std::move(root));
  for (std::size_t c = 0; c < partition.cluster_count(); ++c) {
    const auto members = partition.members(static_cast<ClusterId>(c));
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({0, {members.begin(), members.end()}});
    for (VertexId v : members) t.nodes.push_back({id, {v}});
  }
  return t;
}

EncodingTree EncodingTree::flat(std::size_t vertex_count) {
  EncodingTree t;
  Node root;
  for (VertexId v = 0; v < vertex_count; ++v) root.vertices.push_back(v);
  t.nodes.push_back(std::move(root));
  for (VertexId v = 0; v < vertex_count; ++v) t.nodes.push_back({0, {v}});
  return t;
}

void EncodingTree::validate(std::size_t vertex_count) const {
  if (nodes.empty() || nodes[0].parent != -1) {
    throw Error(ErrorKind::kInvariant, "encoding tree has no root at node 0");
  }
  const auto sorted = [](std::vector<VertexId> s) {
    std::ranges::sort(s);
    return s;
  };
  std::vector<VertexId> all(vertex_count);
  for (VertexId v = 0; v < vertex_count; ++v) all[v] = v;
  if (sorted(nodes[0].vertices) != all) {
    throw Error(ErrorKind::kInvariant, "root of encoding tree must carry every vertex");
  }
  std::vector<std::vector<int>> children(nodes.size());
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const int p = nodes[i].parent;
    if (p < 0 || static_cast<std::size_t>(p) >= nodes.size() || static_cast<std::size_t>(p) == i) {
      throw Error(ErrorKind::kInvariant, fmt::format("tree node {} has invalid parent {}", i, p));
    }
    children[p].push_back(static_cast<int>(i));
  }
  // Reachability from the root guards against cycles.
  std::vector<char> seen(nodes.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (int c : children[n]) {
      if (seen[c]) throw Error(ErrorKind::kInvariant, "encoding tree contains a cycle");
      seen[c] = 1;
      stack.push_back(c);
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!seen[i]) throw Error(ErrorKind::kInvariant, fmt::format("tree node {} unreachable", i));
    if (children[i].empty()) {
      if (nodes[i].vertices.size() != 1) {
        throw Error(ErrorKind::kInvariant, fmt::format("leaf {} must carry exactly one vertex", i));
      }
      continue;
    }
    std::vector<VertexId> joined;
    for (int c : children[i]) {
      joined.insert(joined.end(), nodes[c].vertices.begin(), nodes[c].vertices.end());
    }
    joined = sorted(std::move(joined));
    if (std::ranges::adjacent_find(joined) != joined.end()) {
      throw Error(ErrorKind::kInvariant, fmt::format("children of node {} overlap", i));
    }
    if (joined != sorted(nodes[i].vertices)) {
      throw Error(ErrorKind::kInvariant,
                  fmt::format("children of node {} do not cover its vertex set", i));
    }
  }
}

// ------------------------------------------------------------------ entropy

double one_dim_entropy(const FeatureGraph& graph) {
  require_volume(graph);
  const double vol = graph.volume();
  double h = 0.0;
  for (double d : graph.degrees()) {
    if (d > 0.0) h -= (d / vol) * std::log2(d / vol);
  }
  return h;
}

double partition_se(const FeatureGraph& graph, const Partition& partition) {
  require_volume(graph);
  if (partition.vertex_count() != graph.vertex_count()) {
    throw Error(ErrorKind::kShape, "partition does not match graph");
  }
  const double vol = graph.volume();
  double vertex_terms = 0.0;
  double cluster_terms = 0.0;
  for (std::size_t c = 0; c < partition.cluster_count(); ++c) {
    const auto id = static_cast<ClusterId>(c);
    const double vx = partition.volume(id);
    for (VertexId v : partition.members(id)) {
      const double d = graph.degree(v);
      if (d <= 0.0) continue;
      if (!(vx > 0.0)) {
        throw Error(ErrorKind::kInvariant,
                    fmt::format("cluster {} has zero volume but vertex {} has degree {}", c, v, d));
      }
      vertex_terms -= (d / vol) * std::log2(d / vx);
    }
    const double g = partition.cut(id);
    if (g > 0.0) cluster_terms -= (g / vol) * std::log2(vx / vol);
  }
  return vertex_terms + cluster_terms;
}

double encoding_tree_se(const FeatureGraph& graph, const EncodingTree& tree) {
  require_volume(graph);
  tree.validate(graph.vertex_count());
  const double vol = graph.volume();
  std::vector<double> node_volume(tree.nodes.size(), 0.0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    for (VertexId v : tree.nodes[i].vertices) node_volume[i] += graph.degree(v);
  }
  std::vector<char> mark(graph.vertex_count(), 0);
  double h = 0.0;
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const double g = set_cut(graph, tree.nodes[i].vertices, mark);
    if (g <= 0.0) continue;
    h -= (g / vol) * std::log2(node_volume[i] / node_volume[tree.nodes[i].parent]);
  }
  return h;
}

double inter_cluster_weight(const FeatureGraph& graph, const Partition& partition, ClusterId a,
                            ClusterId b) {
  const auto k = static_cast<ClusterId>(partition.cluster_count());
  if (a < 0 || b < 0 || a >= k || b >= k) {
    throw Error(ErrorKind::kRange, fmt::format("cluster ids ({}, {}) outside [0, {})", a, b, k));
  }
  if (partition.members(a).size() > partition.members(b).size()) std::swap(a, b);
  double w = 0.0;
  for (VertexId v : partition.members(a)) {
    for (const auto& n : graph.neighbors(v)) {
      if (partition.label(n.vertex) == b) w += n.weight;
    }
  }
  return w;
}

double merge_gain(double volume_a, double cut_a, double volume_b, double cut_b, double between,
                  double graph_volume) {
  // With g_i = d_i, V * H = -sum d log d + sum_X (V_X - g_X) log V_X + (sum g_X) log V.
  // Joining a and b only touches their cluster terms and removes 2w of cut.
  const double merged_volume = volume_a + volume_b;
  const double merged_cut = cut_a + cut_b - 2.0 * between;
  const double before = xlog2(volume_a - cut_a, volume_a) + xlog2(volume_b - cut_b, volume_b);
  const double after = xlog2(merged_volume - merged_cut, merged_volume);
  return (before - after + 2.0 * between * std::log2(graph_volume)) / graph_volume;
}

double merge_delta(const FeatureGraph& graph, const Partition& partition, ClusterId a,
                   ClusterId b) {
  if (a == b) throw Error(ErrorKind::kValue, "merge_delta needs two distinct clusters");
  require_volume(graph);
  const double w = inter_cluster_weight(graph, partition, a, b);
  return merge_gain(partition.volume(a), partition.cut(a), partition.volume(b), partition.cut(b),
                    w, graph.volume());
}

PartitionSummary summarize(const FeatureGraph& graph, const Partition& partition) {
  PartitionSummary s;
  s.volume = graph.volume();
  for (double d : graph.degrees()) s.sum_degree_log += xlog2(d, d);
  for (std::size_t c = 0; c < partition.cluster_count(); ++c) {
    const auto id = static_cast<ClusterId>(c);
    s.sum_internal_log += xlog2(partition.volume(id) - partition.cut(id), partition.volume(id));
    s.sum_cut += partition.cut(id);
  }
  return s;
}

std::vector<std::pair<ClusterId, double>> query_cluster_weights(const Partition& partition,
                                                                const QueryAttachment& query) {
  std::vector<std::pair<ClusterId, double>> pairs;
  pairs.reserve(query.incident.size());
  for (const auto& n : query.incident) {
    if (n.vertex >= partition.vertex_count()) {
      throw Error(ErrorKind::kRange, fmt::format("query edge to unknown anchor {}", n.vertex));
    }
    pairs.emplace_back(partition.label(n.vertex), n.weight);
  }
  // Stable sort keeps the per-cluster summation in anchor order.
  std::ranges::stable_sort(pairs, {}, &std::pair<ClusterId, double>::first);
  std::vector<std::pair<ClusterId, double>> out;
  for (const auto& [c, w] : pairs) {
    if (!out.empty() && out.back().first == c) {
      out.back().second += w;
    } else {
      out.emplace_back(c, w);
    }
  }
  return out;
}

double query_baseline_se(const FeatureGraph& graph, const Partition& partition,
                         const PartitionSummary& summary, const QueryAttachment& query) {
  const double dx = query.degree;
  const double vol = summary.volume + 2.0 * dx;
  if (!(vol > 0.0)) return 0.0;
  double degree_log = summary.sum_degree_log + xlog2(dx, dx);
  for (const auto& n : query.incident) {
    const double d = graph.degree(n.vertex);
    degree_log += xlog2(d + n.weight, d + n.weight) - xlog2(d, d);
  }
  double internal_log = summary.sum_internal_log;
  for (const auto& [c, w] : query_cluster_weights(partition, query)) {
    const double internal = partition.volume(c) - partition.cut(c);
    internal_log += xlog2(internal, partition.volume(c) + w) - xlog2(internal, partition.volume(c));
  }
  const double cut = summary.sum_cut + 2.0 * dx;
  return (-degree_log + internal_log + xlog2(cut, vol)) / vol;
}

SEDelta assign_delta(const FeatureGraph& graph, const Partition& partition,
                     const PartitionSummary& summary, const QueryAttachment& query,
                     ClusterId cluster) {
  if (cluster < 0 || static_cast<std::size_t>(cluster) >= partition.cluster_count()) {
    throw Error(ErrorKind::kRange, fmt::format("cluster {} outside [0, {})", cluster,
                                               partition.cluster_count()));
  }
  const double baseline = query_baseline_se(graph, partition, summary, query);
  SEDelta out{cluster, 0.0, baseline};
  if (query.degree == 0.0) return out;

  double w = 0.0;
  for (const auto& n : query.incident) {
    if (partition.label(n.vertex) == cluster) w += n.weight;
  }
  if (w == 0.0) {
    throw Error(ErrorKind::kNoCandidate,
                fmt::format("query has no edge into cluster {}", cluster));
  }
  // In G+ the cluster alone has volume V_c + w and cut g_c + w; joined with x
  // it has volume V_c + w + d_x and cut g_c + d_x - w.
  const double vol = summary.volume + 2.0 * query.degree;
  const double vc = partition.volume(cluster);
  const double gc = partition.cut(cluster);
  out.delta = merge_gain(vc + w, gc + w, query.degree, query.degree, w, vol);
  out.resulting_se = baseline - out.delta;
  return out;
}

SEDelta assign_delta(const FeatureGraph& graph, const Partition& partition,
                     const QueryAttachment& query, ClusterId cluster) {
  return assign_delta(graph, partition, summarize(graph, partition), query, cluster);
}

double printed_select_delta(const FeatureGraph& graph, const Partition& partition,
                            const QueryAttachment& query, ClusterId cluster) {
  if (cluster < 0 || static_cast<std::size_t>(cluster) >= partition.cluster_count()) {
    throw Error(ErrorKind::kRange, fmt::format("cluster {} out of range", cluster));
  }
  const double dx = query.degree;
  if (dx == 0.0) return 0.0;
  double w = 0.0;
  for (const auto& n : query.incident) {
    if (partition.label(n.vertex) == cluster) w += n.weight;
  }
  const double vol = graph.volume() + 2.0 * dx;
  const double v_before = partition.volume(cluster) + w;
  const double g_before = partition.cut(cluster) + w;
  const double v_after = v_before + dx;
  const double g_after = partition.cut(cluster) + dx - w;
  auto lg = [](double num, double den) { return (num > 0.0 && den > 0.0) ? std::log2(num / den) : 0.0; };
  return -(g_before / vol) * lg(v_before, vol) + (g_after / vol) * lg(v_after, vol) -
         (g_after / vol) * lg(v_after, v_before) - (dx / vol) * lg(vol, v_before);
}

}  // namespace sevq
