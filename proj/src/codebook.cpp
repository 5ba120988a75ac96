#include "sevq/codebook.hpp"

#include <algorithm>
#include <cstdint>
#include <queue>
#include <unordered_map>

#include <fmt/format.h>

#include "sevq/error.hpp"

namespace sevq {

namespace {

struct MergeCandidate {
  double gain;
  ClusterId a;  // a < b
  ClusterId b;
  std::uint32_t version_a;
  std::uint32_t version_b;
};

// Max-heap order: larger gain first, then lexicographically smaller (a, b).
struct LowerPriority {
  bool operator()(const MergeCandidate& x, const MergeCandidate& y) const {
    if (x.gain != y.gain) return x.gain < y.gain;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  }
};

}  // namespace

Partition vanilla_greedy(const FeatureGraph& graph, const Partition& start,
                         std::vector<double>* se_trace) {
  if (start.vertex_count() != graph.vertex_count()) {
    throw Error(ErrorKind::kShape, "start partition does not match graph");
  }
  if (se_trace) se_trace->clear();
  if (!(graph.volume() > 0.0)) return start;

  const std::size_t k = start.cluster_count();
  const double vol = graph.volume();
  std::vector<double> volume(k), cut(k);
  std::vector<std::uint32_t> version(k, 0);
  std::vector<char> alive(k, 1);
  std::vector<std::unordered_map<ClusterId, double>> links(k);
  for (std::size_t c = 0; c < k; ++c) {
    volume[c] = start.volume(static_cast<ClusterId>(c));
    cut[c] = start.cut(static_cast<ClusterId>(c));
  }
  // Accumulate each inter-cluster weight once, on the (min, max) side, then
  // mirror so both directions hold the bit-identical value.
  for (const auto& e : graph.edges()) {
    const ClusterId la = start.label(e.u);
    const ClusterId lb = start.label(e.v);
    if (la == lb) continue;
    links[std::min(la, lb)][std::max(la, lb)] += e.weight;
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (const auto& [b, w] : links[a]) {
      if (b > static_cast<ClusterId>(a)) links[b][static_cast<ClusterId>(a)] = w;
    }
  }

  std::priority_queue<MergeCandidate, std::vector<MergeCandidate>, LowerPriority> heap;
  auto push = [&](ClusterId x, ClusterId y, double w) {
    const ClusterId a = std::min(x, y);
    const ClusterId b = std::max(x, y);
    heap.push({merge_gain(volume[a], cut[a], volume[b], cut[b], w, vol), a, b, version[a],
               version[b]});
  };
  for (std::size_t a = 0; a < k; ++a) {
    for (const auto& [b, w] : links[a]) {
      if (b > static_cast<ClusterId>(a)) push(static_cast<ClusterId>(a), b, w);
    }
  }

  std::vector<ClusterId> parent(k);
  for (std::size_t c = 0; c < k; ++c) parent[c] = static_cast<ClusterId>(c);
  double se = 0.0;
  if (se_trace) {
    se = partition_se(graph, start);
    se_trace->push_back(se);
  }

  while (!heap.empty()) {
    const MergeCandidate top = heap.top();
    heap.pop();
    if (!alive[top.a] || !alive[top.b] || version[top.a] != top.version_a ||
        version[top.b] != top.version_b) {
      continue;
    }
    if (!(top.gain > kMergeTolerance)) break;

    const ClusterId a = top.a;
    const ClusterId b = top.b;
    const double between = links[a].at(b);
    volume[a] += volume[b];
    cut[a] = cut[a] + cut[b] - 2.0 * between;
    alive[b] = 0;
    parent[b] = a;
    ++version[a];
    links[a].erase(b);
    links[b].erase(a);
    for (const auto& [c, w] : links[b]) {
      auto& row_c = links[c];
      row_c.erase(b);
      const double joined = links[a][c] + w;
      links[a][c] = joined;
      row_c[a] = joined;
    }
    links[b].clear();
    for (const auto& [c, w] : links[a]) push(a, c, w);

    if (se_trace) {
      se -= top.gain;
      se_trace->push_back(se);
    }
  }

  auto find = [&](ClusterId c) {
    while (parent[c] != c) c = parent[c];
    return c;
  };
  std::vector<ClusterId> labels(graph.vertex_count());
  for (VertexId v = 0; v < labels.size(); ++v) labels[v] = find(start.label(v));
  // Dense, smallest-vertex-first ids.
  std::vector<ClusterId> remap(k, -1);
  ClusterId next = 0;
  for (auto& l : labels) {
    if (remap[l] < 0) remap[l] = next++;
    l = remap[l];
  }
  return Partition::from_labels(graph, std::move(labels));
}

Partition vanilla_greedy(const FeatureGraph& graph) {
  return vanilla_greedy(graph, Partition::singletons(graph));
}

Partition hierarchical_minimize(const FeatureGraph& graph, std::size_t subset_size,
                                HierarchyStats* stats) {
  if (subset_size < 2) {
    throw Error(ErrorKind::kConfig, fmt::format("subset size {} must be at least 2", subset_size));
  }
  const std::size_t n = graph.vertex_count();
  std::vector<std::vector<VertexId>> clusters(n);
  for (VertexId v = 0; v < n; ++v) clusters[v] = {v};

  std::size_t rounds = 0;
  while (true) {
    ++rounds;
    std::ranges::sort(clusters, {}, [](const auto& c) { return c.front(); });
    std::vector<std::vector<VertexId>> next;
    std::size_t groups = 0;
    for (std::size_t begin = 0; begin < clusters.size(); begin += subset_size) {
      ++groups;
      const std::size_t end = std::min(begin + subset_size, clusters.size());
      std::vector<VertexId> vertices;
      for (std::size_t c = begin; c < end; ++c) {
        vertices.insert(vertices.end(), clusters[c].begin(), clusters[c].end());
      }
      std::ranges::sort(vertices);
      const FeatureGraph sub = induced_subgraph(graph, vertices);

      std::vector<ClusterId> labels(vertices.size());
      for (std::size_t c = begin; c < end; ++c) {
        for (VertexId v : clusters[c]) {
          const auto local = std::ranges::lower_bound(vertices, v) - vertices.begin();
          labels[local] = static_cast<ClusterId>(c - begin);
        }
      }
      const Partition merged =
          vanilla_greedy(sub, Partition::from_labels(sub, std::move(labels)));
      for (std::size_t c = 0; c < merged.cluster_count(); ++c) {
        std::vector<VertexId> global;
        for (VertexId local : merged.members(static_cast<ClusterId>(c))) {
          global.push_back(vertices[local]);
        }
        std::ranges::sort(global);
        next.push_back(std::move(global));
      }
    }
    const bool unchanged = next.size() == clusters.size();
    clusters = std::move(next);
    if (groups <= 1) break;
    if (unchanged) subset_size *= 2;
  }

  std::ranges::sort(clusters, {}, [](const auto& c) { return c.front(); });
  std::vector<ClusterId> labels(n);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (VertexId v : clusters[c]) labels[v] = static_cast<ClusterId>(c);
  }
  if (stats) {
    stats->rounds = rounds;
    stats->final_subset_size = subset_size;
  }
  return Partition::from_labels(graph, std::move(labels));
}

Partition fold_isolated_vertices(const FeatureGraph& graph, const Partition& partition,
                                 const FeatureMatrix& features) {
  if (features.rows() != graph.vertex_count()) {
    throw Error(ErrorKind::kShape, "feature rows do not match graph vertices");
  }
  const Partition canon = partition.canonicalized(graph);
  std::vector<char> connected(canon.cluster_count(), 0);
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    if (graph.degree(v) > 0.0) connected[canon.label(v)] = 1;
  }
  if (std::ranges::none_of(connected, [](char c) { return c != 0; })) return partition;

  std::vector<ClusterId> labels = canon.labels();
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    if (connected[canon.label(v)]) continue;
    double best = -2.0;
    ClusterId best_cluster = -1;
    const double nv = norm(features.row(v));
    for (VertexId u = 0; u < graph.vertex_count(); ++u) {
      if (graph.degree(u) <= 0.0) continue;
      const double nu = norm(features.row(u));
      const double c = (nv > 0.0 && nu > 0.0) ? cosine(features.row(v), features.row(u)) : 0.0;
      const ClusterId cl = canon.label(u);
      if (c > best || (c == best && cl < best_cluster)) {
        best = c;
        best_cluster = cl;
      }
    }
    labels[v] = best_cluster;
  }
  // Former isolated-only clusters are now empty; compact ids by smallest vertex.
  std::vector<ClusterId> remap(canon.cluster_count(), -1);
  ClusterId next = 0;
  for (auto& l : labels) {
    if (remap[l] < 0) remap[l] = next++;
    l = remap[l];
  }
  return Partition::from_labels(graph, std::move(labels));
}

Codebook extract_centroids(const Partition& partition, const FeatureMatrix& features) {
  if (partition.vertex_count() != features.rows()) {
    throw Error(ErrorKind::kShape, fmt::format("partition covers {} vertices but features have {} rows",
                                               partition.vertex_count(), features.rows()));
  }
  const std::size_t k = partition.cluster_count();
  Codebook cb;
  cb.centroids = FeatureMatrix(k, features.cols());
  cb.member_counts.resize(k);
  cb.labels = partition.labels();
  for (std::size_t c = 0; c < k; ++c) {
    const auto members = partition.members(static_cast<ClusterId>(c));
    if (members.empty()) throw Error(ErrorKind::kInvariant, fmt::format("cluster {} is empty", c));
    auto centroid = cb.centroids.row(c);
    for (VertexId v : members) {
      const auto x = features.row(v);
      for (std::size_t d = 0; d < centroid.size(); ++d) centroid[d] += x[d];
    }
    for (double& value : centroid) value /= static_cast<double>(members.size());
    cb.member_counts[c] = members.size();
  }
  return cb;
}

}  // namespace sevq
