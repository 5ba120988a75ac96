#include <doctest.h>

#include "sevq/baselines.hpp"
#include "sevq/error.hpp"
#include "support.hpp"

using namespace sevq;

namespace {

std::uint64_t bell(std::size_t n) {
  // Bell triangle.
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (auto v : row) next.push_back(next.back() + v);
    row = next;
  }
  return row.front();
}

}  // namespace

TEST_CASE("brute force on small fixtures") {
  const auto g = fixture::two_unit_edges();
  const auto r = brute_force_min_se(g);
  CHECK(r.partitions_evaluated == 15);
  CHECK(std::abs(r.best_se - 1.0) < 1e-12);
  CHECK(r.best_partition.canonical_sets() == std::vector<std::vector<VertexId>>{{0, 1}, {2, 3}});

  const auto e = brute_force_min_se(fixture::graph(2, {{0, 1, 1.0}}));
  CHECK(e.partitions_evaluated == 2);
  CHECK(std::abs(e.best_se - 1.0) < 1e-12);

  CHECK_THROWS_AS(brute_force_min_se(fixture::graph(3, {})), Error);
  CHECK_THROWS_AS(brute_force_min_se(FeatureGraph::from_edges(kMaxExactVertices + 1, std::vector<WeightedEdge>{{0, 1, 1.0}})), Error);
}

TEST_CASE("brute force visits every partition and finds the oracle minimum") {
  sevq::Rng rng(50);
  for (std::size_t n = 1; n <= 7; ++n) {
    const auto g = n == 1 ? fixture::graph(2, {{0, 1, 1.0}}) : fixture::random_graph(rng, n, 0.7);
    if (g.volume() == 0.0) continue;
    const auto r = brute_force_min_se(g);
    CHECK(r.partitions_evaluated == bell(g.vertex_count()));
    CHECK(std::abs(r.best_se - oracle::se(g, r.best_partition.labels())) < 1e-12);
    // Independent scan over random labelings never beats the reported minimum.
    for (int t = 0; t < 200; ++t) {
      std::vector<int> l(g.vertex_count());
      for (auto& v : l) v = static_cast<int>(rng.index(g.vertex_count()));
      CHECK(oracle::se(g, l) >= r.best_se - 1e-12);
    }
  }
}

TEST_CASE("kmeans basics") {
  sevq::Rng rng(51);
  const auto x = fixture::gaussian(rng, 12, 3);
  const auto all = kmeans(x, 12, 0);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto k = static_cast<std::size_t>(all.codebook.labels[i]);
    for (std::size_t h = 0; h < 3; ++h) CHECK(all.codebook.centroids(k, h) == x(i, h));
  }

  const auto pairs = FeatureMatrix::from_rows({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
  const auto two = kmeans(pairs, 2, 0);
  std::set<std::vector<double>> got;
  for (std::size_t k = 0; k < 2; ++k) got.insert({two.codebook.centroids(k, 0), two.codebook.centroids(k, 1)});
  CHECK(got == std::set<std::vector<double>>{{0, 0.5}, {10, 10.5}});

  const auto mix = fixture::mixture(3);
  const auto r = kmeans(mix, 7, 4);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-9);
  const auto again = kmeans(mix, 7, 4);
  CHECK(again.codebook.centroids == r.codebook.centroids);
  CHECK(again.codebook.labels == r.codebook.labels);
}

TEST_CASE("euclidean rvq") {
  sevq::Rng rng(52);
  const auto x = fixture::gaussian(rng, 40, 3);
  const auto one = euclidean_rvq(x, 1, 1, 0);
  const auto rec = decode(one.model, one.tokens);
  for (std::size_t h = 0; h < 3; ++h) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 40; ++t) mean += x(t, h) / 40.0;
    for (std::size_t t = 0; t < 40; ++t) CHECK(std::abs(rec(t, h) - mean) < 1e-12);
  }

  const auto mix = fixture::mixture();
  const auto deep = euclidean_rvq(mix, 5, 4, 0);
  const auto stages = decode_stages(deep.model, deep.tokens);
  for (std::size_t s = 1; s < stages.size(); ++s) CHECK(oracle::mse(stages[s], mix) <= oracle::mse(stages[s - 1], mix));
  CHECK(euclidean_rvq(mix, 5, 4, 0).tokens == deep.tokens);
  CHECK(encode(deep.model, mix) == deep.tokens);
}
