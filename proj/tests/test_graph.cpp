#include <doctest.h>

#include <sstream>

#include "sevq/error.hpp"
#include "sevq/graph.hpp"
#include "support.hpp"

using namespace sevq;

TEST_CASE("orthogonal rows leave an isolated vertex") {
  const auto g = build_graph(FeatureMatrix::from_rows({{1, 0}, {1, 0}, {0, 1}}), 0.2);
  CHECK(g.edge_count() == 1);
  CHECK(g.weight(0, 1) == 1.0);
  CHECK(g.weight(1, 0) == 1.0);
  CHECK(g.degree(2) == 0.0);
}

TEST_CASE("one unit edge has volume 2") {
  CHECK(build_graph(FeatureMatrix::from_rows({{1, 0}, {1, 0}}), 0.2).volume() == 2.0);
}

TEST_CASE("weights equal brute-force pairwise cosines") {
  sevq::Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = fixture::gaussian(rng, 4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
      const double n = norm(x.row(i));
      for (auto& v : x.row(i)) v /= n;
    }
    const auto g = build_graph(x, 0.0);
    const auto expected = oracle::cosine_edges(x, 0.0);
    REQUIRE(g.edge_count() == expected.size());
    for (const auto& e : expected) {
      CHECK(std::abs(g.weight(static_cast<VertexId>(e.u), static_cast<VertexId>(e.v)) - e.w) < 1e-12);
    }
  }
}

TEST_CASE("graph invariants on random features") {
  sevq::Rng rng(2);
  for (double tau : {-0.5, 0.0, 0.2, 0.6}) {
    const auto x = fixture::gaussian(rng, 40, 5);
    const auto g = build_graph(x, tau);
    double sum = 0.0;
    for (VertexId u = 0; u < g.vertex_count(); ++u) {
      CHECK(g.weight(u, u) == 0.0);
      double d = 0.0;
      VertexId prev = 0;
      bool first = true;
      for (const auto& nb : g.neighbors(u)) {
        CHECK(g.weight(nb.vertex, u) == nb.weight);
        CHECK(nb.weight > 0.0);
        CHECK(nb.weight >= tau);
        if (!first) CHECK(nb.vertex > prev);
        prev = nb.vertex;
        first = false;
        d += nb.weight;
      }
      CHECK(std::abs(d - g.degree(u)) <= 1e-12 * std::max(1.0, d));
    }
    for (const auto& e : g.edges()) sum += e.weight;
    CHECK(std::abs(g.volume() - 2.0 * sum) <= 1e-12 * std::max(1.0, g.volume()));
    CHECK(build_graph(x, tau) == g);
  }
}

TEST_CASE("zero row and bad threshold are rejected") {
  try {
    build_graph(FeatureMatrix::from_rows({{1, 0}, {0, 0}}), 0.2);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValue);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  CHECK_THROWS_AS(build_graph(FeatureMatrix::from_rows({{1, 0}}), 1.0), Error);
}

TEST_CASE("from_edges validation") {
  std::vector<WeightedEdge> loop{{1, 1, 1.0}};
  std::vector<WeightedEdge> dup{{0, 1, 1.0}, {1, 0, 1.0}};
  std::vector<WeightedEdge> range{{0, 5, 1.0}};
  std::vector<WeightedEdge> neg{{0, 1, -1.0}};
  CHECK_THROWS_AS(FeatureGraph::from_edges(3, loop), Error);
  CHECK_THROWS_AS(FeatureGraph::from_edges(3, dup), Error);
  CHECK_THROWS_AS(FeatureGraph::from_edges(3, range), Error);
  CHECK_THROWS_AS(FeatureGraph::from_edges(3, neg), Error);
}

TEST_CASE("attach_query") {
  const auto anchors = FeatureMatrix::from_rows({{1, 0}, {0, 1}});
  std::vector<double> x{1, 0};
  auto q = attach_query(anchors, x, 0.2);
  REQUIRE(q.incident.size() == 1);
  CHECK(q.incident[0] == Neighbor{0, 1.0});
  CHECK(q.degree == 1.0);

  const auto ortho = attach_query(FeatureMatrix::from_rows({{1, 0}}), std::vector<double>{0, 1}, 0.2);
  CHECK(ortho.incident.empty());
  CHECK(ortho.degree == 0.0);
  CHECK_THROWS_AS(attach_query(anchors, std::vector<double>{0, 0}, 0.2), Error);

  sevq::Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = fixture::gaussian(rng, 30, 4);
    const auto y = fixture::gaussian(rng, 1, 4);
    const auto got = attach_query(a, y.row(0), 0.3);
    std::vector<Neighbor> expected;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double c = oracle::cosine(a.row(i), y.row(0));
      if (c >= 0.3) expected.push_back({static_cast<VertexId>(i), c});
    }
    REQUIRE(got.incident.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(got.incident[i].vertex == expected[i].vertex);
      CHECK(std::abs(got.incident[i].weight - expected[i].weight) < 1e-12);
    }
  }
}

TEST_CASE("induced_subgraph") {
  sevq::Rng rng(5);
  const auto g = fixture::random_graph(rng, 12, 0.4);
  std::vector<VertexId> all(12);
  for (VertexId v = 0; v < 12; ++v) all[v] = v;
  CHECK(induced_subgraph(g, all) == g);

  std::vector<VertexId> one{3};
  const auto single = induced_subgraph(g, one);
  CHECK(single.edge_count() == 0);
  CHECK(single.volume() == 0.0);

  const auto cliques = fixture::planted_cliques(2, 4, 0.1);
  std::vector<VertexId> second{4, 5, 6, 7};
  const auto sub = induced_subgraph(cliques, second);
  std::vector<WeightedEdge> expected;
  for (const auto& e : cliques.edges()) {
    if (e.u >= 4 && e.v >= 4) expected.push_back({e.u - 4, e.v - 4, e.weight});
  }
  const auto got = sub.edges();
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].u == expected[i].u);
    CHECK(got[i].v == expected[i].v);
    CHECK(got[i].weight == expected[i].weight);
  }

  std::vector<VertexId> dup{1, 1};
  CHECK_THROWS_AS(induced_subgraph(g, dup), Error);
}

TEST_CASE("edge list dump") {
  std::ostringstream out;
  write_edge_list(fixture::two_unit_edges(), out);
  CHECK(out.str() == "0,1,1\n2,3,1\n");
}
