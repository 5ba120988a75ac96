#include <doctest.h>

#include "sevq/error.hpp"
#include "sevq/quantizer.hpp"
#include "support.hpp"

using namespace sevq;

namespace {

StageModel axis_stage() {
  // Cluster k owns two copies of e_k.
  FeatureMatrix anchors(8, 4);
  std::vector<ClusterId> labels;
  for (std::size_t i = 0; i < 8; ++i) {
    anchors(i, i / 2) = 1.0;
    labels.push_back(static_cast<ClusterId>(i / 2));
  }
  FeatureMatrix centroids(4, 4);
  for (std::size_t k = 0; k < 4; ++k) centroids(k, k) = 1.0;
  return StageModel::create(centroids, {2, 2, 2, 2}, anchors, labels, 0.2, StageMethod::kStructuralEntropy);
}

const CodecModel& mixture_model() {
  static const CodecModel model = [] {
    TrainConfig cfg;
    cfg.stages = 4;
    return train_codec(fixture::mixture(), cfg);
  }();
  return model;
}

}  // namespace

TEST_CASE("identical rows collapse the residual after one stage") {
  const auto x = FeatureMatrix::from_rows({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  TrainConfig cfg;
  cfg.stages = 2;
  const auto m = train_codec(x, cfg);
  CHECK(m.stages.size() == 1);
  CHECK(m.truncated);
  CHECK(!m.stop_reason.empty());
  const auto rec = decode(m, encode(m, x));
  CHECK(oracle::mse(rec, x) == 0.0);
}

TEST_CASE("mixture discovers five clusters at stage one") {
  const auto& m = mixture_model();
  REQUIRE(!m.stages.empty());
  CHECK(m.stages[0].size() == 5);
  for (const auto& s : m.stages) {
    CHECK(s.dim() == 16);
    CHECK(s.anchor_graph().vertex_count() == s.anchors().rows());
    for (auto l : s.anchor_labels()) CHECK(static_cast<std::size_t>(l) < s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      std::size_t count = 0;
      for (auto l : s.anchor_labels()) count += l == static_cast<ClusterId>(k);
      CHECK(count >= 1);
      CHECK(count <= 64);
    }
  }
}

TEST_CASE("centroids are means of training members before disentanglement") {
  const auto x = fixture::mixture();
  TrainConfig cfg;
  cfg.stages = 1;
  TrainLog log;
  const auto m = train_codec(x, cfg, &log);
  const auto tokens = encode(m, m.stages[0].anchors());
  CHECK(log.stages[0].clusters == m.stages[0].size());
  CHECK(log.stages[0].se_minimized < log.stages[0].se_singletons);
  std::size_t total = 0;
  for (auto c : m.stages[0].member_counts()) total += c;
  CHECK(total == x.rows());
  // Anchors reproduce their own training labels.
  for (std::size_t i = 0; i < tokens.frames; ++i) CHECK(tokens.at(i, 0) == m.stages[0].anchor_labels()[i]);
}

TEST_CASE("more stages do not hurt held-out error") {
  const auto train = fixture::mixture(0);
  const auto held = fixture::mixture(1, 200);
  TrainConfig one;
  one.stages = 1;
  TrainConfig three;
  three.stages = 3;
  const auto m1 = train_codec(train, one);
  const auto m3 = train_codec(train, three);
  CHECK(oracle::mse(decode(m3, encode(m3, held)), held) <= oracle::mse(decode(m1, encode(m1, held)), held));
}

TEST_CASE("decoded error is non-increasing in stage count") {
  const auto x = fixture::mixture();
  const auto& m = mixture_model();
  const auto stages = decode_stages(m, encode(m, x));
  REQUIRE(stages.size() == m.stages.size());
  for (std::size_t s = 1; s < stages.size(); ++s) CHECK(oracle::mse(stages[s], x) <= oracle::mse(stages[s - 1], x));
}

TEST_CASE("assign picks the cluster holding an identical anchor") {
  const auto stage = axis_stage();
  CHECK(assign(stage, std::vector<double>{0, 0, 0, 1}) == 3);
  CHECK(assign(stage, std::vector<double>{0, 2, 0, 0}) == 1);
}

TEST_CASE("assign falls back to the nearest centroid") {
  const auto stage = StageModel::create(FeatureMatrix::from_rows({{1, 0}, {0, 1}}), {1, 1},
                                        FeatureMatrix::from_rows({{1, 0}, {-1, 0}}), {0, 1}, 0.2,
                                        StageMethod::kStructuralEntropy);
  AssignTrace trace;
  CHECK(assign(stage, std::vector<double>{0, 0.9}, &trace) == 1);
  CHECK(trace.fallback);
  CHECK(assign(stage, std::vector<double>{0, 0}, &trace) == 0);
  CHECK(trace.fallback);
}

TEST_CASE("assign matches the exhaustive oracle on random queries") {
  const auto x = fixture::mixture(5, 150, 6, 3);
  TrainConfig cfg;
  cfg.stages = 1;
  cfg.anchors_per_cluster = 20;
  const auto m = train_codec(x, cfg);
  const auto& stage = m.stages[0];
  REQUIRE(stage.size() == 3);
  sevq::Rng rng(40);
  std::size_t fallbacks = 0;
  for (int q = 0; q < 100; ++q) {
    const auto query = fixture::gaussian(rng, 1, 6);
    AssignTrace trace;
    const int token = assign(stage, query.row(0), &trace);
    fallbacks += trace.fallback;
    CHECK(token == oracle::assign(stage, query.row(0)));
  }
  CHECK(fallbacks < 100);
}

TEST_CASE("encode is assign composed over stages") {
  const auto x = fixture::mixture();
  const auto& m = mixture_model();
  const auto tokens = encode(m, x);
  CHECK(encode(m, x) == tokens);
  for (std::size_t t : {0u, 7u, 123u, 499u}) {
    std::vector<double> r(x.row(t).begin(), x.row(t).end());
    for (std::size_t s = 0; s < m.stages.size(); ++s) {
      const int k = assign(m.stages[s], r);
      CHECK(tokens.at(t, s) == k);
      for (std::size_t h = 0; h < r.size(); ++h) r[h] -= m.stages[s].centroids()(static_cast<std::size_t>(k), h);
    }
  }
  for (std::size_t t = 0; t < tokens.frames; ++t) {
    for (std::size_t s = 0; s < tokens.stages; ++s) {
      CHECK(tokens.at(t, s) >= 0);
      CHECK(static_cast<std::size_t>(tokens.at(t, s)) < m.stages[s].size());
    }
  }
}

TEST_CASE("encode rejects the wrong dimension") {
  try {
    encode(mixture_model(), FeatureMatrix(2, 3));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("expected H = 16") != std::string::npos);
  }
}

TEST_CASE("decode") {
  const auto& m = mixture_model();
  TokenSequence t{2, 1, {1, 4}};
  const auto rec = decode(m, t, 1);
  for (std::size_t h = 0; h < 16; ++h) {
    CHECK(rec(0, h) == m.stages[0].centroids()(1, h));
    CHECK(rec(1, h) == m.stages[0].centroids()(4, h));
  }
  TokenSequence bad{2, 1, {0, 99}};
  try {
    decode(m, bad, 1);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRange);
    CHECK(std::string(e.what()).find("frame 1") != std::string::npos);
    CHECK(std::string(e.what()).find("stage 1") != std::string::npos);
  }
}

TEST_CASE("reconstruction beats zero on centered data") {
  auto x = fixture::mixture(2);
  std::vector<double> mean(x.cols(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    for (std::size_t h = 0; h < x.cols(); ++h) mean[h] += x(t, h) / static_cast<double>(x.rows());
  }
  for (std::size_t t = 0; t < x.rows(); ++t) {
    for (std::size_t h = 0; h < x.cols(); ++h) x(t, h) -= mean[h];
  }
  TrainConfig cfg;
  cfg.stages = 2;
  const auto m = train_codec(x, cfg);
  CHECK(oracle::mse(decode(m, encode(m, x)), x) <= oracle::mse(FeatureMatrix(x.rows(), x.cols()), x));
}

TEST_CASE("distortion report") {
  sevq::Rng rng(41);
  const auto x = fixture::gaussian(rng, 30, 5);
  auto r = distortion_report(x, x);
  CHECK(r.final_mse == 0.0);
  CHECK(r.mean_cosine == doctest::Approx(1.0).epsilon(1e-12));
  auto neg = x;
  for (auto& v : neg.data()) v = -v;
  CHECK(distortion_report(x, neg).mean_cosine == doctest::Approx(-1.0).epsilon(1e-12));

  const auto y = fixture::gaussian(rng, 30, 5);
  r = distortion_report(x, y);
  double cos_sum = 0.0;
  std::vector<double> col(5, 0.0);
  for (std::size_t t = 0; t < 30; ++t) {
    cos_sum += oracle::cosine(x.row(t), y.row(t));
    for (std::size_t h = 0; h < 5; ++h) col[h] += (x(t, h) - y(t, h)) * (x(t, h) - y(t, h));
  }
  CHECK(std::abs(r.final_mse - oracle::mse(x, y)) < 1e-12);
  CHECK(std::abs(r.mean_cosine - cos_sum / 30.0) < 1e-12);
  for (std::size_t h = 0; h < 5; ++h) CHECK(std::abs(r.rmse[h] - std::sqrt(col[h] / 30.0)) < 1e-12);
  CHECK_THROWS_AS(distortion_report(x, FeatureMatrix(30, 4)), Error);
}

TEST_CASE("euclidean stage switch") {
  TrainConfig cfg;
  cfg.stages = 2;
  cfg.euclidean_stages = {2};
  const auto m = train_codec(fixture::mixture(), cfg);
  REQUIRE(m.stages.size() == 2);
  CHECK(m.stages[0].method() == StageMethod::kStructuralEntropy);
  CHECK(m.stages[1].method() == StageMethod::kEuclidean);
  const auto x = fixture::mixture(3, 50);
  const auto tokens = encode(m, x);
  const auto first = decode(m, tokens, 1);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    std::vector<double> r(x.row(t).begin(), x.row(t).end());
    for (std::size_t h = 0; h < r.size(); ++h) r[h] -= first(t, h);
    CHECK(tokens.at(t, 1) == nearest_centroid(m.stages[1].centroids(), r));
  }
}

TEST_CASE("training is deterministic and subsampling is seeded") {
  const auto x = fixture::mixture();
  TrainConfig cfg;
  cfg.stages = 2;
  const auto a = train_codec(x, cfg);
  const auto b = train_codec(x, cfg);
  REQUIRE(a.stages.size() == b.stages.size());
  for (std::size_t s = 0; s < a.stages.size(); ++s) CHECK(a.stages[s].centroids() == b.stages[s].centroids());

  const auto s1 = subsample_rows(x, 100, 9);
  CHECK(s1.rows() == 100);
  CHECK(subsample_rows(x, 100, 9) == s1);
  CHECK(!(subsample_rows(x, 100, 10) == s1));
  CHECK(subsample_rows(x, 1000, 9) == x);
}

TEST_CASE("disentangled training keeps codebook sizes") {
  TrainConfig plain;
  plain.stages = 1;
  TrainConfig dis = plain;
  dis.disentangle = true;
  dis.disentangle_steps = 10;
  TrainLog log;
  const auto x = fixture::mixture();
  const auto a = train_codec(x, plain);
  const auto b = train_codec(x, dis, &log);
  CHECK(a.stages[0].size() == b.stages[0].size());
  CHECK(a.stages[0].member_counts() == b.stages[0].member_counts());
  CHECK(log.stages[0].disentangle_end <= log.stages[0].disentangle_start);
}
