#include "ist/errors.hpp"
#include "ist/toydata.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace ist;

namespace {

StyleFactors factors(double e, double p, double v, int c) {
  StyleFactors f;
  f.energy = e;
  f.pitch_level = p;
  f.pitch_variation = v;
  f.content = c;
  return f;
}

StyleFactors random_factors(RngStream& rng) {
  return factors(0.5 + rng.uniform(), 8.0 + 16.0 * rng.uniform(), 6.0 * rng.uniform(),
                 static_cast<int>(rng.index(8)));
}

}  // namespace

TEST_CASE("generator formula at sample points") {
  const StyleFactors f = factors(1.2, 13.4, 3.5, 5);
  const ToyMel m = gen_toy_mel(f);
  REQUIRE(m.rows() == kBands);
  REQUIRE(m.cols() == kFrames);
  for (int l : {0, 7, 31, 63}) {
    const double mu = 13.4 + 3.5 * std::sin(2 * std::numbers::pi * l / 64.0 + 2 * std::numbers::pi * 5 / 8.0);
    const double env = 0.7 + 0.3 * std::cos(2 * std::numbers::pi * (1 + 5 % 3) * l / 64.0);
    for (int b : {0, 12, 13, 20, 31}) {
      const double expected = 1.2 * std::exp(-(b - mu) * (b - mu) / (2 * 1.5 * 1.5)) * env;
      CHECK(m(b, l) == doctest::Approx(expected).epsilon(1e-13));
    }
  }
}

TEST_CASE("flat ridge peaks at the pitch level with value E env(0)") {
  const ToyMel m = gen_toy_mel(factors(0.8, 17.0, 0.0, 2));
  Eigen::Index row = 0;
  const double peak = m.col(0).maxCoeff(&row);
  CHECK(row == 17);
  CHECK(peak == doctest::Approx(0.8 * content_envelope(2, 0)));
  CHECK(content_envelope(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("generator is linear in energy") {
  const ToyMel a = gen_toy_mel(factors(0.6, 12.0, 2.0, 1));
  const ToyMel b = gen_toy_mel(factors(1.2, 12.0, 2.0, 1));
  CHECK((b - 2.0 * a).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("content ids change the matrix") {
  const ToyMel base = gen_toy_mel(factors(1.0, 16.0, 3.0, 0));
  for (int c = 1; c < kContentIds; ++c) CHECK(gen_toy_mel(factors(1.0, 16.0, 3.0, c)) != base);
}

TEST_CASE("out-of-range factors are rejected") {
  CHECK_THROWS_AS(gen_toy_mel(factors(0.4, 16, 0, 0)), ValidationError);
  CHECK_THROWS_AS(gen_toy_mel(factors(1.0, 24.5, 0, 0)), ValidationError);
  CHECK_THROWS_AS(gen_toy_mel(factors(1.0, 16, -0.1, 0)), ValidationError);
  CHECK_THROWS_AS(gen_toy_mel(factors(1.0, 16, 0, 8)), ValidationError);
  CHECK_THROWS_AS(gen_toy_mel(factors(std::nan(""), 16, 0, 0)), ValidationError);
}

TEST_CASE("entries are non-negative, finite and bounded by 1.5") {
  RngStream rng(1);
  for (int i = 0; i < 200; ++i) {
    const StyleFactors f = random_factors(rng);
    const ToyMel m = gen_toy_mel(f);
    CHECK(m.allFinite());
    CHECK(m.minCoeff() >= 0.0);
    CHECK(m.maxCoeff() <= 1.5);
    // Lipschitz in E with constant max(env * gaussian) <= 1.
    StyleFactors g = f;
    g.energy = std::min(1.5, f.energy + 0.1);
    CHECK((gen_toy_mel(g) - m).cwiseAbs().maxCoeff() <= std::abs(g.energy - f.energy) + 1e-15);
  }
}

TEST_CASE("estimator on a flat ridge") {
  const FactorEstimate e = estimate_factors(gen_toy_mel(factors(1.0, 16.0, 0.0, 0)));
  CHECK(e.pitch_level == doctest::Approx(16.0).epsilon(0.25 / 16.0));
  CHECK(e.pitch_variation <= 0.25);
  CHECK(e.energy == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("estimator: energy scales linearly, variation recovered") {
  const FactorEstimate a = estimate_factors(gen_toy_mel(factors(0.6, 14.0, 4.0, 3)));
  const FactorEstimate b = estimate_factors(gen_toy_mel(factors(1.2, 14.0, 4.0, 3)));
  CHECK(b.energy == doctest::Approx(2.0 * a.energy).epsilon(1e-12));
  CHECK(std::abs(a.pitch_variation - 4.0) <= 0.5);
}

TEST_CASE("estimator round trip over 1000 random factor draws") {
  RngStream rng(2);
  for (int i = 0; i < 1000; ++i) {
    const StyleFactors f = random_factors(rng);
    const FactorEstimate e = estimate_factors(gen_toy_mel(f));
    CAPTURE(i);
    CHECK(std::abs(e.energy - f.energy) <= 0.05 * f.energy);
    CHECK(std::abs(e.pitch_level - f.pitch_level) <= 0.25);
    CHECK(std::abs(e.pitch_variation - f.pitch_variation) <= 0.5);
  }
}

TEST_CASE("estimator rejects matrices without a positive entry") {
  CHECK_THROWS_AS(estimate_factors(ToyMel::Zero(kBands, kFrames)), EstimationError);
  CHECK_THROWS_AS(estimate_factors(ToyMel::Constant(kBands, kFrames, -1.0)), EstimationError);
}

TEST_CASE("dataset is deterministic per seed") {
  const ToyDataset a = make_dataset(50, 7), b = make_dataset(50, 7), c = make_dataset(50, 8);
  REQUIRE(a.size() == 50);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].mel == b.samples[i].mel);
    CHECK(a.samples[i].content_sequence == b.samples[i].content_sequence);
    any_diff = any_diff || a.samples[i].mel != c.samples[i].mel;
  }
  CHECK(any_diff);
}

TEST_CASE("dataset samples are consistent with their factors") {
  const ToyDataset d = make_dataset(30, 3);
  for (const ToySample& s : d.samples) {
    CHECK(s.mel == gen_toy_mel(s.factors));
    CHECK(s.content_sequence == std::vector<int>(kFrames, s.factors.content));
  }
  CHECK_THROWS_AS(make_dataset(9, 1), ValidationError);
}

TEST_CASE("splits are disjoint, cover all indices and follow 80/10/10") {
  const ToyDataset d = make_dataset(100, 4);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (Split s : {Split::train, Split::val, Split::test}) {
    for (std::size_t i : d.indices(s)) {
      CHECK(d.split_of(i) == s);
      seen.insert(i);
      ++total;
    }
  }
  CHECK(total == 100);
  CHECK(seen.size() == 100);
  CHECK(d.indices(Split::train).size() == 80);
  CHECK(d.indices(Split::val).size() == 10);
  CHECK(d.indices(Split::test).size() == 10);
}

TEST_CASE("factor marginals over 10k samples") {
  const ToyDataset d = make_dataset(10000, 5);
  double e = 0.0, p = 0.0, v = 0.0;
  std::vector<int> counts(kContentIds, 0);
  for (const ToySample& s : d.samples) {
    e += s.factors.energy;
    p += s.factors.pitch_level;
    v += s.factors.pitch_variation;
    ++counts[static_cast<std::size_t>(s.factors.content)];
  }
  CHECK(e / 10000.0 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(p / 10000.0 == doctest::Approx(16.0).epsilon(0.02));
  CHECK(v / 10000.0 == doctest::Approx(3.0).epsilon(0.03));
  for (int n : counts) CHECK(n == doctest::Approx(1250).epsilon(0.1));
}
