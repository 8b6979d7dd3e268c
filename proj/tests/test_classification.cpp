#include <doctest.h>

#include <cmath>
#include <random>

#include "fewshot/classification.hpp"
#include "fewshot/error.hpp"
#include "test_support.hpp"

using namespace fewshot;
using namespace testing_support;

namespace {

ClassParams params_at(const Vec& mu, const Mat& q) {
  ClassParams p;
  p.mu = mu;
  p.q = q;
  p.q_factor = spd_factorize(q);
  p.count = 1.0;
  return p;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_SUITE("classification") {

TEST_CASE("single class is certain") {
  const std::vector<ClassParams> params{params_at(Vec::Zero(2), Mat::Identity(2, 2))};
  const auto p = classify(AssignmentRule::mahalanobis(), params, v2(3, -1));
  REQUIRE(p.size() == 1);
  CHECK(p[0] == 1.0);
  CHECK(classify(AssignmentRule::gmm(), params, v2(3, -1))[0] == 1.0);
}

TEST_CASE("equidistant point splits evenly") {
  const std::vector<ClassParams> params{params_at(v2(0, 0), Mat::Identity(2, 2)),
                                        params_at(v2(4, 0), Mat::Identity(2, 2))};
  const auto p = classify(AssignmentRule::mahalanobis(), params, v2(2, 0));
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax over negative squared distances") {
  const std::vector<ClassParams> params{params_at(v2(0, 0), Mat::Identity(2, 2)),
                                        params_at(v2(4, 0), Mat::Identity(2, 2))};
  const auto p = classify(AssignmentRule::mahalanobis(), params, v2(1, 0));
  const double expected = std::exp(-1.0) / (std::exp(-1.0) + std::exp(-9.0));
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(p[0] == doctest::Approx(0.999665).epsilon(1e-6));
}

TEST_CASE("gmm logits include prior and log-determinant") {
  Mat wide = 4.0 * Mat::Identity(2, 2);
  const std::vector<ClassParams> params{params_at(v2(0, 0), Mat::Identity(2, 2)),
                                        params_at(v2(1, 0), wide)};
  const Vec z = v2(0.5, 0.5);
  const std::vector<double> prior{0.3, 0.7};
  const auto p = classify(AssignmentRule::gmm(prior), params, z);
  const double l0 = std::log(0.3) - 0.5 * 0.5 - 0.5 * 0.0;
  const double l1 = std::log(0.7) - 0.5 * (0.5 / 4.0) - 0.5 * std::log(16.0);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(l1 - l0))).epsilon(1e-14));
}

TEST_CASE("classify matches the direct-inverse oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 6, num_classes = 1 + trial % 5;
    oracle::Est est;
    std::vector<ClassParams> params;
    for (int k = 0; k < num_classes; ++k) {
      const Vec mu = random_vec(rng, d);
      const Mat q = random_spd(rng, d);
      params.push_back(params_at(mu, q));
      est.classes.push_back({to_std(mu), {}, to_std(q), 1.0});
    }
    const Vec z = random_vec(rng, d, 2.0);
    for (bool gmm : {false, true}) {
      const auto got = classify(gmm ? AssignmentRule::gmm() : AssignmentRule::mahalanobis(), params, z);
      const auto want = oracle::probabilities(est, to_std(z), gmm);
      for (int k = 0; k < num_classes; ++k) CHECK(std::abs(got[k] - want[k]) <= 1e-9);
    }
  }
}

TEST_CASE("outputs are probability vectors and translation invariant") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 4, num_classes = 3;
    std::vector<ClassParams> params, moved;
    const Vec shift = random_vec(rng, d, 10.0);
    for (int k = 0; k < num_classes; ++k) {
      const Vec mu = random_vec(rng, d);
      const Mat q = random_spd(rng, d);
      params.push_back(params_at(mu, q));
      moved.push_back(params_at(mu + shift, q));
    }
    const Vec z = random_vec(rng, d, 3.0);
    for (const auto& rule : {AssignmentRule::mahalanobis(), AssignmentRule::gmm()}) {
      const auto p = classify(rule, params, z);
      const auto pm = classify(rule, moved, z + shift);
      double total = 0.0;
      for (int k = 0; k < num_classes; ++k) {
        CHECK(p[k] >= 0.0);
        total += p[k];
        CHECK(std::abs(p[k] - pm[k]) <= 1e-12);
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("shared covariance and uniform prior: gmm argmax equals softmax argmax") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 3, num_classes = 4;
    const Mat q = random_spd(rng, d);
    std::vector<ClassParams> params;
    for (int k = 0; k < num_classes; ++k) params.push_back(params_at(random_vec(rng, d), q));
    const Vec z = random_vec(rng, d, 2.0);
    const auto a = classify(AssignmentRule::mahalanobis(), params, z);
    const auto b = classify(AssignmentRule::gmm(), params, z);
    CHECK(argmax(a) == argmax(b));
  }
}

TEST_CASE("bregman divergence") {
  const auto eye = spd_factorize(Mat::Identity(2, 2));
  CHECK(bregman_divergence(eye, v2(1, 0), v2(0, 0)) == doctest::Approx(1.0));
  CHECK(bregman_divergence(eye, v2(0.3, 2), v2(0.3, 2)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(bregman_divergence(eye, Vec::Zero(3), Vec::Zero(3)), Error);

  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + trial % 8;
    const auto f = spd_factorize(random_spd(rng, d));
    const Vec z = random_vec(rng, d), zp = random_vec(rng, d);
    CHECK(std::abs(bregman_divergence(f, z, zp) - mahalanobis_sq(f, z, zp)) <= 1e-9);
  }
}

TEST_CASE("rule parsing and validation") {
  CHECK(AssignmentRule::parse("gmm").kind == AssignmentRule::Kind::Gmm);
  CHECK(AssignmentRule::parse("mahalanobis-softmax").name() == "mahalanobis-softmax");
  CHECK_THROWS_AS(AssignmentRule::parse("cosine"), Error);
  CHECK_THROWS_AS(AssignmentRule::gmm({0.5, 0.6}), Error);
  const std::vector<ClassParams> params{params_at(v2(0, 0), Mat::Identity(2, 2))};
  CHECK_THROWS_AS(classify(AssignmentRule::gmm({0.5, 0.5}), params, v2(0, 0)), Error);
  CHECK_THROWS_AS(classify(AssignmentRule::mahalanobis(), params, Vec::Zero(3)), Error);
}

}
