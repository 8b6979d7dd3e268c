#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fewshot/error.hpp"
#include "fewshot/estimation.hpp"
#include "test_support.hpp"

using namespace fewshot;
using namespace testing_support;

namespace {

void check_against_oracle(const Estimate& got, const oracle::Est& want, double tol) {
  CHECK(max_abs_diff(got.task.mu, want.task_mu) <= tol);
  CHECK(max_abs_diff(got.task.sigma, want.task_sigma) <= tol);
  REQUIRE(got.classes.size() == want.classes.size());
  for (std::size_t k = 0; k < got.classes.size(); ++k) {
    CHECK(max_abs_diff(got.classes[k].mu, want.classes[k].mu) <= tol);
    CHECK(max_abs_diff(got.classes[k].sigma, want.classes[k].sigma) <= tol);
    CHECK(max_abs_diff(got.classes[k].q, want.classes[k].q) <= tol);
    CHECK(std::abs(got.classes[k].count - want.classes[k].count) <= tol);
  }
}

double max_diff(const Estimate& a, const Estimate& b) {
  double worst = (a.task.mu - b.task.mu).cwiseAbs().maxCoeff();
  worst = std::max(worst, (a.task.sigma - b.task.sigma).cwiseAbs().maxCoeff());
  for (std::size_t k = 0; k < a.classes.size(); ++k) {
    worst = std::max(worst, (a.classes[k].mu - b.classes[k].mu).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a.classes[k].q - b.classes[k].q).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a.classes[k].sigma - b.classes[k].sigma).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(a.classes[k].count - b.classes[k].count));
  }
  return worst;
}

// Same task with support and query columns permuted.
Task shuffled(const Task& t, std::mt19937_64& rng) {
  std::vector<int> sp(static_cast<std::size_t>(t.support_size())), qp(static_cast<std::size_t>(t.query_size()));
  std::iota(sp.begin(), sp.end(), 0);
  std::iota(qp.begin(), qp.end(), 0);
  std::shuffle(sp.begin(), sp.end(), rng);
  std::shuffle(qp.begin(), qp.end(), rng);
  Mat s(t.dim(), t.support_size()), q(t.dim(), t.query_size());
  std::vector<int> labels;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    s.col(static_cast<Eigen::Index>(i)) = t.support().col(sp[i]);
    labels.push_back(t.labels()[static_cast<std::size_t>(sp[i])]);
  }
  for (std::size_t j = 0; j < qp.size(); ++j) q.col(static_cast<Eigen::Index>(j)) = t.query().col(qp[j]);
  return Task(s, labels, q, t.num_classes());
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("single-shot class shrinks halfway to the task covariance") {
  std::mt19937_64 rng(1);
  const Task task = random_task(rng, 3, {1, 4}, 0);
  const auto est = estimate_unweighted(task, 1.0);
  const auto& c0 = est.classes[0];
  CHECK((c0.mu - task.support().col(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(c0.sigma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c0.lambda == 0.5);
  Mat expected = 0.5 * est.task.sigma;
  expected.diagonal().array() += 1.0;
  CHECK((c0.q - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("identical support points give Q_k = beta * I") {
  Mat s = Mat::Constant(3, 4, 0.7);
  const Task task(s, {0, 1, 0, 1}, Mat(3, 0), 2);
  const auto est = estimate_unweighted(task, 2.5);
  CHECK(est.task.sigma.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& c : est.classes) CHECK(c.q.isApprox(2.5 * Mat::Identity(3, 3)));
}

TEST_CASE("unweighted estimates match the summation oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Task task = random_task(rng, 4, random_shots(rng, 3, 1, 6), 5);
    const auto want = oracle::unweighted(columns(task.support()), task.labels(), 3, 1.0);
    check_against_oracle(estimate_unweighted(task, 1.0), want, 1e-12);
  }
}

TEST_CASE("weighted estimates match the weighted summation oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int num_classes = 2 + trial % 4;
    const int m = 1 + trial % 9;
    const Task task = random_task(rng, 1 + trial % 8, random_shots(rng, num_classes, 1, 5), m);
    const Responsibilities resp(task, random_stochastic(rng, m, num_classes));

    auto points = columns(task.support());
    for (const auto& q : columns(task.query())) points.push_back(q);
    const auto want = oracle::weighted(points, to_std(resp.weights()), num_classes, 1.0);
    check_against_oracle(estimate_weighted(task, resp, 1.0), want, 1e-12);
  }
}

TEST_CASE("weighted estimate with no queries equals the unweighted estimate") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Task task = random_task(rng, 5, random_shots(rng, 4, 1, 7), 0);
    const Responsibilities resp(task, Mat(0, 4));
    CHECK(max_diff(estimate_weighted(task, resp, 1.0), estimate_unweighted(task, 1.0)) <= 1e-12);
  }
}

TEST_CASE("uniform query weights pull symmetric class means equally") {
  Mat s(2, 2);
  s << -1, 1, 0, 0;
  Mat q(2, 2);
  q << 0, 0, 3, 5;
  const Task task(s, {0, 1}, q, 2);
  const Responsibilities resp(task, Mat::Constant(2, 2, 0.5));
  const auto est = estimate_weighted(task, resp, 1.0);
  const Vec shift0 = est.classes[0].mu - s.col(0);
  const Vec shift1 = est.classes[1].mu - s.col(1);
  CHECK(shift0(1) == doctest::Approx(shift1(1)));
  CHECK(shift0(0) == doctest::Approx(-shift1(0)));
  CHECK(shift0(1) == doctest::Approx(2.0));  // (0.5*3 + 0.5*5) / 2
  CHECK(est.classes[0].count == 2.0);
}

TEST_CASE("responsibilities validate their rows") {
  std::mt19937_64 rng(5);
  const Task task = random_task(rng, 2, {1, 1}, 2);
  Mat bad(2, 2);
  bad << 0.6, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(Responsibilities(task, bad), Error);
  CHECK_THROWS_AS(Responsibilities(task, Mat::Constant(1, 2, 0.5)), Error);
  const Responsibilities ok(task, Mat::Constant(2, 2, 0.5));
  CHECK(ok.row_kind(0) == Responsibilities::RowKind::Support);
  CHECK(ok.row_kind(2) == Responsibilities::RowKind::Query);
  CHECK(ok.weights()(1, 1) == 1.0);
  CHECK(ok.weights()(1, 0) == 0.0);
}

TEST_CASE("collapsed soft count raises DegenerateClass") {
  Mat points = Mat::Random(2, 3);
  Mat w(3, 2);
  w << 1, 0, 1, 0, 1, 0;
  try {
    estimate_from_weights(points, w, 1.0);
    FAIL("expected DegenerateClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateClass);
  }
}

TEST_CASE("shrinkage limits") {
  // Replicating a class raises lambda_k monotonically toward 1.
  std::mt19937_64 rng(6);
  double previous = 0.0;
  for (int shots : {1, 2, 4, 8, 16, 64, 256}) {
    const Task task = random_task(rng, 3, {shots, 2}, 0);
    const double lambda = estimate_unweighted(task, 1.0).classes[0].lambda;
    CHECK(lambda > previous);
    CHECK(lambda == doctest::Approx(shots / (shots + 1.0)));
    previous = lambda;
  }

  // A vanishing soft count sends Q'_k to the task covariance plus ridge.
  Mat points = Mat::Random(3, 6);
  Mat w(6, 2);
  w.col(0).setConstant(1.0);
  w.col(1).setZero();
  w(5, 1) = 1e-7;
  w(5, 0) = 1.0 - 1e-7;
  const auto est = estimate_from_weights(points, w, 0.5);
  Mat limit = est.task.sigma;
  limit.diagonal().array() += 0.5;
  CHECK(est.classes[1].lambda == doctest::Approx(1e-7).epsilon(1e-6));
  CHECK((est.classes[1].q - limit).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("positive beta never needs jitter") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Task task = random_task(rng, 8, random_shots(rng, 4, 1, 3), 4);
    for (const auto& c : estimate_unweighted(task, 1.0).classes) CHECK(c.q_factor.jitter() == 0.0);
  }
}

TEST_CASE("estimators are permutation invariant") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Task task = random_task(rng, 4, random_shots(rng, 3, 1, 5), 6);
    const Task perm = shuffled(task, rng);
    CHECK(max_diff(estimate_unweighted(task, 1.0), estimate_unweighted(perm, 1.0)) <= 1e-12);

    const Mat uniform = Mat::Constant(6, 3, 1.0 / 3.0);
    CHECK(max_diff(estimate_weighted(task, Responsibilities(task, uniform), 1.0),
                   estimate_weighted(perm, Responsibilities(perm, uniform), 1.0)) <= 1e-12);

    const auto a = pool_task_embedding(task), b = pool_task_embedding(perm);
    CHECK((a.e_s - b.e_s).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.e_q - b.e_q).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("affine maps transform means and covariances equivariantly when beta = 0") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3;
    const Task task = random_task(rng, d, {6, 7, 5}, 8);
    Mat a = Mat::Random(d, d) + 2.0 * Mat::Identity(d, d);
    const Vec b = random_vec(rng, d);
    const Mat ts = (a * task.support()).colwise() + b;
    const Mat tq = (a * task.query()).colwise() + b;
    const Task moved(ts, task.labels(), tq, 3);

    const auto before = estimate_unweighted(task, 0.0);
    const auto after = estimate_unweighted(moved, 0.0);
    for (int k = 0; k < 3; ++k) {
      const Vec mu = a * before.classes[k].mu + b;
      const Mat q = a * before.classes[k].q * a.transpose();
      CHECK((after.classes[k].mu - mu).norm() <= 1e-8 * mu.norm());
      CHECK((after.classes[k].q - q).norm() <= 1e-8 * q.norm());
    }

    const Mat probs = random_stochastic(rng, 8, 3);
    const auto wb = estimate_weighted(task, Responsibilities(task, probs), 0.0);
    const auto wa = estimate_weighted(moved, Responsibilities(moved, probs), 0.0);
    for (int k = 0; k < 3; ++k) {
      const Mat q = a * wb.classes[k].q * a.transpose();
      CHECK((wa.classes[k].q - q).norm() <= 1e-8 * q.norm());
    }
  }
}

TEST_CASE("pooled task embedding") {
  std::vector<LabeledEmbedding> support;
  for (int i = 0; i < 10; ++i) support.push_back({Vec::Unit(2, 0), 0});
  support.push_back({Vec::Unit(2, 1), 1});
  Vec q(2);
  q << 2, 2;
  const auto e = pool_task_embedding(Task::from_points(support, {q}, 2));
  CHECK(e.e_s(0) == doctest::Approx(0.5));
  CHECK(e.e_s(1) == doctest::Approx(0.5));
  CHECK(e.e_q(0) == 2.0);
  CHECK(e.e_q(1) == 2.0);

  CHECK_THROWS_WITH(pool_task_embedding(Task::from_points(support, {}, 2)),
                    doctest::Contains("EmptyQuery"));

  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const Task task = random_task(rng, 5, random_shots(rng, 4, 1, 9), 7);
    const auto want = oracle::pool(columns(task.support()), task.labels(), columns(task.query()), 4);
    const auto got = pool_task_embedding(task);
    CHECK(max_abs_diff(got.e_s, want.e_s) <= 1e-12);
    CHECK(max_abs_diff(got.e_q, want.e_q) <= 1e-12);
  }
}

}
