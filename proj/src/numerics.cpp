#include "fewshot/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

constexpr double kSymmetryTolerance = 1e-8;

void check_dims(const SpdFactor& f, Eigen::Index a, Eigen::Index b) {
  if (a != f.dim() || b != f.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "factor is " + std::to_string(f.dim()) + "-dimensional, vectors are " +
                    std::to_string(a) + " and " + std::to_string(b));
  }
}

}  // namespace

Vec SpdFactor::solve_lower(const Eigen::Ref<const Vec>& v) const {
  if (v.size() != dim()) {
    throw Error(ErrorCode::DimensionMismatch, "solve_lower: size mismatch");
  }
  return lower_.triangularView<Eigen::Lower>().solve(v);
}

Vec SpdFactor::solve(const Eigen::Ref<const Vec>& v) const {
  Vec y = solve_lower(v);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Mat SpdFactor::reconstruct() const { return lower_ * lower_.transpose(); }

SpdFactor spd_factorize(const Mat& q, std::span<const double> jitter_schedule) {
  if (q.rows() != q.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "spd_factorize: matrix is not square");
  }
  if (!all_finite(q)) {
    throw Error(ErrorCode::NonFiniteInput, "spd_factorize: non-finite entry");
  }
  const double asym = (q - q.transpose()).cwiseAbs().maxCoeff();
  if (q.size() > 0 && asym > kSymmetryTolerance) {
    throw Error(ErrorCode::NotSymmetric,
                "spd_factorize: asymmetry " + std::to_string(asym));
  }

  const auto d = q.rows();
  for (double eps : jitter_schedule) {
    Mat shifted = q;
    shifted.diagonal().array() += eps;
    Eigen::LLT<Mat> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Mat lower = llt.matrixL();
    const auto diag = lower.diagonal();
    if (!diag.allFinite()) continue;
    // Pivots at rounding level mean a singular matrix that LLT let through.
    const double scale = shifted.diagonal().cwiseAbs().maxCoeff();
    const double floor = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * scale;
    if (!(diag.array().square() > floor).all()) continue;

    SpdFactor f;
    f.lower_ = std::move(lower);
    f.jitter_ = eps;
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(f.lower_(i, i));
    f.log_det_ = 2.0 * log_det;
    return f;
  }
  throw Error(ErrorCode::FactorizationFailed,
              "matrix not positive definite for any of " +
                  std::to_string(jitter_schedule.size()) + " jitter values");
}

double mahalanobis_sq(const SpdFactor& f, const Eigen::Ref<const Vec>& a,
                      const Eigen::Ref<const Vec>& b) {
  check_dims(f, a.size(), b.size());
  const Vec y = f.solve_lower(a - b);
  return y.squaredNorm();
}

std::vector<double> stable_softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorCode::EmptyInput, "softmax of empty list");
  for (double x : logits) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "softmax logit not finite");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

}  // namespace fewshot
