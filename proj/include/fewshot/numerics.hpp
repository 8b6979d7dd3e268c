#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace fewshot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kDefaultJitter[] = {0.0, 1e-8, 1e-6, 1e-4};

/// Cholesky factor L of an SPD matrix Q = L * L^T, with the log-determinant
/// and the diagonal jitter that was needed to obtain it.
///
/// All applications of Q^{-1} in the library go through the triangular
/// solves below; Q is never inverted explicitly.
class SpdFactor {
 public:
  SpdFactor() = default;

  Eigen::Index dim() const { return lower_.rows(); }
  const Mat& lower() const { return lower_; }
  double log_det() const { return log_det_; }
  double jitter() const { return jitter_; }

  /// L^{-1} v.
  Vec solve_lower(const Eigen::Ref<const Vec>& v) const;
  /// Q^{-1} v, via L then L^T.
  Vec solve(const Eigen::Ref<const Vec>& v) const;
  /// L * L^T.
  Mat reconstruct() const;

 private:
  friend SpdFactor spd_factorize(const Mat& q, std::span<const double> jitter_schedule);

  Mat lower_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

/// Factorizes q + eps*I for the first eps in `jitter_schedule` that yields a
/// strictly positive diagonal. Throws NotSymmetric when |q - q^T| exceeds 1e-8
/// anywhere, FactorizationFailed when the schedule is exhausted.
SpdFactor spd_factorize(const Mat& q, std::span<const double> jitter_schedule = kDefaultJitter);

/// (a - b)^T Q^{-1} (a - b).
double mahalanobis_sq(const SpdFactor& f, const Eigen::Ref<const Vec>& a,
                      const Eigen::Ref<const Vec>& b);

/// Max-subtracted softmax. Throws EmptyInput / NonFiniteInput.
std::vector<double> stable_softmax(std::span<const double> logits);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

bool all_finite(const Eigen::Ref<const Mat>& m);

}  // namespace fewshot
