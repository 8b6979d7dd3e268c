#include "fewshot/classification.hpp"

#include <cmath>

#include "fewshot/error.hpp"

namespace fewshot {

AssignmentRule AssignmentRule::gmm(std::vector<double> prior) {
  AssignmentRule r{Kind::Gmm, std::move(prior)};
  r.validate();
  return r;
}

AssignmentRule AssignmentRule::parse(const std::string& name) {
  if (name == "mahalanobis-softmax" || name == "mahalanobis") return mahalanobis();
  if (name == "gmm") return gmm();
  throw Error(ErrorCode::InvalidConfig, "unknown assignment rule '" + name + "'");
}

std::string AssignmentRule::name() const {
  return kind == Kind::Gmm ? "gmm" : "mahalanobis-softmax";
}

void AssignmentRule::validate() const {
  if (prior.empty()) return;
  if (kind != Kind::Gmm) throw Error(ErrorCode::InvalidConfig, "prior only applies to gmm");
  double total = 0.0;
  for (double p : prior) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::InvalidConfig, "prior entries must be positive");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidConfig, "prior must sum to 1");
}

std::vector<double> classify(const AssignmentRule& rule, const std::vector<ClassParams>& params,
                             const Eigen::Ref<const Vec>& z) {
  if (params.empty()) throw Error(ErrorCode::EmptyInput, "classify needs at least one class");
  const std::size_t num_classes = params.size();
  if (rule.kind == AssignmentRule::Kind::Gmm && !rule.prior.empty() &&
      rule.prior.size() != num_classes) {
    throw Error(ErrorCode::DimensionMismatch, "prior length does not match class count");
  }

  std::vector<double> logits(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double d2 = mahalanobis_sq(params[k].q_factor, z, params[k].mu);
    if (rule.kind == AssignmentRule::Kind::MahalanobisSoftmax) {
      logits[k] = -d2;
    } else {
      const double prior = rule.prior.empty() ? 1.0 / static_cast<double>(num_classes)
                                              : rule.prior[k];
      logits[k] = std::log(prior) - 0.5 * d2 - 0.5 * params[k].q_factor.log_det();
    }
  }
  return stable_softmax(logits);
}

Mat classify_all(const AssignmentRule& rule, const std::vector<ClassParams>& params,
                 const Mat& points) {
  Mat out(points.cols(), static_cast<Eigen::Index>(params.size()));
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const auto p = classify(rule, params, points.col(j));
    for (std::size_t k = 0; k < p.size(); ++k) out(j, static_cast<Eigen::Index>(k)) = p[k];
  }
  return out;
}

double bregman_divergence(const SpdFactor& f, const Eigen::Ref<const Vec>& z,
                          const Eigen::Ref<const Vec>& z_prime) {
  if (z.size() != f.dim() || z_prime.size() != f.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "bregman_divergence: dimension mismatch");
  }
  const double f_z = z.dot(f.solve(z));
  const Vec grad = 2.0 * f.solve(z_prime);
  const double f_zp = z_prime.dot(grad) / 2.0;
  return f_z - f_zp - grad.dot(z - z_prime);
}

}  // namespace fewshot
