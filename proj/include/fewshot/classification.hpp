#pragma once

#include <string>
#include <vector>

#include "fewshot/estimation.hpp"

namespace fewshot {

/// How query points are assigned to classes.
///  - MahalanobisSoftmax: logits -d2_k
///  - Gmm: logits ln(pi_k) - d2_k / 2 - ln|Q_k| / 2
struct AssignmentRule {
  enum class Kind { MahalanobisSoftmax, Gmm };

  Kind kind = Kind::MahalanobisSoftmax;
  std::vector<double> prior;  // gmm only; empty means uniform 1/K

  static AssignmentRule mahalanobis() { return {}; }
  static AssignmentRule gmm(std::vector<double> prior = {});
  static AssignmentRule parse(const std::string& name);

  std::string name() const;
  void validate() const;
};

/// Class probabilities for z under `rule`.
std::vector<double> classify(const AssignmentRule& rule, const std::vector<ClassParams>& params,
                             const Eigen::Ref<const Vec>& z);

/// Probabilities for each column of `points` (returned as rows, points x K).
Mat classify_all(const AssignmentRule& rule, const std::vector<ClassParams>& params,
                 const Mat& points);

/// D_F(z, z') for F(x) = x^T Q^{-1} x, evaluated term by term.
double bregman_divergence(const SpdFactor& f, const Eigen::Ref<const Vec>& z,
                          const Eigen::Ref<const Vec>& z_prime);

}  // namespace fewshot
