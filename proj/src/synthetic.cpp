#include <cmath>
#include <cstdio>
#include <random>

#include "fewshot/dataset.hpp"
#include "fewshot/error.hpp"

namespace fewshot {

void SyntheticSpec::validate() const {
  if (n_classes < 1 || dim < 1 || per_class < 1) {
    throw Error(ErrorCode::InvalidSpec, "synthetic counts must be >= 1");
  }
  for (double s : {mean_scale, shared_scale, perturbation}) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw Error(ErrorCode::InvalidSpec, "synthetic scales must be finite and >= 0");
    }
  }
}

SyntheticDataset generate_synthetic_with_moments(const SyntheticSpec& spec) {
  spec.validate();
  const int d = spec.dim;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto gaussian = [&](Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
  };

  // Half Wishart, half identity: E[Sigma0] = I and eigenvalues bounded below by 1/2.
  Mat a(d, d);
  for (int j = 0; j < d; ++j) a.col(j) = gaussian(d);
  Mat shared = a * a.transpose() / (2.0 * d);
  shared = 0.5 * (shared + shared.transpose()).eval();
  shared.diagonal().array() += 0.5;

  std::vector<EmbeddingClass> classes;
  std::vector<Vec> means;
  std::vector<Mat> covariances;
  for (int c = 0; c < spec.n_classes; ++c) {
    Vec mu = spec.mean_scale * gaussian(d);
    Mat cov = spec.shared_scale * shared;
    for (int i = 0; i < d; ++i) cov(i, i) += spec.perturbation * unit(rng);

    Mat lower = Mat::Zero(d, d);
    if (!cov.isZero(0.0)) lower = spd_factorize(cov).lower();

    Mat rows(d, spec.per_class);
    for (int i = 0; i < spec.per_class; ++i) rows.col(i) = mu + lower * gaussian(d);

    char name[32];
    std::snprintf(name, sizeof name, "class_%04d", c);
    classes.push_back({name, std::move(rows)});
    means.push_back(std::move(mu));
    covariances.push_back(std::move(cov));
  }
  return {EmbeddingDataset(std::move(classes), d), std::move(means), std::move(covariances)};
}

EmbeddingDataset generate_synthetic(const SyntheticSpec& spec) {
  return generate_synthetic_with_moments(spec).data;
}

}  // namespace fewshot
