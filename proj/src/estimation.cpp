#include "fewshot/estimation.hpp"

#include <cmath>
#include <string>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidConfig, "beta must be finite and >= 0");
  }
}

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

ClassParams shrink(Vec mu, Mat class_sigma, const Mat& task_sigma, double count, double beta) {
  ClassParams p;
  p.mu = std::move(mu);
  p.count = count;
  p.lambda = count / (count + 1.0);
  p.q = p.lambda * class_sigma + (1.0 - p.lambda) * task_sigma;
  p.q.diagonal().array() += beta;
  p.q = symmetrized(p.q);
  p.sigma = std::move(class_sigma);
  p.q_factor = spd_factorize(p.q);
  return p;
}

}  // namespace

Responsibilities::Responsibilities(const Task& task, Mat query_probs)
    : w_(Mat::Zero(task.support_size() + query_probs.rows(), task.num_classes())),
      n_support_(task.support_size()) {
  if (query_probs.rows() != task.query_size() ||
      (query_probs.rows() > 0 && query_probs.cols() != task.num_classes())) {
    throw Error(ErrorCode::DimensionMismatch, "responsibilities must be m x K");
  }
  for (int i = 0; i < n_support_; ++i) w_(i, task.labels()[i]) = 1.0;
  for (Eigen::Index j = 0; j < query_probs.rows(); ++j) {
    const auto row = query_probs.row(j);
    if (!row.allFinite() || (row.array() < 0.0).any() || (row.array() > 1.0).any() ||
        std::abs(row.sum() - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidConfig,
                  "query responsibility row " + std::to_string(j) + " is not a distribution");
    }
    w_.row(n_support_ + j) = row;
  }
}

Estimate estimate_unweighted(const Task& task, double beta) {
  check_beta(beta);
  const Mat& z = task.support();
  const auto& labels = task.labels();
  const int d = task.dim();
  const int n = task.support_size();
  const int num_classes = task.num_classes();

  Estimate out;
  out.task.mu = z.rowwise().sum() / static_cast<double>(n);
  const Mat centered = z.colwise() - out.task.mu;
  out.task.sigma = symmetrized(centered * centered.transpose() / static_cast<double>(n));

  std::vector<Vec> means(num_classes, Vec::Zero(d));
  for (int i = 0; i < n; ++i) means[labels[i]] += z.col(i);
  for (int k = 0; k < num_classes; ++k) means[k] /= static_cast<double>(task.class_counts()[k]);

  std::vector<Mat> covs(num_classes, Mat::Zero(d, d));
  for (int i = 0; i < n; ++i) {
    const Vec diff = z.col(i) - means[labels[i]];
    covs[labels[i]].noalias() += diff * diff.transpose();
  }

  out.classes.reserve(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    const double n_k = task.class_counts()[k];
    out.classes.push_back(shrink(std::move(means[k]), symmetrized(covs[k] / n_k),
                                 out.task.sigma, n_k, beta));
  }
  return out;
}

Estimate estimate_from_weights(const Mat& points, const Mat& weights, double beta) {
  check_beta(beta);
  if (points.cols() != weights.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "one weight row per point required");
  }
  const int num_classes = static_cast<int>(weights.cols());
  const Eigen::VectorXd counts = weights.colwise().sum().transpose();
  for (int k = 0; k < num_classes; ++k) {
    if (!(counts(k) >= kMinClassCount)) {
      throw Error(ErrorCode::DegenerateClass,
                  "class " + std::to_string(k) + " soft count " + std::to_string(counts(k)));
    }
  }

  // Task-level statistics weight each point by its total mass sum_k w_jk.
  const Eigen::VectorXd mass = weights.rowwise().sum();
  const double total = counts.sum();

  Estimate out;
  out.task.mu = points * mass / total;
  const Mat centered = points.colwise() - out.task.mu;
  out.task.sigma = symmetrized(centered * mass.asDiagonal() * centered.transpose() / total);

  out.classes.reserve(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    const auto w = weights.col(k);
    Vec mu = points * w / counts(k);
    const Mat ck = points.colwise() - mu;
    Mat sigma_k = symmetrized(ck * w.asDiagonal() * ck.transpose() / counts(k));
    out.classes.push_back(shrink(std::move(mu), std::move(sigma_k), out.task.sigma, counts(k), beta));
  }
  return out;
}

Estimate estimate_weighted(const Task& task, const Responsibilities& resp, double beta) {
  if (resp.support_rows() != task.support_size() || resp.query_rows() != task.query_size() ||
      resp.num_classes() != task.num_classes()) {
    throw Error(ErrorCode::DimensionMismatch, "responsibilities do not match task shape");
  }
  Mat points(task.dim(), task.support_size() + task.query_size());
  points << task.support(), task.query();
  return estimate_from_weights(points, resp.weights(), beta);
}

TaskEmbedding pool_task_embedding(const Task& task) {
  if (task.query_size() == 0) throw Error(ErrorCode::EmptyQuery, "query set is empty");
  const int d = task.dim();
  std::vector<Vec> sums(task.num_classes(), Vec::Zero(d));
  for (int i = 0; i < task.support_size(); ++i) sums[task.labels()[i]] += task.support().col(i);

  TaskEmbedding e;
  e.e_s = Vec::Zero(d);
  for (int k = 0; k < task.num_classes(); ++k) {
    e.e_s += sums[k] / static_cast<double>(task.class_counts()[k]);
  }
  e.e_s /= static_cast<double>(task.num_classes());
  e.e_q = task.query().rowwise().sum() / static_cast<double>(task.query_size());
  return e;
}

}  // namespace fewshot
