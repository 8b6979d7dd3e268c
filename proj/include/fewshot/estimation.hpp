#pragma once

#include <vector>

#include "fewshot/numerics.hpp"
#include "fewshot/task.hpp"

namespace fewshot {

/// Soft counts below this are treated as a collapsed class.
inline constexpr double kMinClassCount = 1e-8;

struct ClassParams {
  Vec mu;          // class mean
  Mat sigma;       // class covariance before shrinkage
  Mat q;           // lambda * sigma + (1 - lambda) * task sigma + beta * I
  SpdFactor q_factor;
  double count = 0.0;  // n_k, or the soft count sum_j w_jk
  double lambda = 0.0; // count / (count + 1)
};

struct TaskStats {
  Vec mu;
  Mat sigma;
};

struct Estimate {
  std::vector<ClassParams> classes;
  TaskStats task;
};

/// Row-stochastic class weights over the support rows followed by the query
/// rows. Support rows are always one-hot on their label.
class Responsibilities {
 public:
  enum class RowKind { Support, Query };

  /// Support rows one-hot; `query_probs` is m x K (may have zero rows).
  Responsibilities(const Task& task, Mat query_probs);

  const Mat& weights() const { return w_; }
  int support_rows() const { return n_support_; }
  int query_rows() const { return static_cast<int>(w_.rows()) - n_support_; }
  int num_classes() const { return static_cast<int>(w_.cols()); }
  RowKind row_kind(int row) const { return row < n_support_ ? RowKind::Support : RowKind::Query; }
  auto query_block() const { return w_.bottomRows(query_rows()); }

 private:
  Mat w_;
  int n_support_;
};

/// Support-only estimate: per-class means, covariances with divisor n_k, task
/// covariance with divisor n, shrinkage lambda_k = n_k / (n_k + 1).
Estimate estimate_unweighted(const Task& task, double beta);

/// Responsibility-weighted estimate over support and query together.
/// Throws DegenerateClass when a soft count falls below kMinClassCount.
Estimate estimate_weighted(const Task& task, const Responsibilities& resp, double beta);

/// Core of estimate_weighted over arbitrary points (d x N) and weights (N x K).
/// Weights are not required to be one-hot or row-stochastic here.
Estimate estimate_from_weights(const Mat& points, const Mat& weights, double beta);

struct TaskEmbedding {
  Vec e_s;  // class-balanced support mean
  Vec e_q;  // query mean
};

/// Pooled support and query statistics. Throws EmptyQuery when m = 0.
TaskEmbedding pool_task_embedding(const Task& task);

}  // namespace fewshot
