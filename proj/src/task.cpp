#include "fewshot/task.hpp"

#include <string>

#include "fewshot/error.hpp"

namespace fewshot {

Task::Task(Mat support, std::vector<int> labels, Mat query, int num_classes)
    : support_(std::move(support)),
      labels_(std::move(labels)),
      query_(std::move(query)),
      num_classes_(num_classes),
      counts_(num_classes > 0 ? num_classes : 0, 0) {
  if (num_classes_ < 1) throw Error(ErrorCode::InvalidTask, "task needs at least one class");
  if (static_cast<Eigen::Index>(labels_.size()) != support_.cols()) {
    throw Error(ErrorCode::InvalidTask, "label count does not match support size");
  }
  if (support_.rows() < 1) throw Error(ErrorCode::InvalidTask, "zero-dimensional embeddings");
  if (query_.cols() > 0 && query_.rows() != support_.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dimension " + std::to_string(query_.rows()) + " vs support " +
                    std::to_string(support_.rows()));
  }
  if (query_.cols() == 0) query_.resize(support_.rows(), 0);
  if (!support_.allFinite() || !query_.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "task contains non-finite embeddings");
  }
  for (int y : labels_) {
    if (y < 0 || y >= num_classes_) {
      throw Error(ErrorCode::InvalidTask, "label " + std::to_string(y) + " out of range");
    }
    ++counts_[y];
  }
  for (int k = 0; k < num_classes_; ++k) {
    if (counts_[k] == 0) {
      throw Error(ErrorCode::InvalidTask, "class " + std::to_string(k) + " has no support example");
    }
  }
}

Task Task::from_points(const std::vector<LabeledEmbedding>& support,
                       const std::vector<Vec>& query, int num_classes) {
  if (support.empty()) throw Error(ErrorCode::InvalidTask, "empty support set");
  const auto d = support.front().z.size();
  Mat s(d, static_cast<Eigen::Index>(support.size()));
  std::vector<int> labels;
  labels.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].z.size() != d) throw Error(ErrorCode::DimensionMismatch, "support dimension");
    s.col(static_cast<Eigen::Index>(i)) = support[i].z;
    labels.push_back(support[i].y);
  }
  Mat q(d, static_cast<Eigen::Index>(query.size()));
  for (std::size_t i = 0; i < query.size(); ++i) {
    if (query[i].size() != d) throw Error(ErrorCode::DimensionMismatch, "query dimension");
    q.col(static_cast<Eigen::Index>(i)) = query[i];
  }
  return Task(std::move(s), std::move(labels), std::move(q), num_classes);
}

}  // namespace fewshot
