#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fewshot/numerics.hpp"

namespace fewshot {

struct LabeledEmbedding {
  Vec z;
  int y = 0;
};

/// Classifier-visible part of an episode: labelled support embeddings and
/// unlabelled query embeddings. Embeddings are stored as columns.
///
/// Construction enforces: K >= 1, every class 0..K-1 present in support,
/// uniform dimension, finite entries. An empty query set is allowed.
class Task {
 public:
  Task(Mat support, std::vector<int> labels, Mat query, int num_classes);

  static Task from_points(const std::vector<LabeledEmbedding>& support,
                          const std::vector<Vec>& query, int num_classes);

  int dim() const { return static_cast<int>(support_.rows()); }
  int num_classes() const { return num_classes_; }
  int support_size() const { return static_cast<int>(support_.cols()); }
  int query_size() const { return static_cast<int>(query_.cols()); }

  const Mat& support() const { return support_; }
  const std::vector<int>& labels() const { return labels_; }
  const Mat& query() const { return query_; }
  const std::vector<int>& class_counts() const { return counts_; }

 private:
  Mat support_;
  std::vector<int> labels_;
  Mat query_;
  int num_classes_;
  std::vector<int> counts_;
};

/// A sampled task plus everything the classifier must not see.
struct Episode {
  Task task;
  std::vector<int> truth;               // aligned with task.query() columns
  std::vector<std::string> class_names; // task-local id -> global class name
  std::vector<int> shots;               // task-local id -> support count
  // Dataset (class, column) of every support / query embedding, in task order.
  std::vector<std::pair<int, int>> support_source;
  std::vector<std::pair<int, int>> query_source;
};

}  // namespace fewshot
