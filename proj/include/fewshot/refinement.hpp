#pragma once

#include <vector>

#include "fewshot/classification.hpp"

namespace fewshot {

struct RefineConfig {
  int min_steps = 2;
  int max_steps = 4;
  AssignmentRule rule;
  double beta = 1.0;

  void validate() const;
};

struct RefineTrace {
  int iterations_run = 0;
  std::vector<std::vector<int>> labels;  // query argmaxes per iteration
  bool converged_early = false;
  Responsibilities final_resp;
  std::vector<ClassParams> final_params;

  /// m x K class probabilities for the query set.
  Mat query_probabilities() const { return final_resp.query_block(); }
};

/// Transductive soft k-means refinement.
///
/// Iteration 1 estimates class parameters from the support set alone and
/// scores the queries, which is exactly the non-transductive classifier.
/// Every further iteration re-estimates from the current responsibilities
/// over support and query, then re-scores the queries; support rows stay
/// one-hot. The loop stops once at least `min_steps` iterations have run and
/// no query argmax changed, or at `max_steps`. A collapsed soft count stops
/// the loop and keeps the previous iteration's state.
RefineTrace refine(const Task& task, const RefineConfig& cfg);

/// Argmax (lowest index on ties) of the refined query probabilities.
std::vector<int> classify_task(const Task& task, const RefineConfig& cfg);

std::vector<int> argmax_rows(const Mat& probs);

}  // namespace fewshot
