#include "fewshot/refinement.hpp"

#include <cmath>
#include <string>

#include "fewshot/error.hpp"

namespace fewshot {

void RefineConfig::validate() const {
  if (min_steps < 0) throw Error(ErrorCode::InvalidConfig, "min_steps must be >= 0");
  if (max_steps < 1) throw Error(ErrorCode::InvalidConfig, "max_steps must be >= 1");
  if (max_steps < min_steps) {
    throw Error(ErrorCode::InvalidConfig, "max_steps " + std::to_string(max_steps) +
                                              " < min_steps " + std::to_string(min_steps));
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidConfig, "beta must be finite and >= 0");
  }
  rule.validate();
}

std::vector<int> argmax_rows(const Mat& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index j = 0; j < probs.rows(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      if (probs(j, k) > probs(j, best)) best = k;
    }
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

RefineTrace refine(const Task& task, const RefineConfig& cfg) {
  cfg.validate();

  Estimate est = estimate_unweighted(task, cfg.beta);
  Responsibilities resp(task, classify_all(cfg.rule, est.classes, task.query()));
  RefineTrace trace{1, {argmax_rows(resp.query_block())}, false, resp, std::move(est.classes)};

  // Nothing unlabelled to refine with.
  if (task.query_size() == 0) return trace;

  for (int iter = 2; iter <= cfg.max_steps; ++iter) {
    Estimate next;
    try {
      next = estimate_weighted(task, trace.final_resp, cfg.beta);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateClass) throw;
      trace.converged_early = false;
      return trace;
    }
    Responsibilities next_resp(task, classify_all(cfg.rule, next.classes, task.query()));
    std::vector<int> labels = argmax_rows(next_resp.query_block());
    const bool unchanged = labels == trace.labels.back();

    trace.iterations_run = iter;
    trace.labels.push_back(std::move(labels));
    trace.final_resp = std::move(next_resp);
    trace.final_params = std::move(next.classes);

    if (iter >= cfg.min_steps && unchanged) {
      trace.converged_early = iter < cfg.max_steps;
      return trace;
    }
  }
  return trace;
}

std::vector<int> classify_task(const Task& task, const RefineConfig& cfg) {
  return argmax_rows(refine(task, cfg).query_probabilities());
}

}  // namespace fewshot
