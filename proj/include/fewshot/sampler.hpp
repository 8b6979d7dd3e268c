#pragma once

#include <cstdint>
#include <random>
#include <variant>

#include "fewshot/dataset.hpp"
#include "fewshot/task.hpp"

namespace fewshot {

/// Variable way / variable shot episodes.
struct VariableSamplerConfig {
  int way_min = 5;
  int way_max = 50;
  int shot_min = 1;
  int shot_max = 100;
  int query_per_class = 10;
  int support_cap = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fixed K-way L-shot episodes.
struct FixedSamplerConfig {
  int way = 5;
  int shot = 1;
  int query_per_class = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

using SamplerConfig = std::variant<VariableSamplerConfig, FixedSamplerConfig>;

/// Independent generator for episode `index` of the stream keyed by `seed`.
std::mt19937_64 episode_rng(std::uint64_t seed, std::uint64_t index);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

Episode sample_variable(const EmbeddingDataset& ds, const VariableSamplerConfig& cfg,
                        std::uint64_t index);
Episode sample_fixed(const EmbeddingDataset& ds, const FixedSamplerConfig& cfg,
                     std::uint64_t index);
Episode sample_episode(const EmbeddingDataset& ds, const SamplerConfig& cfg, std::uint64_t index);

/// Restartable view over the episodes of one sampler configuration.
class EpisodeStream {
 public:
  EpisodeStream(const EmbeddingDataset& ds, SamplerConfig cfg) : ds_(&ds), cfg_(std::move(cfg)) {}

  Episode next() { return at(counter_++); }
  Episode at(std::uint64_t index) const { return sample_episode(*ds_, cfg_, index); }
  void seek(std::uint64_t index) { counter_ = index; }
  std::uint64_t position() const { return counter_; }

 private:
  const EmbeddingDataset* ds_;
  SamplerConfig cfg_;
  std::uint64_t counter_ = 0;
};

}  // namespace fewshot
