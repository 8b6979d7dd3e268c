#include "fewshot/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// First `count` entries of a uniformly shuffled 0..n-1 (partial Fisher-Yates).
std::vector<int> choose(std::mt19937_64& rng, int n, int count) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) std::swap(idx[i], idx[uniform_int(rng, i, n - 1)]);
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

std::vector<int> permutation(std::mt19937_64& rng, int n) { return choose(rng, n, n); }

// Assembles the episode from per-class (support, query) column picks.
Episode build_episode(const EmbeddingDataset& ds, const std::vector<int>& classes,
                      const std::vector<std::vector<int>>& support_cols,
                      const std::vector<std::vector<int>>& query_cols) {
  const int d = ds.dim();
  std::size_t n = 0, m = 0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    n += support_cols[k].size();
    m += query_cols[k].size();
  }
  Mat support(d, static_cast<Eigen::Index>(n));
  Mat query(d, static_cast<Eigen::Index>(m));
  std::vector<int> labels, truth, shots;
  std::vector<std::string> names;
  std::vector<std::pair<int, int>> support_source, query_source;
  Eigen::Index si = 0, qi = 0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& cls = ds.at(static_cast<std::size_t>(classes[k]));
    for (int c : support_cols[k]) {
      support.col(si++) = cls.rows.col(c);
      labels.push_back(static_cast<int>(k));
      support_source.emplace_back(classes[k], c);
    }
    for (int c : query_cols[k]) {
      query.col(qi++) = cls.rows.col(c);
      truth.push_back(static_cast<int>(k));
      query_source.emplace_back(classes[k], c);
    }
    names.push_back(cls.name);
    shots.push_back(static_cast<int>(support_cols[k].size()));
  }
  Task task(std::move(support), std::move(labels), std::move(query),
            static_cast<int>(classes.size()));
  return Episode{std::move(task),          std::move(truth),          std::move(names),
                 std::move(shots),         std::move(support_source), std::move(query_source)};
}

// Scale shots down to fit the cap: floor of the proportional share, at least
// one per class, then trim the largest classes if the minimum pushed us over.
void fit_to_cap(std::vector<int>& shots, int cap) {
  const long total = std::accumulate(shots.begin(), shots.end(), 0L);
  if (total <= cap) return;
  for (int& s : shots) {
    s = std::max(1, static_cast<int>((static_cast<long>(s) * cap) / total));
  }
  long sum = std::accumulate(shots.begin(), shots.end(), 0L);
  while (sum > cap) {
    auto it = std::max_element(shots.begin(), shots.end());
    if (*it <= 1) break;
    --*it;
    --sum;
  }
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 episode_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(mix64(seed)), static_cast<std::uint32_t>(mix64(seed) >> 32),
                    static_cast<std::uint32_t>(mix64(index ^ 0x5851f42d4c957f2dULL)),
                    static_cast<std::uint32_t>(mix64(index ^ 0x5851f42d4c957f2dULL) >> 32)};
  return std::mt19937_64(seq);
}

void VariableSamplerConfig::validate() const {
  if (way_min < 1 || way_max < way_min) {
    throw Error(ErrorCode::InvalidConfig, "need 1 <= way_min <= way_max");
  }
  if (shot_min < 1 || shot_max < shot_min) {
    throw Error(ErrorCode::InvalidConfig, "need 1 <= shot_min <= shot_max");
  }
  if (query_per_class < 1 || support_cap < 1) {
    throw Error(ErrorCode::InvalidConfig, "query_per_class and support_cap must be positive");
  }
  if (support_cap < way_max) {
    throw Error(ErrorCode::InvalidConfig, "support_cap must allow one example per class");
  }
}

void FixedSamplerConfig::validate() const {
  if (way < 2) throw Error(ErrorCode::InvalidConfig, "fixed sampler needs way >= 2");
  if (shot < 1) throw Error(ErrorCode::InvalidConfig, "fixed sampler needs shot >= 1");
  if (query_per_class < 0) throw Error(ErrorCode::InvalidConfig, "query_per_class must be >= 0");
}

Episode sample_variable(const EmbeddingDataset& ds, const VariableSamplerConfig& cfg,
                        std::uint64_t index) {
  cfg.validate();
  const int available_classes = static_cast<int>(ds.num_classes());
  if (available_classes < cfg.way_min) {
    throw Error(ErrorCode::InsufficientClasses, std::to_string(available_classes) +
                                                    " classes, need " + std::to_string(cfg.way_min));
  }
  auto rng = episode_rng(cfg.seed, index);
  const int way = uniform_int(rng, cfg.way_min, std::min(cfg.way_max, available_classes));
  const std::vector<int> classes = choose(rng, available_classes, way);

  std::vector<std::vector<int>> support_cols(classes.size()), query_cols(classes.size());
  std::vector<std::vector<int>> remaining(classes.size());
  std::vector<int> shots(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& cls = ds.at(static_cast<std::size_t>(classes[k]));
    const int count = static_cast<int>(cls.rows.cols());
    if (count < 2) {
      throw Error(ErrorCode::InsufficientExamples,
                  "class '" + cls.name + "' needs at least 2 examples for a query and a support");
    }
    std::vector<int> order = permutation(rng, count);
    const int q = std::min(cfg.query_per_class, count - 1);
    query_cols[k].assign(order.begin(), order.begin() + q);
    remaining[k].assign(order.begin() + q, order.end());
    const int left = count - q;
    shots[k] = uniform_int(rng, std::min(cfg.shot_min, left), std::min(cfg.shot_max, left));
  }
  fit_to_cap(shots, cfg.support_cap);
  for (std::size_t k = 0; k < classes.size(); ++k) {
    support_cols[k].assign(remaining[k].begin(), remaining[k].begin() + shots[k]);
  }
  return build_episode(ds, classes, support_cols, query_cols);
}

Episode sample_fixed(const EmbeddingDataset& ds, const FixedSamplerConfig& cfg,
                     std::uint64_t index) {
  cfg.validate();
  const int available_classes = static_cast<int>(ds.num_classes());
  if (available_classes < cfg.way) {
    throw Error(ErrorCode::InsufficientClasses, std::to_string(available_classes) +
                                                    " classes, need " + std::to_string(cfg.way));
  }
  auto rng = episode_rng(cfg.seed, index);
  const std::vector<int> classes = choose(rng, available_classes, cfg.way);

  std::vector<std::vector<int>> support_cols(classes.size()), query_cols(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& cls = ds.at(static_cast<std::size_t>(classes[k]));
    const int count = static_cast<int>(cls.rows.cols());
    if (count < cfg.shot + cfg.query_per_class) {
      throw Error(ErrorCode::InsufficientExamples,
                  "class '" + cls.name + "' has " + std::to_string(count) + " examples, need " +
                      std::to_string(cfg.shot + cfg.query_per_class));
    }
    const std::vector<int> order = permutation(rng, count);
    support_cols[k].assign(order.begin(), order.begin() + cfg.shot);
    query_cols[k].assign(order.begin() + cfg.shot,
                         order.begin() + cfg.shot + cfg.query_per_class);
  }
  return build_episode(ds, classes, support_cols, query_cols);
}

Episode sample_episode(const EmbeddingDataset& ds, const SamplerConfig& cfg, std::uint64_t index) {
  return std::visit(
      [&](const auto& c) -> Episode {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, VariableSamplerConfig>) {
          return sample_variable(ds, c, index);
        } else {
          return sample_fixed(ds, c, index);
        }
      },
      cfg);
}

}  // namespace fewshot
