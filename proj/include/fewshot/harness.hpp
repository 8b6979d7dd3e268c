#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/refinement.hpp"
#include "fewshot/sampler.hpp"

namespace fewshot {

/// Shot bins for class recall: one bin per shot up to `max_individual`, then
/// a single ">max_individual" bin.
struct ShotBinning {
  int max_individual = 10;
  std::string bin_for(int shot) const;
  std::vector<std::string> labels() const;
};

struct RecallBin {
  double recall = 0.0;  // mean per-class recall in this bin
  long count = 0;       // number of (episode, class) entries
  long queries = 0;     // query predictions behind those entries
};

struct EvalReport {
  std::string method;
  long episodes = 0;
  std::vector<double> episode_accuracy;
  double mean_accuracy = 0.0;
  double ci95 = 0.0;  // 1.96 * sample stddev / sqrt(episodes), over episodes
  std::map<std::string, RecallBin> shot_recall;
  std::map<int, long> iteration_histogram;
  double early_convergence_rate = 0.0;
  long query_predictions = 0;
  nlohmann::ordered_json config;
};

struct EvalOptions {
  long episodes = 100;
  std::uint64_t seed = 0;
  int parallelism = 1;
  ShotBinning binning;
};

/// Mean and 95% interval half-width of a sample (zero width for one value).
std::pair<double, double> mean_ci95(const std::vector<double>& values);

/// Runs `opts.episodes` episodes (episode i sampled from (opts.seed, i)) and
/// scores classify_task against the held-out truth. Results do not depend on
/// opts.parallelism. A failing episode aborts with its index in the message.
EvalReport evaluate(const EmbeddingDataset& ds, const SamplerConfig& sampler,
                    const RefineConfig& refine_cfg, const EvalOptions& opts);

/// Pools several reports of the same configuration into one.
EvalReport merge_reports(const std::vector<EvalReport>& parts);

struct AblationSpec {
  SamplerConfig sampler;
  double beta = 1.0;
  std::vector<int> min_steps{2};
  std::vector<int> max_steps{4};
  std::vector<std::string> rules{"mahalanobis-softmax"};
  std::vector<int> query_per_class;  // empty: keep the sampler's value
  long episodes = 100;
  std::uint64_t seed = 0;
  int repeats = 5;
  int parallelism = 1;
  ShotBinning binning;
};

struct AblationCell {
  int min_steps = 0;
  int max_steps = 1;
  std::string rule;
  int query_per_class = 0;
  EvalReport report;
};

struct AblationGrid {
  AblationSpec spec;
  std::vector<AblationCell> cells;  // min-major, then max, rule, query_per_class
};

/// Seed of repeat r of an ablation; repeat 0 uses the base seed itself.
std::uint64_t repeat_seed(std::uint64_t base, int repeat);

/// One paired report per axis combination. Cells with min_steps > max_steps
/// run with min_steps clamped to max_steps (the loop cap wins).
AblationGrid run_ablation(const EmbeddingDataset& ds, const AblationSpec& spec);

enum class ReportFormat { Json, Csv };
ReportFormat parse_report_format(const std::string& name);

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json grid_to_json(const AblationGrid& grid);

std::string render_report(const EvalReport& report, ReportFormat format);
std::string render_grid(const AblationGrid& grid, ReportFormat format);

/// Writes the rendered text; "-" means stdout. Throws IoError.
void emit_text(const std::string& text, const std::filesystem::path& path);
void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path);
void emit_report(const AblationGrid& grid, ReportFormat format, const std::filesystem::path& path);

nlohmann::ordered_json sampler_to_json(const SamplerConfig& cfg);
nlohmann::ordered_json refine_to_json(const RefineConfig& cfg);

}  // namespace fewshot
