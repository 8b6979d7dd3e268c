#include "fewshot/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

struct ClassOutcome {
  int shot = 0;
  int queries = 0;
  int correct = 0;
};

struct EpisodeOutcome {
  double accuracy = 0.0;
  int iterations = 0;
  bool converged_early = false;
  std::vector<ClassOutcome> classes;
  std::exception_ptr error;
};

EpisodeOutcome run_episode(const EmbeddingDataset& ds, const SamplerConfig& sampler,
                           const RefineConfig& refine_cfg, std::uint64_t index) {
  EpisodeOutcome out;
  const Episode ep = sample_episode(ds, sampler, index);
  if (ep.task.query_size() == 0) throw Error(ErrorCode::EmptyQuery, "episode has no queries");

  const RefineTrace trace = refine(ep.task, refine_cfg);
  const std::vector<int> predicted = argmax_rows(trace.query_probabilities());
  out.iterations = trace.iterations_run;
  out.converged_early = trace.converged_early;
  out.classes.resize(static_cast<std::size_t>(ep.task.num_classes()));
  for (std::size_t k = 0; k < out.classes.size(); ++k) out.classes[k].shot = ep.shots[k];

  int correct = 0;
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    auto& cls = out.classes[static_cast<std::size_t>(ep.truth[j])];
    ++cls.queries;
    if (predicted[j] == ep.truth[j]) {
      ++correct;
      ++cls.correct;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
  return out;
}

std::string method_label(const RefineConfig& cfg) {
  if (cfg.max_steps == 1) return "baseline/" + cfg.rule.name();
  return "transductive/" + cfg.rule.name() + "/min" + std::to_string(cfg.min_steps) + "-max" +
         std::to_string(cfg.max_steps);
}

void check_steps(const std::vector<int>& mins, const std::vector<int>& maxes) {
  for (int v : mins) {
    if (v < 0) throw Error(ErrorCode::InvalidConfig, "min_steps axis values must be >= 0");
  }
  for (int v : maxes) {
    if (v < 1) throw Error(ErrorCode::InvalidConfig, "max_steps axis values must be >= 1");
  }
}

SamplerConfig with_seed(SamplerConfig cfg, std::uint64_t seed) {
  std::visit([&](auto& c) { c.seed = seed; }, cfg);
  return cfg;
}

SamplerConfig with_query(SamplerConfig cfg, int query_per_class) {
  std::visit([&](auto& c) { c.query_per_class = query_per_class; }, cfg);
  return cfg;
}

int query_of(const SamplerConfig& cfg) {
  return std::visit([](const auto& c) { return c.query_per_class; }, cfg);
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string ShotBinning::bin_for(int shot) const {
  if (shot <= max_individual) return std::to_string(shot);
  return ">" + std::to_string(max_individual);
}

std::vector<std::string> ShotBinning::labels() const {
  std::vector<std::string> out;
  for (int s = 1; s <= max_individual; ++s) out.push_back(std::to_string(s));
  out.push_back(">" + std::to_string(max_individual));
  return out;
}

std::pair<double, double> mean_ci95(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

EvalReport evaluate(const EmbeddingDataset& ds, const SamplerConfig& sampler,
                    const RefineConfig& refine_cfg, const EvalOptions& opts) {
  if (opts.episodes < 1) throw Error(ErrorCode::InvalidConfig, "episodes must be >= 1");
  if (opts.parallelism < 1) throw Error(ErrorCode::InvalidConfig, "parallelism must be >= 1");
  refine_cfg.validate();
  const SamplerConfig seeded = with_seed(sampler, opts.seed);
  std::visit([](const auto& c) { c.validate(); }, seeded);

  // Index-addressed slots; the reduction below walks them in order.
  std::vector<EpisodeOutcome> slots(static_cast<std::size_t>(opts.episodes));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < opts.episodes; i = next++) {
      auto& slot = slots[static_cast<std::size_t>(i)];
      try {
        slot = run_episode(ds, seeded, refine_cfg, static_cast<std::uint64_t>(i));
      } catch (...) {
        slot.error = std::current_exception();
      }
    }
  };
  {
    const int width = static_cast<int>(std::min<long>(opts.parallelism, opts.episodes));
    std::vector<std::jthread> pool;
    for (int t = 1; t < width; ++t) pool.emplace_back(worker);
    worker();
  }

  EvalReport report;
  report.method = method_label(refine_cfg);
  report.episodes = opts.episodes;
  std::map<std::string, double> recall_sums;
  long early = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& slot = slots[i];
    if (slot.error) {
      try {
        std::rethrow_exception(slot.error);
      } catch (const Error& e) {
        throw Error(e.code(), "episode " + std::to_string(i) + ": " + e.what());
      }
    }
    report.episode_accuracy.push_back(slot.accuracy);
    ++report.iteration_histogram[slot.iterations];
    if (slot.converged_early) ++early;
    for (const auto& cls : slot.classes) {
      report.query_predictions += cls.queries;
      if (cls.queries == 0) continue;
      const std::string bin = opts.binning.bin_for(cls.shot);
      auto& rb = report.shot_recall[bin];
      recall_sums[bin] += static_cast<double>(cls.correct) / static_cast<double>(cls.queries);
      ++rb.count;
      rb.queries += cls.queries;
    }
  }
  for (auto& [bin, rb] : report.shot_recall) rb.recall = recall_sums[bin] / static_cast<double>(rb.count);
  std::tie(report.mean_accuracy, report.ci95) = mean_ci95(report.episode_accuracy);
  report.early_convergence_rate = static_cast<double>(early) / static_cast<double>(opts.episodes);

  report.config = nlohmann::ordered_json::object();
  report.config["sampler"] = sampler_to_json(seeded);
  report.config["refine"] = refine_to_json(refine_cfg);
  report.config["episodes"] = opts.episodes;
  report.config["seed"] = opts.seed;
  report.config["shot_bin_max"] = opts.binning.max_individual;
  return report;
}

EvalReport merge_reports(const std::vector<EvalReport>& parts) {
  if (parts.empty()) throw Error(ErrorCode::EmptyInput, "nothing to merge");
  if (parts.size() == 1) return parts.front();

  EvalReport out;
  out.method = parts.front().method;
  out.config = parts.front().config;
  double early = 0.0;
  std::map<std::string, double> recall_sums;
  for (const auto& p : parts) {
    out.episodes += p.episodes;
    out.episode_accuracy.insert(out.episode_accuracy.end(), p.episode_accuracy.begin(),
                                p.episode_accuracy.end());
    for (const auto& [iters, n] : p.iteration_histogram) out.iteration_histogram[iters] += n;
    for (const auto& [bin, rb] : p.shot_recall) {
      auto& dst = out.shot_recall[bin];
      dst.count += rb.count;
      dst.queries += rb.queries;
      recall_sums[bin] += rb.recall * static_cast<double>(rb.count);
    }
    early += p.early_convergence_rate * static_cast<double>(p.episodes);
    out.query_predictions += p.query_predictions;
  }
  for (auto& [bin, rb] : out.shot_recall) rb.recall = recall_sums[bin] / static_cast<double>(rb.count);
  std::tie(out.mean_accuracy, out.ci95) = mean_ci95(out.episode_accuracy);
  out.early_convergence_rate = early / static_cast<double>(out.episodes);
  return out;
}

std::uint64_t repeat_seed(std::uint64_t base, int repeat) {
  return repeat == 0 ? base : mix64(base ^ mix64(static_cast<std::uint64_t>(repeat)));
}

AblationGrid run_ablation(const EmbeddingDataset& ds, const AblationSpec& spec) {
  check_steps(spec.min_steps, spec.max_steps);
  if (spec.repeats < 1) throw Error(ErrorCode::InvalidConfig, "repeats must be >= 1");
  for (int q : spec.query_per_class) {
    if (q < 1) throw Error(ErrorCode::InvalidConfig, "query_per_class axis values must be >= 1");
  }
  std::vector<AssignmentRule> rules;
  for (const auto& name : spec.rules) rules.push_back(AssignmentRule::parse(name));
  const std::vector<int> queries =
      spec.query_per_class.empty() ? std::vector<int>{query_of(spec.sampler)} : spec.query_per_class;

  AblationGrid grid;
  grid.spec = spec;
  for (int lo : spec.min_steps) {
    for (int hi : spec.max_steps) {
      for (const auto& rule : rules) {
        for (int q : queries) {
          RefineConfig cfg{std::min(lo, hi), hi, rule, spec.beta};
          const SamplerConfig sampler = with_query(spec.sampler, q);
          std::vector<EvalReport> parts;
          for (int r = 0; r < spec.repeats; ++r) {
            EvalOptions opts{spec.episodes, repeat_seed(spec.seed, r), spec.parallelism, spec.binning};
            parts.push_back(evaluate(ds, sampler, cfg, opts));
          }
          EvalReport merged = merge_reports(parts);
          if (spec.repeats > 1) merged.config["repeats"] = spec.repeats;
          grid.cells.push_back({lo, hi, rule.name(), q, std::move(merged)});
        }
      }
    }
  }
  return grid;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  throw Error(ErrorCode::InvalidConfig, "unknown report format '" + name + "'");
}

nlohmann::ordered_json sampler_to_json(const SamplerConfig& cfg) {
  nlohmann::ordered_json j;
  if (const auto* v = std::get_if<VariableSamplerConfig>(&cfg)) {
    j["kind"] = "variable";
    j["way_min"] = v->way_min;
    j["way_max"] = v->way_max;
    j["shot_min"] = v->shot_min;
    j["shot_max"] = v->shot_max;
    j["query_per_class"] = v->query_per_class;
    j["support_cap"] = v->support_cap;
    j["seed"] = v->seed;
  } else {
    const auto& f = std::get<FixedSamplerConfig>(cfg);
    j["kind"] = "fixed";
    j["way"] = f.way;
    j["shot"] = f.shot;
    j["query_per_class"] = f.query_per_class;
    j["seed"] = f.seed;
  }
  return j;
}

nlohmann::ordered_json refine_to_json(const RefineConfig& cfg) {
  nlohmann::ordered_json j;
  j["min_steps"] = cfg.min_steps;
  j["max_steps"] = cfg.max_steps;
  j["rule"] = cfg.rule.name();
  if (!cfg.rule.prior.empty()) j["prior"] = cfg.rule.prior;
  j["beta"] = cfg.beta;
  return j;
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["method"] = report.method;
  j["episodes"] = report.episodes;
  j["mean_accuracy"] = report.mean_accuracy;
  j["ci95"] = report.ci95;
  j["early_convergence_rate"] = report.early_convergence_rate;
  j["query_predictions"] = report.query_predictions;
  auto& bins = j["shot_recall"] = nlohmann::ordered_json::object();
  // Numeric bins in shot order, then the overflow bin.
  std::vector<std::pair<std::string, RecallBin>> ordered(report.shot_recall.begin(),
                                                         report.shot_recall.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    const bool ao = a.first.starts_with(">"), bo = b.first.starts_with(">");
    if (ao != bo) return bo;
    if (ao) return a.first < b.first;
    return std::stoi(a.first) < std::stoi(b.first);
  });
  for (const auto& [bin, rb] : ordered) {
    bins[bin] = {{"recall", rb.recall}, {"count", rb.count}, {"queries", rb.queries}};
  }
  auto& hist = j["iteration_histogram"] = nlohmann::ordered_json::object();
  for (const auto& [iters, n] : report.iteration_histogram) hist[std::to_string(iters)] = n;
  j["episode_accuracy"] = report.episode_accuracy;
  j["config"] = report.config;
  return j;
}

EvalReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.episodes = j.at("episodes").get<long>();
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    r.ci95 = j.at("ci95").get<double>();
    r.early_convergence_rate = j.at("early_convergence_rate").get<double>();
    r.query_predictions = j.at("query_predictions").get<long>();
    for (const auto& [bin, v] : j.at("shot_recall").items()) {
      r.shot_recall[bin] = {v.at("recall").get<double>(), v.at("count").get<long>(),
                            v.at("queries").get<long>()};
    }
    for (const auto& [iters, n] : j.at("iteration_histogram").items()) {
      r.iteration_histogram[std::stoi(iters)] = n.get<long>();
    }
    r.episode_accuracy = j.at("episode_accuracy").get<std::vector<double>>();
    r.config = j.at("config");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report json: ") + e.what());
  }
}

nlohmann::ordered_json grid_to_json(const AblationGrid& grid) {
  const auto& s = grid.spec;
  nlohmann::ordered_json j;
  j["axes"] = {{"min_steps", s.min_steps},
               {"max_steps", s.max_steps},
               {"rule", s.rules},
               {"query_per_class", s.query_per_class}};
  j["sampler"] = sampler_to_json(s.sampler);
  j["beta"] = s.beta;
  j["episodes"] = s.episodes;
  j["seed"] = s.seed;
  j["repeats"] = s.repeats;
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : grid.cells) {
    nlohmann::ordered_json cell;
    cell["min_steps"] = c.min_steps;
    cell["max_steps"] = c.max_steps;
    cell["rule"] = c.rule;
    cell["query_per_class"] = c.query_per_class;
    cell["report"] = report_to_json(c.report);
    cells.push_back(std::move(cell));
  }
  return j;
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) return report_to_json(report).dump(2) + "\n";
  std::string out = "section,key,value,count\n";
  out += "summary,episodes," + std::to_string(report.episodes) + ",\n";
  out += "summary,mean_accuracy," + format_real(report.mean_accuracy) + ",\n";
  out += "summary,ci95," + format_real(report.ci95) + ",\n";
  out += "summary,early_convergence_rate," + format_real(report.early_convergence_rate) + ",\n";
  for (const auto& bin : ShotBinning{report.config.value("shot_bin_max", 10)}.labels()) {
    auto it = report.shot_recall.find(bin);
    if (it == report.shot_recall.end()) continue;
    out += "shot_recall," + bin + "," + format_real(it->second.recall) + "," +
           std::to_string(it->second.count) + "\n";
  }
  for (const auto& [iters, n] : report.iteration_histogram) {
    out += "iterations," + std::to_string(iters) + "," + std::to_string(n) + ",\n";
  }
  for (std::size_t i = 0; i < report.episode_accuracy.size(); ++i) {
    out += "episode," + std::to_string(i) + "," + format_real(report.episode_accuracy[i]) + ",\n";
  }
  return out;
}

std::string render_grid(const AblationGrid& grid, ReportFormat format) {
  if (format == ReportFormat::Json) return grid_to_json(grid).dump(2) + "\n";
  std::string out = "min_steps,max_steps,rule,query_per_class,mean_acc,ci95,episodes\n";
  for (const auto& c : grid.cells) {
    out += std::to_string(c.min_steps) + "," + std::to_string(c.max_steps) + "," + c.rule + "," +
           std::to_string(c.query_per_class) + "," + format_real(c.report.mean_accuracy) + "," +
           format_real(c.report.ci95) + "," + std::to_string(c.report.episodes) + "\n";
  }
  return out;
}

void emit_text(const std::string& text, const std::filesystem::path& path) {
  if (path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  emit_text(render_report(report, format), path);
}

void emit_report(const AblationGrid& grid, ReportFormat format, const std::filesystem::path& path) {
  emit_text(render_grid(grid, format), path);
}

}  // namespace fewshot
