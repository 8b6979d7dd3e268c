// Command-line front end: synthetic data generation, episode dumps,
// evaluation and ablation sweeps.
//
// Exit codes: 0 success, 1 selftest failure, 2 configuration error, 3 data error.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fewshot/error.hpp"
#include "fewshot/harness.hpp"

using namespace fewshot;

namespace {

constexpr int kExitSelftest = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct GlobalOptions {
  std::uint64_t seed = 0;
  double beta = 1.0;
  std::string rule = "mahalanobis-softmax";
  int min_steps = 2;
  int max_steps = 4;
  std::string format = "json";
  std::string out = "-";
  long episodes = 100;
  int parallelism = 1;
};

struct DataOptions {
  std::string path;
  std::string format;  // empty: from extension

  EmbeddingDataset load() const {
    const DatasetFormat f = format.empty() ? format_from_extension(path) : parse_dataset_format(format);
    return load_dataset(path, f);
  }
};

struct SamplerOptions {
  std::string kind = "fixed";
  int way = 5;
  int shot = 1;
  int query = 10;
  int way_min = 5;
  int way_max = 50;
  int shot_min = 1;
  int shot_max = 100;
  int support_cap = 500;

  SamplerConfig build(std::uint64_t seed) const {
    if (kind == "fixed") return FixedSamplerConfig{way, shot, query, seed};
    if (kind == "variable") {
      return VariableSamplerConfig{way_min, way_max, shot_min, shot_max, query, support_cap, seed};
    }
    throw Error(ErrorCode::InvalidConfig, "unknown sampler '" + kind + "'");
  }
};

void add_data_options(CLI::App* cmd, DataOptions& data) {
  cmd->add_option("--data", data.path, "Embedding dataset (.csv or packed binary)")->required();
  cmd->add_option("--data-format", data.format, "csv | bin (default: by extension)");
}

void add_sampler_options(CLI::App* cmd, SamplerOptions& s) {
  cmd->add_option("--sampler", s.kind, "fixed | variable")->capture_default_str();
  cmd->add_option("--way", s.way, "Fixed sampler: classes per episode")->capture_default_str();
  cmd->add_option("--shot", s.shot, "Fixed sampler: support examples per class")->capture_default_str();
  cmd->add_option("--query", s.query, "Query examples per class")->capture_default_str();
  cmd->add_option("--way-min", s.way_min)->capture_default_str();
  cmd->add_option("--way-max", s.way_max)->capture_default_str();
  cmd->add_option("--shot-min", s.shot_min)->capture_default_str();
  cmd->add_option("--shot-max", s.shot_max)->capture_default_str();
  cmd->add_option("--support-cap", s.support_cap)->capture_default_str();
}

RefineConfig refine_config(const GlobalOptions& g) {
  RefineConfig cfg{g.min_steps, g.max_steps, AssignmentRule::parse(g.rule), g.beta};
  cfg.validate();
  return cfg;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string render_episodes(const EmbeddingDataset& ds, const SamplerConfig& sampler, long count,
                            ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::string out = "episode,role,label,class_name";
    for (int f = 1; f <= ds.dim(); ++f) out += ",f" + std::to_string(f);
    out += "\n";
    for (long i = 0; i < count; ++i) {
      const Episode ep = sample_episode(ds, sampler, static_cast<std::uint64_t>(i));
      auto row = [&](const char* role, int label, const Eigen::Ref<const Vec>& z) {
        out += std::to_string(i) + "," + role + "," + std::to_string(label) + "," +
               ep.class_names[static_cast<std::size_t>(label)];
        for (Eigen::Index f = 0; f < z.size(); ++f) out += "," + format_real(z(f));
        out += "\n";
      };
      for (int s = 0; s < ep.task.support_size(); ++s) row("support", ep.task.labels()[s], ep.task.support().col(s));
      for (int q = 0; q < ep.task.query_size(); ++q) row("query", ep.truth[q], ep.task.query().col(q));
    }
    return out;
  }

  nlohmann::ordered_json j;
  j["sampler"] = sampler_to_json(sampler);
  auto& episodes = j["episodes"] = nlohmann::ordered_json::array();
  for (long i = 0; i < count; ++i) {
    const Episode ep = sample_episode(ds, sampler, static_cast<std::uint64_t>(i));
    nlohmann::ordered_json e;
    e["index"] = i;
    e["way"] = ep.task.num_classes();
    e["class_names"] = ep.class_names;
    e["shots"] = ep.shots;
    auto& support = e["support"] = nlohmann::ordered_json::array();
    for (int s = 0; s < ep.task.support_size(); ++s) {
      const Vec z = ep.task.support().col(s);
      support.push_back({{"label", ep.task.labels()[s]}, {"z", std::vector<double>(z.data(), z.data() + z.size())}});
    }
    auto& query = e["query"] = nlohmann::ordered_json::array();
    for (int q = 0; q < ep.task.query_size(); ++q) {
      const Vec z = ep.task.query().col(q);
      query.push_back({{"truth", ep.truth[q]}, {"z", std::vector<double>(z.data(), z.data() + z.size())}});
    }
    episodes.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

// Fast subset of the invariant suite.
int run_selftest(std::uint64_t seed) {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name.c_str());
    if (!ok) ++failures;
  };

  const auto ds = generate_synthetic(SyntheticSpec{10, 6, 1.0, 1.0, 0.2, 30, seed});
  const FixedSamplerConfig sampler{5, 2, 6, seed};

  double worst_reduction = 0.0, worst_empty = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Episode ep = sample_fixed(ds, sampler, i);
    const RefineTrace trace = refine(ep.task, RefineConfig{0, 1, AssignmentRule::mahalanobis(), 1.0});
    const Estimate est = estimate_unweighted(ep.task, 1.0);
    const Mat direct = classify_all(AssignmentRule::mahalanobis(), est.classes, ep.task.query());
    worst_reduction = std::max(worst_reduction, (trace.query_probabilities() - direct).cwiseAbs().maxCoeff());

    const Task no_query(ep.task.support(), ep.task.labels(), Mat(ep.task.dim(), 0), ep.task.num_classes());
    const Estimate w = estimate_weighted(no_query, Responsibilities(no_query, Mat(0, no_query.num_classes())), 1.0);
    const Estimate u = estimate_unweighted(no_query, 1.0);
    for (std::size_t k = 0; k < u.classes.size(); ++k) {
      worst_empty = std::max(worst_empty, (w.classes[k].q - u.classes[k].q).cwiseAbs().maxCoeff());
      worst_empty = std::max(worst_empty, (w.classes[k].mu - u.classes[k].mu).cwiseAbs().maxCoeff());
    }
  }
  check("single iteration equals support-only classifier", worst_reduction <= 1e-12);
  check("empty query weighted == unweighted", worst_empty <= 1e-12);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst_bregman = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int d = 1 + t % 6;
    Mat a(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) a(r, c) = n(rng);
    Mat q = a * a.transpose();
    q.diagonal().array() += 0.1;
    const SpdFactor f = spd_factorize(0.5 * (q + q.transpose()));
    Vec z(d), zp(d);
    for (int r = 0; r < d; ++r) {
      z(r) = n(rng);
      zp(r) = n(rng);
    }
    worst_bregman = std::max(worst_bregman, std::abs(bregman_divergence(f, z, zp) - mahalanobis_sq(f, z, zp)));
  }
  check("bregman divergence equals squared mahalanobis", worst_bregman <= 1e-9);

  const RefineConfig cfg{2, 4, AssignmentRule::mahalanobis(), 1.0};
  const auto r1 = evaluate(ds, sampler, cfg, {20, seed, 1, {}});
  const auto r2 = evaluate(ds, sampler, cfg, {20, seed, 3, {}});
  check("reports independent of parallelism",
        render_report(r1, ReportFormat::Json) == render_report(r2, ReportFormat::Json));

  return failures == 0 ? 0 : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transductive Mahalanobis few-shot classification on embeddings"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Base seed")->capture_default_str();
  app.add_option("--beta", g.beta, "Covariance ridge")->capture_default_str();
  app.add_option("--rule", g.rule, "mahalanobis-softmax | gmm")->capture_default_str();
  app.add_option("--min-steps", g.min_steps, "Minimum refinement iterations")->capture_default_str();
  app.add_option("--max-steps", g.max_steps, "Maximum refinement iterations")->capture_default_str();
  app.add_option("--format", g.format, "Output format: json | csv")->capture_default_str();
  app.add_option("--out", g.out, "Output path, - for stdout")->capture_default_str();
  app.add_option("--episodes", g.episodes, "Number of episodes")->capture_default_str();
  app.add_option("--parallelism", g.parallelism, "Worker threads")->capture_default_str();

  SyntheticSpec syn;
  std::string syn_format;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic Gaussian embedding dataset");
  gen->add_option("--classes", syn.n_classes)->capture_default_str();
  gen->add_option("--dim", syn.dim)->capture_default_str();
  gen->add_option("--mean-scale", syn.mean_scale)->capture_default_str();
  gen->add_option("--shared-scale", syn.shared_scale)->capture_default_str();
  gen->add_option("--perturbation", syn.perturbation)->capture_default_str();
  gen->add_option("--per-class", syn.per_class)->capture_default_str();
  gen->add_option("--data-format", syn_format, "csv | bin (default: by extension of --out)");

  DataOptions data;
  SamplerOptions sampler_opts;
  auto* sample = app.add_subcommand("sample", "Dump sampled episodes");
  add_data_options(sample, data);
  add_sampler_options(sample, sampler_opts);

  int shot_bin_max = 10;
  auto* eval = app.add_subcommand("eval", "Evaluate one method configuration");
  add_data_options(eval, data);
  add_sampler_options(eval, sampler_opts);
  eval->add_option("--shot-bin-max", shot_bin_max, "Last individual shot bin")->capture_default_str();

  std::vector<int> min_list{2}, max_list{4}, query_list;
  std::vector<std::string> rule_list{"mahalanobis-softmax"};
  int repeats = 5;
  auto* ablate = app.add_subcommand("ablate", "Sweep refinement step limits, rules and query counts");
  add_data_options(ablate, data);
  add_sampler_options(ablate, sampler_opts);
  ablate->add_option("--min-list", min_list)->delimiter(',');
  ablate->add_option("--max-list", max_list)->delimiter(',');
  ablate->add_option("--rule-list", rule_list)->delimiter(',');
  ablate->add_option("--query-list", query_list, "Query-per-class axis (default: --query)")->delimiter(',');
  ablate->add_option("--repeats", repeats)->capture_default_str();
  ablate->add_option("--shot-bin-max", shot_bin_max)->capture_default_str();

  auto* selftest = app.add_subcommand("selftest", "Run fast invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*selftest) return run_selftest(g.seed);

    const ReportFormat format = parse_report_format(g.format);
    if (*gen) {
      syn.seed = g.seed;
      if (g.out == "-") throw Error(ErrorCode::InvalidConfig, "gen-synthetic needs --out <file>");
      const DatasetFormat f = syn_format.empty() ? format_from_extension(g.out) : parse_dataset_format(syn_format);
      write_dataset(generate_synthetic(syn), g.out, f);
      return 0;
    }

    const SamplerConfig sampler = sampler_opts.build(g.seed);
    if (*sample) {
      if (g.episodes < 1) throw Error(ErrorCode::InvalidConfig, "--episodes must be >= 1");
      emit_text(render_episodes(data.load(), sampler, g.episodes, format), g.out);
      return 0;
    }
    if (*eval) {
      const RefineConfig cfg = refine_config(g);
      const auto ds = data.load();
      emit_report(evaluate(ds, sampler, cfg, {g.episodes, g.seed, g.parallelism, {shot_bin_max}}), format, g.out);
      return 0;
    }
    if (*ablate) {
      AblationSpec spec;
      spec.sampler = sampler;
      spec.beta = g.beta;
      spec.min_steps = min_list;
      spec.max_steps = max_list;
      spec.rules = rule_list;
      spec.query_per_class = query_list;
      spec.episodes = g.episodes;
      spec.seed = g.seed;
      spec.repeats = repeats;
      spec.parallelism = g.parallelism;
      spec.binning = {shot_bin_max};
      const auto ds = data.load();
      emit_report(run_ablation(ds, spec), format, g.out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_data_error() ? kExitData : kExitConfig;
  }
  return 0;
}
