// Command-line front end: data generation, training sweeps, the comparison
// suite, spectrum diagnostics and the convergence lab.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgdfl.hpp"

namespace fs = std::filesystem;
using namespace pgdfl;

namespace {

// Flags shared by the experiment verbs, kept as raw text so that only the
// ones actually given override the config file.
struct SharedFlags {
  std::string config;
  std::map<std::string, std::string> values;

  void add(CLI::App* app, const std::vector<std::string>& keys) {
    app->add_option("--config", config, "key=value config file; flags override it");
    for (const auto& k : keys) {
      std::string flag = "--" + k;
      for (auto& ch : flag)
        if (ch == '_') ch = '-';
      app->add_option_function<std::string>(flag, [this, k](const std::string& v) { values[k] = v; },
                                            "overrides '" + k + "'");
    }
  }

  ExperimentConfig resolve(const std::vector<std::string>& skip = {}) const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_config(config);
    for (const auto& [k, v] : values)
      if (std::find(skip.begin(), skip.end(), k) == skip.end()) apply_setting(cfg, k, v);
    cfg.validate();
    return cfg;
  }
};

const std::vector<std::string> kRunKeys = {"problem", "variant",    "method",      "beta",   "kappa",
                                           "inflection", "epochs",  "seeds",       "gamma",  "lr",
                                           "data",    "out",        "data_seed",   "n_instances",
                                           "train_frac", "hidden",  "lambda",      "budget", "checkpoints"};

void print_run(const RunRecord& r) {
  if (r.failed) {
    std::printf("%-48s FAILED  %s\n", r.id.c_str(), r.cause.c_str());
  } else {
    std::printf("%-48s regret %.6f  (excluded %zu, degenerate %ld, %.1fs)\n", r.id.c_str(), r.report.mean_normalized,
                r.report.excluded, r.degenerate_count, r.wall_seconds);
  }
  std::fflush(stdout);
}

void print_summary(const std::vector<SummaryRow>& rows) {
  for (const auto& r : rows) {
    if (r.failed())
      std::printf("%-22s %-14s failed (%zu runs)\n", r.problem.c_str(), r.method.c_str(), r.failed_runs);
    else
      std::printf("%-22s %-14s %.4f +- %.4f  (n=%zu, failed %zu)\n", r.problem.c_str(), r.method.c_str(), r.stats.mean,
                  r.stats.sem, r.stats.n, r.failed_runs);
  }
}

std::string require_out(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("--out is required");
  return cfg.out;
}

int cmd_gen(const SharedFlags& f) {
  ExperimentConfig cfg = f.resolve();
  const std::string out = require_out(cfg);
  Dataset ds = load_dataset(cfg);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  write_csv(ds, out);
  std::printf("wrote %zu %s instances to %s\n", ds.size(), std::string(to_string(cfg.problem)).c_str(), out.c_str());
  return 0;
}

/// One configured cell over its seeds (all capacities for knapsack).
int cmd_train(const SharedFlags& f) {
  ExperimentConfig cfg = f.resolve();
  require_out(cfg);
  SuiteConfig s;
  s.base = cfg;
  s.cells = {{cfg.problem, cfg.variant}};
  s.methods = {cfg.method};
  const SuiteResult res = run_suite(s, print_run);
  print_summary(res.summary);
  for (const auto& r : res.runs)
    if (r.failed) return 2;
  return 0;
}

/// Comma-separated lists of problems, variants (problem:variant) and method labels.
int cmd_suite(const SharedFlags& f, const std::string& cells, const std::string& methods) {
  const ExperimentConfig base = f.resolve({"problem", "variant", "method"});
  require_out(base);
  SuiteConfig s = SuiteConfig::table_grid(base);
  if (!cells.empty()) {
    s.cells.clear();
    for (const auto& c : detail::split_on(cells, ',')) {
      const auto colon = c.find(':');
      s.cells.push_back({parse_problem(c.substr(0, colon)), colon == std::string::npos ? "" : c.substr(colon + 1)});
      parse_variant(s.cells.back().problem, s.cells.back().variant);
    }
  }
  if (!methods.empty()) {
    s.methods.clear();
    for (const auto& m : detail::split_on(methods, ',')) s.methods.push_back(parse_method(m, base.method));
  }
  const SuiteResult res = run_suite(s, print_run);
  print_summary(res.summary);
  return 0;
}

std::vector<GradGeometry> read_geometry(const fs::path& log) {
  std::vector<GradGeometry> out;
  if (!fs::exists(log)) return out;
  const csv::Table t = csv::read_table(log.string());
  const auto ce = t.column("epoch"), cc = t.column("cos_phi"), cr = t.column("norm_ratio");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    GradGeometry g;
    g.epoch = static_cast<int>(t.number(r, ce));
    g.cos_phi = t.number(r, cc);
    g.norm_ratio = t.number(r, cr);
    g.defined = std::isfinite(g.cos_phi);
    out.push_back(g);
  }
  return out;
}

int cmd_diagnose(const SharedFlags& f, int epoch, bool retrain, const SpectrumOptions& so) {
  ExperimentConfig cfg = f.resolve();
  const fs::path dir = require_out(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  if (cfg.problem == ProblemKind::knapsack && cfg.resolved_variant().capacities.size() != 1) {
    throw ConfigError("diagnose needs one knapsack capacity, e.g. --variant unweighted@25");
  }
  const std::string id = run_id(cfg, seed);
  DiagnoseResult d;
  if (retrain) {
    d = diagnose(cfg, seed, epoch, so);
  } else {
    const fs::path ck = dir / checkpoint_name(id, epoch);
    if (!fs::exists(ck)) {
      throw ConfigError("no checkpoint for run '" + id + "' at epoch " + std::to_string(epoch) + " (expected " +
                        ck.string() + "; train with --checkpoints " + std::to_string(epoch) + " or pass --retrain)");
    }
    d = diagnose_at(cfg, seed, read_checkpoint(ck.string()), so);
    d.history = read_geometry(dir / (id + ".log.csv"));
  }
  fs::create_directories(dir);
  const std::string stem = id + ".e" + std::to_string(epoch);
  const std::pair<const char*, const SpectrumEstimate*> specs[] = {
      {"pred", &d.pred}, {"dec", &d.dec}, {"combined", &d.combined}};
  for (const auto& [name, s] : specs) {
    std::ofstream out(dir / (stem + ".spectrum_" + name + ".csv"));
    write_spectrum(*s, out);
    std::printf("%-9s mass in [-1e-3, 1e-3]: density %.6f, ritz nodes %.4f   ritz range [%.4g, %.4g]\n", name,
                s->density_mass(-1e-3, 1e-3), s->mass_within(-1e-3, 1e-3), s->min_ritz(), s->max_ritz());
  }
  std::ofstream geo(dir / (stem + ".geometry.csv"));
  write_geometry(d.history, geo);
  return 0;
}

int cmd_convergence(const std::string& problem, const ScheduleConfig& sc, double start, const std::string& out) {
  TwoObjectiveProblem p;
  Vector x0;
  if (problem == "shared") {
    p = shared_minimizer(2);
    x0 = Vector::Constant(2, start);
  } else if (problem == "biquadratic") {
    p = biquadratic_1d();
    x0 = Vector::Constant(1, start);
  } else if (problem == "rotated") {
    p = rotated_quadratics_2d();
    x0 = Vector::Constant(2, start);
  } else {
    throw ConfigError("unknown convergence problem '" + problem + "' (expected shared, biquadratic or rotated)");
  }
  const Trace tr = run_schedule(p, sc, x0);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write '" + out + "'");
    write_trace(tr, f);
  }
  const auto& last = tr.rows.back();
  std::printf("%s: %zu steps%s, final certificate %.3g, running min m*psi %.3g, max m %.4g\n", p.name.c_str(),
              tr.rows.size(), tr.stopped_degenerate ? " (stopped: exactly Pareto stationary)" : "", last.certificate,
              last.runmin, tr.max_m);
  if (tr.rows.size() >= 1000 || tr.stopped_degenerate) {
    const RateFit fit = rate_check(tr, sc);
    if (fit.exact_stationary)
      std::printf("rate: running minimum reached 0 at k=%ld\n", fit.exact_at);
    else
      std::printf("rate: fitted slope %.4f (bound %.4f)\n", fit.slope, fit.bound);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-merging decision-focused learning experiments"};
  app.require_subcommand(1);

  SharedFlags gen_f, train_f, suite_f, diag_f;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset CSV (--out is the file)");
  gen_f.add(gen, {"problem", "variant", "data_seed", "n_instances", "out"});

  auto* train = app.add_subcommand("train", "train one method on one problem over the seeds");
  train_f.add(train, kRunKeys);

  auto* suite = app.add_subcommand("suite", "the problem x method grid with mean and SEM per cell");
  suite_f.add(suite, kRunKeys);
  std::string cells, methods;
  suite->add_option("--cells", cells, "problem[:variant] list, default: all five settings");
  suite->add_option("--methods", methods, "method label list, default: all eight methods");

  auto* diag = app.add_subcommand("diagnose", "Hessian spectra at a checkpoint and the gradient-geometry history");
  diag_f.add(diag, kRunKeys);
  int epoch = 2;
  bool retrain = false;
  SpectrumOptions so;
  diag->add_option("--epoch", epoch, "checkpoint epoch")->capture_default_str();
  diag->add_flag("--retrain", retrain, "retrain instead of reading the checkpoint");
  diag->add_option("--steps", so.steps, "Lanczos steps")->capture_default_str();
  diag->add_option("--probes", so.probes, "Lanczos probes")->capture_default_str();

  auto* conv = app.add_subcommand("convergence", "bisector-update schedule on a two-objective test problem");
  std::string conv_problem = "biquadratic", conv_out;
  ScheduleConfig sc;
  double start = 3.0;
  conv->add_option("--problem", conv_problem, "shared, biquadratic or rotated")->capture_default_str();
  conv->add_option("--eta0", sc.eta0)->capture_default_str();
  conv->add_option("--exponent", sc.exponent)->capture_default_str();
  conv->add_option("--horizon", sc.horizon)->capture_default_str();
  conv->add_option("--start", start, "every coordinate of the start point")->capture_default_str();
  conv->add_option("--out", conv_out, "trace CSV");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen(gen_f);
    if (*train) return cmd_train(train_f);
    if (*suite) return cmd_suite(suite_f, cells, methods);
    if (*diag) return cmd_diagnose(diag_f, epoch, retrain, so);
    if (*conv) return cmd_convergence(conv_problem, sc, start, conv_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
