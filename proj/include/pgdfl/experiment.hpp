#pragma once

// Training runs, seed sweeps over a grid of problem and method cells, run
// summaries, checkpoint I/O, and Hessian-spectrum diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pgdfl/combiners.hpp"
#include "pgdfl/config.hpp"
#include "pgdfl/csv.hpp"
#include "pgdfl/data.hpp"
#include "pgdfl/errors.hpp"
#include "pgdfl/metrics.hpp"
#include "pgdfl/nn.hpp"
#include "pgdfl/rng.hpp"
#include "pgdfl/spectrum.hpp"
#include "pgdfl/tasks.hpp"

namespace pgdfl {

/// Dataset named by the config: CSV when `data` is set, else synthetic from `data_seed`.
inline Dataset load_dataset(const ExperimentConfig& cfg) {
  const Variant v = cfg.resolved_variant();
  if (!cfg.data.empty()) {
    LoadOptions opt;
    opt.variant = v.knapsack;
    return load_csv(cfg.data, cfg.problem, opt);
  }
  const std::size_t n = cfg.instance_count();
  switch (cfg.problem) {
    case ProblemKind::knapsack: return gen_knapsack(cfg.data_seed, n, v.knapsack);
    case ProblemKind::budget: return gen_budget(cfg.data_seed, n, v.fake_targets);
    case ProblemKind::portfolio: return gen_portfolio(cfg.data_seed, n).dataset;
  }
  throw ConfigError("load_dataset: unknown problem");
}

inline TaskOptions task_options(const ExperimentConfig& cfg) {
  const Variant v = cfg.resolved_variant();
  if (cfg.problem == ProblemKind::knapsack && v.capacities.size() != 1) {
    throw ConfigError("knapsack run needs one capacity, e.g. variant '" +
                      std::string(v.knapsack == KnapsackVariant::weighted ? "weighted@30" : "unweighted@25") +
                      "'");
  }
  TaskOptions opt;
  if (!v.capacities.empty()) opt.capacity = v.capacities.front();
  opt.gamma = cfg.gamma;
  opt.budget = cfg.budget;
  opt.lambda = cfg.lambda;
  return opt;
}

/// Stable file-name stem, e.g. knapsack-weighted-c90-ours_k0-s3.
inline std::string run_id(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::string v = variant_tag(cfg.problem, cfg.resolved_variant());
  if (const auto at = v.find('@'); at != std::string::npos) v.replace(at, 1, "-c");
  return std::string(to_string(cfg.problem)) + "-" + v + "-" + cfg.method.label() + "-s" + std::to_string(seed);
}

/// Table row name: knapsack-unweighted, knapsack-weighted, budget-fake500, portfolio.
inline std::string cell_name(const ExperimentConfig& cfg) {
  const Variant v = cfg.resolved_variant();
  switch (cfg.problem) {
    case ProblemKind::knapsack:
      return std::string("knapsack-") + (v.knapsack == KnapsackVariant::weighted ? "weighted" : "unweighted");
    case ProblemKind::budget: return "budget-fake" + std::to_string(v.fake_targets);
    case ProblemKind::portfolio: return "portfolio";
  }
  return "?";
}

struct EpochRow {
  int epoch = 0;
  double loss_pred = 0.0;
  double loss_dec = 0.0;
  double cos_phi = std::numeric_limits<double>::quiet_NaN();
  double norm_ratio = std::numeric_limits<double>::quiet_NaN();
  double alpha = 1.0;
  long degenerate_count = 0;  // cumulative
  double cos_update_dec = std::numeric_limits<double>::quiet_NaN();  // cos(g, grad L_dec)
  bool stepped = false;
};

struct RunRecord {
  ExperimentConfig config;  // snapshot; seeds holds only this run's seed
  std::uint64_t seed = 0;
  std::string id;
  MlpShape shape;
  std::vector<EpochRow> rows;
  RegretReport report;
  bool failed = false;
  std::string cause;
  long degenerate_count = 0;
  long skipped_steps = 0;
  long solver_errors = 0;  // relaxed-solve failures in logging-only decision losses
  double wall_seconds = 0.0;
  std::map<int, Vector> checkpoints;

  std::vector<GradGeometry> geometry() const {
    std::vector<GradGeometry> out;
    for (const auto& r : rows) {
      GradGeometry g;
      g.epoch = r.epoch;
      g.cos_phi = r.cos_phi;
      g.norm_ratio = r.norm_ratio;
      g.defined = std::isfinite(r.cos_phi);
      out.push_back(g);
    }
    return out;
  }
};

/// Full-batch training of one seed; failures are recorded, not thrown.
/// `data` optionally supplies the already-loaded unsplit dataset.
inline RunRecord train_one(const ExperimentConfig& cfg, std::uint64_t seed, const Dataset* data = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg;
  rec.config.seeds = {seed};
  rec.seed = seed;
  try {
    cfg.validate();
    rec.id = run_id(cfg, seed);
    const TaskOptions topt = task_options(cfg);
    std::optional<Dataset> owned;
    if (data == nullptr) data = &owned.emplace(load_dataset(cfg));
    const auto [train, test] = split(*data, cfg.train_frac, seed);
    const auto task = make_task(*data, topt);

    rec.shape = {data->input_dim(), cfg.hidden_width(), data->output_dim()};
    CounterRng rng(seed, 0x696e6974);
    MlpParams model = MlpParams::glorot(rec.shape, rng);
    AdamState adam(rec.shape.param_count());
    CombinerConfig cc = cfg.combiner();
    const bool needs_dec = cc.strategy != Strategy::pfl;
    auto keep = [&](int epoch) {
      if (std::find(cfg.checkpoints.begin(), cfg.checkpoints.end(), epoch) != cfg.checkpoints.end())
        rec.checkpoints[epoch] = model.flat();
    };
    keep(0);

    for (int t = 0; t < cfg.epochs; ++t) {
      EpochRow row;
      row.epoch = t;
      const LossGrad pred = prediction_loss_grad(model, train);
      if (!std::isfinite(pred.loss)) throw NumericError("prediction loss is not finite at epoch " + std::to_string(t));
      row.loss_pred = pred.loss;
      std::optional<LossGrad> dec;
      try {
        dec = decision_grad_theta(*task, model, train);
      } catch (const SolverError& e) {
        if (needs_dec) throw;
        ++rec.solver_errors;
        if (rec.cause.empty()) rec.cause = std::string("decision loss not logged: ") + e.what();
      }
      cc.epoch = static_cast<double>(t);
      CombineResult cr;
      if (dec) {
        row.loss_dec = dec->loss;
        const GradPair gp{pred.grad, dec->grad};
        const GradGeometry geo = grad_geometry(gp, t);
        row.cos_phi = geo.cos_phi;
        row.norm_ratio = geo.norm_ratio;
        cr = select_update(gp, cc);
        const double ng = cr.g.norm();
        const double nd = dec->grad.norm();
        if (ng > 0.0 && nd > 0.0) row.cos_update_dec = cr.g.dot(dec->grad) / (ng * nd);
      } else {
        row.loss_dec = std::numeric_limits<double>::quiet_NaN();
        cr.g = pred.grad;
      }
      row.alpha = cr.alpha_used;
      if (cr.degenerate()) ++rec.degenerate_count;
      row.degenerate_count = rec.degenerate_count;
      if (cr.skip()) {
        ++rec.skipped_steps;
      } else {
        adam_step(model, cr.g, adam, cfg.lr);
        row.stepped = true;
      }
      if (!model.all_finite()) throw NumericError("parameters diverged at epoch " + std::to_string(t));
      rec.rows.push_back(row);
      keep(t + 1);
    }
    rec.report = regret_report(*task, model_predictor(model), test);
    if (!std::isfinite(rec.report.mean_normalized)) {
      throw NumericError("no test instance admits a normalized regret");
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.cause = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Output files

inline void write_epoch_log(const RunRecord& rec, std::ostream& out) {
  csv::write_row(out, {"epoch", "loss_pred", "loss_dec", "cos_phi", "norm_ratio", "alpha", "degenerate_count"});
  for (const auto& r : rec.rows) {
    csv::write_row(out, {std::to_string(r.epoch), csv::format(r.loss_pred),
                         std::isfinite(r.loss_dec) ? csv::format(r.loss_dec) : "failed", csv::format(r.cos_phi),
                         csv::format(r.norm_ratio), csv::format(r.alpha), std::to_string(r.degenerate_count)});
  }
}

inline void write_geometry(const std::vector<GradGeometry>& history, std::ostream& out) {
  csv::write_row(out, {"epoch", "cos_phi", "norm_ratio"});
  for (const auto& g : history)
    csv::write_row(out, {std::to_string(g.epoch), csv::format(g.cos_phi), csv::format(g.norm_ratio)});
}

inline void write_spectrum(const SpectrumEstimate& s, std::ostream& out) {
  csv::write_row(out, {"eigenvalue_grid", "density"});
  for (Index i = 0; i < s.grid.size(); ++i) csv::write_row(out, {csv::format(s.grid[i]), csv::format(s.density[i])});
}

struct Checkpoint {
  MlpShape shape;
  int epoch = 0;
  Vector theta;
};

inline void write_checkpoint(const Checkpoint& c, std::ostream& out) {
  out << "in=" << c.shape.in << "\nhidden=" << c.shape.hidden << "\nout=" << c.shape.out << "\nepoch=" << c.epoch
      << "\ntheta\n";
  for (Index i = 0; i < c.theta.size(); ++i) out << csv::format(c.theta[i]) << '\n';
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing checkpoint '" + path + "'");
  Checkpoint c;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, long long> head;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == "theta") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path + ": bad checkpoint header", lineno, "");
    head[line.substr(0, eq)] = detail::to_integer(line.substr(0, eq), line.substr(eq + 1));
  }
  for (const char* k : {"in", "hidden", "out", "epoch"})
    if (!head.count(k)) throw SchemaError(path + ": checkpoint header lacks '" + std::string(k) + "'");
  c.shape = {head["in"], head["hidden"], head["out"]};
  c.epoch = static_cast<int>(head["epoch"]);
  c.theta.resize(c.shape.param_count());
  Index i = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto v = csv::parse_double(line);
    if (!v) throw ParseError(path + ": bad parameter value", lineno, "theta");
    if (i >= c.theta.size()) throw SchemaError(path + ": more parameters than the shape allows");
    c.theta[i++] = *v;
  }
  if (i != c.theta.size()) throw SchemaError(path + ": fewer parameters than the shape needs");
  return c;
}

inline std::string checkpoint_name(const std::string& id, int epoch) {
  return id + ".ckpt_e" + std::to_string(epoch);
}

/// Epoch log and checkpoints of one run into `dir`; returns the file names.
inline std::vector<std::string> write_run_files(const RunRecord& rec, const std::filesystem::path& dir) {
  std::vector<std::string> files;
  if (rec.id.empty()) return files;
  const std::string log = rec.id + ".log.csv";
  {
    std::ofstream out(dir / log);
    if (!out) throw ConfigError("cannot write '" + (dir / log).string() + "'");
    write_epoch_log(rec, out);
  }
  files.push_back(log);
  for (const auto& [epoch, theta] : rec.checkpoints) {
    const std::string name = checkpoint_name(rec.id, epoch);
    std::ofstream out(dir / name);
    write_checkpoint({rec.shape, epoch, theta}, out);
    files.push_back(name);
  }
  return files;
}

// ---------------------------------------------------------------------------
// Summaries and suites

struct SummaryRow {
  std::string problem;
  std::string method;
  Summary stats;
  std::size_t failed_runs = 0;

  bool failed() const noexcept { return stats.n == 0; }
};

/// Mean and SEM of the final normalized test regret per (problem, method)
/// cell, in order of first appearance. Knapsack capacities of one seed are
/// averaged into a single sample first.
inline std::vector<SummaryRow> summarize_runs(const std::vector<RunRecord>& records) {
  struct Cell {
    std::string problem, method;
    std::vector<std::uint64_t> seed_order;
    std::map<std::uint64_t, std::vector<double>> by_seed;
    std::size_t failed = 0;
  };
  std::vector<Cell> cells;
  for (const auto& r : records) {
    const std::string problem = cell_name(r.config);
    const std::string method = r.config.method.label();
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const Cell& c) { return c.problem == problem && c.method == method; });
    if (it == cells.end()) {
      cells.push_back({problem, method, {}, {}, 0});
      it = std::prev(cells.end());
    }
    if (r.failed) {
      ++it->failed;
      continue;
    }
    if (!it->by_seed.count(r.seed)) it->seed_order.push_back(r.seed);
    it->by_seed[r.seed].push_back(r.report.mean_normalized);
  }
  std::vector<SummaryRow> out;
  for (const auto& c : cells) {
    std::vector<double> samples;
    for (auto s : c.seed_order) {
      const auto& v = c.by_seed.at(s);
      double m = 0.0;
      for (double x : v) m += x;
      samples.push_back(m / static_cast<double>(v.size()));
    }
    out.push_back({c.problem, c.method, summarize(samples), c.failed});
  }
  return out;
}

inline void write_summary(const std::vector<SummaryRow>& rows, std::ostream& out) {
  csv::write_row(out, {"problem", "method", "mean_normalized_regret", "sem", "runs"});
  for (const auto& r : rows) {
    if (r.failed()) {
      csv::write_row(out, {r.problem, r.method, "failed", "failed", "0"});
    } else {
      csv::write_row(out, {r.problem, r.method, csv::format(r.stats.mean), csv::format(r.stats.sem),
                           std::to_string(r.stats.n)});
    }
  }
}

struct SuiteCell {
  ProblemKind problem = ProblemKind::knapsack;
  std::string variant;
};

struct SuiteConfig {
  ExperimentConfig base;
  std::vector<SuiteCell> cells;
  std::vector<MethodSpec> methods;

  /// The five settings and eight methods of the comparison table.
  static SuiteConfig table_grid(ExperimentConfig base = {}) {
    SuiteConfig s;
    s.base = std::move(base);
    s.cells = {{ProblemKind::knapsack, "unweighted"},
               {ProblemKind::knapsack, "weighted"},
               {ProblemKind::budget, "0"},
               {ProblemKind::budget, "500"},
               {ProblemKind::portfolio, ""}};
    s.methods = {{Strategy::pfl},          {Strategy::dfl},    {Strategy::convex, 0.5, 0.0},
                 {Strategy::pcgrad},       {Strategy::mgda},   {Strategy::dcgd},
                 {Strategy::ours, 0.5, 0}, {Strategy::ours, 0.5, 1}};
    return s;
  }

  /// Every run configuration, knapsack capacities expanded.
  std::vector<ExperimentConfig> expand() const {
    std::vector<ExperimentConfig> out;
    for (const auto& cell : cells) {
      ExperimentConfig c = base;
      c.problem = cell.problem;
      c.variant = cell.variant;
      const Variant v = c.resolved_variant();
      std::vector<std::string> variants;
      if (cell.problem == ProblemKind::knapsack) {
        const std::string kind = v.knapsack == KnapsackVariant::weighted ? "weighted" : "unweighted";
        for (double cap : v.capacities) variants.push_back(kind + "@" + std::to_string(std::llround(cap)));
      } else {
        variants.push_back(cell.variant);
      }
      for (const auto& m : methods)
        for (const auto& var : variants) {
          ExperimentConfig r = c;
          r.variant = var;
          r.method = m;
          out.push_back(r);
        }
    }
    return out;
  }
};

struct SuiteResult {
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;
  std::vector<std::string> files;
};

using ProgressFn = std::function<void(const RunRecord&)>;

/// Every cell over every seed. A failing run is recorded and the sweep goes
/// on. With base.out set, per-run logs, checkpoints, summary.csv and
/// manifest.txt are written there.
inline SuiteResult run_suite(const SuiteConfig& suite, const ProgressFn& progress = {}) {
  if (suite.cells.empty() || suite.methods.empty()) throw ConfigError("suite needs at least one cell and one method");
  if (suite.base.seeds.empty()) throw ConfigError("suite needs at least one seed");
  SuiteResult res;
  std::filesystem::path dir;
  if (!suite.base.out.empty()) {
    dir = suite.base.out;
    std::filesystem::create_directories(dir);
  }
  std::map<std::string, Dataset> datasets;
  for (const auto& cfg : suite.expand()) {
    const Dataset* data = nullptr;
    std::string load_error;
    // keyed by everything the dataset depends on
    const std::string key = std::string(to_string(cfg.problem)) + "|" + cell_name(cfg) + "|" + cfg.data;
    try {
      auto it = datasets.find(key);
      if (it == datasets.end()) it = datasets.emplace(key, load_dataset(cfg)).first;
      data = &it->second;
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    for (auto seed : cfg.seeds) {
      RunRecord rec;
      if (data != nullptr) {
        rec = train_one(cfg, seed, data);
      } else {
        rec.config = cfg;
        rec.config.seeds = {seed};
        rec.seed = seed;
        rec.failed = true;
        rec.cause = "data: " + load_error;
      }
      if (!dir.empty()) {
        for (auto& f : write_run_files(rec, dir)) res.files.push_back(std::move(f));
      }
      if (progress) progress(rec);
      rec.checkpoints.clear();  // already on disk when requested; keeps memory flat
      res.runs.push_back(std::move(rec));
    }
  }
  res.summary = summarize_runs(res.runs);
  if (!dir.empty()) {
    {
      std::ofstream out(dir / "summary.csv");
      write_summary(res.summary, out);
    }
    res.files.push_back("summary.csv");
    std::ofstream man(dir / "manifest.txt");
    man << to_kv(suite.base);
    for (const auto& c : suite.cells)
      man << "cell=" << to_string(c.problem) << ":" << c.variant << '\n';
    for (const auto& m : suite.methods) man << "grid_method=" << m.label() << '\n';
    for (const auto& r : res.runs)
      if (r.failed) man << "failed=" << (r.id.empty() ? run_id(r.config, r.seed) : r.id) << ": " << r.cause << '\n';
    for (const auto& f : res.files) man << "file=" << f << '\n';
    man << "file=manifest.txt\n";
  }
  return res;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnoseResult {
  int epoch = 0;
  SpectrumEstimate pred;
  SpectrumEstimate dec;
  SpectrumEstimate combined;  // 0.5 L_pred + 0.5 L_dec
  std::vector<GradGeometry> history;
};

struct SpectrumOptions {
  int steps = 80;
  int probes = 8;
  Index grid_points = 1001;
};

/// Spectra of the training-set L_pred, L_dec and their even convex
/// combination at parameters `theta`, broadened on one shared grid.
inline DiagnoseResult diagnose_at(const ExperimentConfig& cfg, std::uint64_t seed, const Checkpoint& ckpt,
                                  const SpectrumOptions& so = {}) {
  const Dataset full = load_dataset(cfg);
  const auto train = split(full, cfg.train_frac, seed).first;
  const auto task = make_task(full, task_options(cfg));
  const MlpShape shape{full.input_dim(), cfg.hidden_width(), full.output_dim()};
  if (!(shape == ckpt.shape)) throw SchemaError("checkpoint shape does not match the configured model");
  // Gradients are differenced with the activation pattern held at the
  // checkpoint: a perturbation of size h otherwise flips a few ReLU gates and
  // each flip adds a spurious jump/h term to the product.
  const Matrix pattern = activation_pattern(MlpParams(shape, ckpt.theta), train);
  const GradientFn gpred = [&](const Vector& th) {
    return dataset_losses(nullptr, MlpParams(shape, th), train, true, false, &pattern).pred.grad;
  };
  const GradientFn gdec = [&](const Vector& th) {
    return dataset_losses(task.get(), MlpParams(shape, th), train, false, true, &pattern).dec.grad;
  };
  const GradientFn gmix = [&](const Vector& th) -> Vector {
    const auto both = dataset_losses(task.get(), MlpParams(shape, th), train, true, true, &pattern);
    return 0.5 * both.pred.grad + 0.5 * both.dec.grad;
  };
  DiagnoseResult d;
  d.epoch = ckpt.epoch;
  d.pred = lanczos_spectrum(gpred, ckpt.theta, so.steps, so.probes, seed);
  d.dec = lanczos_spectrum(gdec, ckpt.theta, so.steps, so.probes, seed);
  d.combined = lanczos_spectrum(gmix, ckpt.theta, so.steps, so.probes, seed);
  const auto [lo, hi] = spectrum_range({&d.pred, &d.dec, &d.combined});
  for (auto* s : {&d.pred, &d.dec, &d.combined}) broaden(*s, lo, hi, so.grid_points);
  return d;
}

/// Retrains (deterministically) to recover the parameters at `epoch`.
inline DiagnoseResult diagnose(const ExperimentConfig& cfg, std::uint64_t seed, int epoch,
                               const SpectrumOptions& so = {}) {
  if (epoch < 0 || epoch > cfg.epochs) {
    throw ConfigError("diagnose: epoch " + std::to_string(epoch) + " lies beyond the training horizon of " +
                      std::to_string(cfg.epochs));
  }
  ExperimentConfig c = cfg;
  c.checkpoints = {epoch};
  const RunRecord rec = train_one(c, seed);
  if (rec.failed) throw NumericError("diagnose: run '" + run_id(cfg, seed) + "' failed: " + rec.cause);
  DiagnoseResult d = diagnose_at(c, seed, {rec.shape, epoch, rec.checkpoints.at(epoch)}, so);
  d.history = rec.geometry();
  return d;
}

}  // namespace pgdfl
