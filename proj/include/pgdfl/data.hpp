#pragma once

// Synthetic instance generators, CSV ingestion and train/test splitting.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgdfl/csv.hpp"
#include "pgdfl/decision.hpp"
#include "pgdfl/errors.hpp"
#include "pgdfl/nn.hpp"
#include "pgdfl/rng.hpp"

namespace pgdfl {

enum class ProblemKind { knapsack, budget, portfolio };

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::knapsack: return "knapsack";
    case ProblemKind::budget: return "budget";
    case ProblemKind::portfolio: return "portfolio";
  }
  return "?";
}

inline ProblemKind parse_problem(std::string_view tag) {
  for (ProblemKind k : {ProblemKind::knapsack, ProblemKind::budget, ProblemKind::portfolio})
    if (tag == to_string(k)) return k;
  throw ConfigError("unknown problem '" + std::string(tag) +
                    "' (expected knapsack, budget or portfolio)");
}

/// One optimization instance. Each row of x is one prediction unit (an item,
/// a website, or the single portfolio forecast) and the matching row of y its
/// target.
struct ProblemInstance {
  std::string id;
  Matrix x;
  Matrix y;
  Vector weights;  // knapsack only
};

struct Dataset {
  ProblemKind kind = ProblemKind::knapsack;
  std::vector<ProblemInstance> instances;
  std::string split = "all";
  std::uint64_t seed = 0;

  // knapsack
  KnapsackVariant variant = KnapsackVariant::unweighted;
  // budget: leading target columns consumed by the decision layer
  Index decision_targets = 0;
  Matrix feature_map;  // budget A, x_w = A y_w
  // portfolio
  Matrix returns;  // horizon x N history
  std::vector<std::string> dates;
  Index window = 0;
  Matrix sigma;

  std::size_t size() const noexcept { return instances.size(); }
  Index input_dim() const { return instances.empty() ? 0 : instances.front().x.cols(); }
  Index output_dim() const { return instances.empty() ? 0 : instances.front().y.cols(); }

  void check_shapes() const {
    if (instances.empty()) throw EmptyDatasetError("dataset has no instances");
    const auto& f = instances.front();
    for (const auto& in : instances) {
      if (in.x.rows() != f.x.rows() || in.x.cols() != f.x.cols() || in.y.rows() != f.y.rows() ||
          in.y.cols() != f.y.cols() || in.weights.size() != f.weights.size()) {
        throw SchemaError("instance '" + in.id + "' has different dimensions from '" + f.id + "'");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Knapsack

inline double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

struct KnapsackGenOptions {
  Index items = 48;
  Index features = 8;
  double noise_std = 0.1;
};

/// Features standard normal; values softplus(P . [x, x^2 - 1] + noise) for one
/// random projection P per dataset; weights 1 or uniform on {3, 5, 7}.
inline Dataset gen_knapsack(std::uint64_t seed, std::size_t n_instances, KnapsackVariant variant,
                            const KnapsackGenOptions& opt = {}) {
  CounterRng rng(seed, 0x6b6e6170);
  Dataset ds;
  ds.kind = ProblemKind::knapsack;
  ds.seed = seed;
  ds.variant = variant;
  const Index nf = opt.features;
  Vector proj(2 * nf);
  for (Index j = 0; j < proj.size(); ++j) proj[j] = 0.3 * rng.normal();
  static constexpr double kWeights[3] = {3.0, 5.0, 7.0};
  for (std::size_t n = 0; n < n_instances; ++n) {
    ProblemInstance in;
    in.id = std::to_string(n);
    in.x.resize(opt.items, nf);
    in.y.resize(opt.items, 1);
    in.weights.resize(opt.items);
    for (Index i = 0; i < opt.items; ++i) {
      double s = 0.0;
      for (Index j = 0; j < nf; ++j) {
        const double xj = rng.normal();
        in.x(i, j) = xj;
        s += proj[j] * xj + proj[nf + j] * (xj * xj - 1.0);
      }
      in.y(i, 0) = softplus(s + opt.noise_std * rng.normal());
      in.weights[i] = variant == KnapsackVariant::unweighted ? 1.0 : kWeights[rng.index(3)];
    }
    ds.instances.push_back(std::move(in));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Budget allocation

struct BudgetGenOptions {
  Index websites = 5;
  Index users = 10;
  double max_ctr = 0.2;
};

/// True CTRs uniform on [0, max_ctr]; website features x_w = A y_w with one
/// standard-normal A per dataset; optional fake targets uniform on [0, 1]
/// appended to each website's target row.
inline Dataset gen_budget(std::uint64_t seed, std::size_t n_instances, Index fake_targets,
                          const BudgetGenOptions& opt = {}) {
  if (fake_targets < 0) throw ConfigError("gen_budget: fake target count must be nonnegative");
  CounterRng rng(seed, 0x62756467);
  Dataset ds;
  ds.kind = ProblemKind::budget;
  ds.seed = seed;
  ds.decision_targets = opt.users;
  ds.feature_map.resize(opt.users, opt.users);
  for (Index i = 0; i < opt.users; ++i)
    for (Index j = 0; j < opt.users; ++j) ds.feature_map(i, j) = rng.normal();
  for (std::size_t n = 0; n < n_instances; ++n) {
    ProblemInstance in;
    in.id = std::to_string(n);
    in.y.resize(opt.websites, opt.users + fake_targets);
    for (Index w = 0; w < opt.websites; ++w) {
      for (Index u = 0; u < opt.users; ++u) in.y(w, u) = rng.uniform(0.0, opt.max_ctr);
      for (Index f = 0; f < fake_targets; ++f) in.y(w, opt.users + f) = rng.uniform();
    }
    in.x = in.y.leftCols(opt.users) * ds.feature_map.transpose();
    ds.instances.push_back(std::move(in));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Portfolio

struct PortfolioGenOptions {
  Index assets = 49;
  Index window = 12;
  Index factors = 3;
  double factor_ar = 0.6;   // AR(1) persistence of the factors
  double noise_std = 6.0;   // idiosyncratic, percent per period
  double ridge = 1e-4;
};

/// Latent model behind a generated return history, kept for oracle checks.
struct PortfolioTruth {
  Vector mean;
  Matrix loadings;  // N x K
  Matrix factors;   // horizon x K
  double factor_ar = 0.0;

  /// E[r_t | f_{t-1}].
  Vector conditional_mean(Index t) const {
    return mean + factor_ar * (loadings * factors.row(t - 1).transpose());
  }
};

/// Sample covariance of the history plus ridge * I, and lagged-window instances:
/// features are the previous `window` return vectors (oldest first), target the
/// next return vector.
inline Dataset build_portfolio_dataset(Matrix returns, std::vector<std::string> dates, Index window,
                                       double ridge = 1e-4) {
  const Index horizon = returns.rows();
  const Index n = returns.cols();
  if (n < 2) throw SchemaError("portfolio: need at least two assets");
  if (window < 1) throw ConfigError("portfolio: window must be positive");
  if (horizon < n) throw ConfigError("portfolio: horizon must be at least the asset count");
  if (horizon <= window) throw EmptyDatasetError("portfolio: history shorter than the feature window");
  Dataset ds;
  ds.kind = ProblemKind::portfolio;
  ds.window = window;
  const Vector mean = returns.colwise().mean().transpose();
  const Matrix centered = returns.rowwise() - mean.transpose();
  ds.sigma = (centered.transpose() * centered) / static_cast<double>(horizon - 1);
  ds.sigma.diagonal().array() += ridge;
  for (Index t = window; t < horizon; ++t) {
    ProblemInstance in;
    in.id = dates[static_cast<std::size_t>(t)];
    in.x.resize(1, window * n);
    for (Index l = 0; l < window; ++l) in.x.block(0, l * n, 1, n) = returns.row(t - window + l);
    in.y = returns.row(t);
    ds.instances.push_back(std::move(in));
  }
  ds.returns = std::move(returns);
  ds.dates = std::move(dates);
  return ds;
}

struct PortfolioData {
  Dataset dataset;
  PortfolioTruth truth;
};

/// Returns (in percent) from r_t = mu + L f_t + eps_t with AR(1) factors.
inline PortfolioData gen_portfolio(std::uint64_t seed, std::size_t n_instances,
                                   const PortfolioGenOptions& opt = {}) {
  const Index n = opt.assets;
  const Index k = opt.factors;
  const Index horizon = static_cast<Index>(n_instances) + opt.window;
  CounterRng rng(seed, 0x706f7274);
  PortfolioTruth truth;
  truth.factor_ar = opt.factor_ar;
  truth.mean.resize(n);
  truth.loadings.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    truth.mean[i] = 0.8 + 0.2 * rng.normal();
    for (Index j = 0; j < k; ++j)
      truth.loadings(i, j) = j == 0 ? 1.0 + 0.3 * rng.normal() : 0.5 * rng.normal();
  }
  Vector fstd(k);
  for (Index j = 0; j < k; ++j) fstd[j] = j == 0 ? 4.0 : 2.0;
  const double innov = std::sqrt(1.0 - opt.factor_ar * opt.factor_ar);
  truth.factors.resize(horizon, k);
  Matrix returns(horizon, n);
  std::vector<std::string> dates;
  for (Index t = 0; t < horizon; ++t) {
    for (Index j = 0; j < k; ++j) {
      const double prev = t == 0 ? fstd[j] * rng.normal() : truth.factors(t - 1, j);
      truth.factors(t, j) = t == 0 ? prev : opt.factor_ar * prev + innov * fstd[j] * rng.normal();
    }
    for (Index i = 0; i < n; ++i) {
      returns(t, i) = truth.mean[i] + truth.loadings.row(i).dot(truth.factors.row(t)) +
                      opt.noise_std * rng.normal();
    }
    dates.push_back(std::to_string(t));
  }
  PortfolioData out{build_portfolio_dataset(std::move(returns), std::move(dates), opt.window, opt.ridge),
                    std::move(truth)};
  out.dataset.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// CSV
//
//   knapsack   instance_id,item_id,f1..f8,weight,value
//   budget     instance_id,website_id,x1..xU,y1..yT
//   portfolio  date,r1..rN

inline void write_csv(const Dataset& ds, std::ostream& out) {
  std::vector<std::string> row;
  switch (ds.kind) {
    case ProblemKind::knapsack: {
      const Index nf = ds.input_dim();
      row = {"instance_id", "item_id"};
      for (Index j = 0; j < nf; ++j) row.push_back("f" + std::to_string(j + 1));
      row.push_back("weight");
      row.push_back("value");
      csv::write_row(out, row);
      for (const auto& in : ds.instances)
        for (Index i = 0; i < in.x.rows(); ++i) {
          row = {in.id, std::to_string(i)};
          for (Index j = 0; j < nf; ++j) row.push_back(csv::format(in.x(i, j)));
          row.push_back(csv::format(in.weights[i]));
          row.push_back(csv::format(in.y(i, 0)));
          csv::write_row(out, row);
        }
      break;
    }
    case ProblemKind::budget: {
      row = {"instance_id", "website_id"};
      for (Index j = 0; j < ds.input_dim(); ++j) row.push_back("x" + std::to_string(j + 1));
      for (Index j = 0; j < ds.output_dim(); ++j) row.push_back("y" + std::to_string(j + 1));
      csv::write_row(out, row);
      for (const auto& in : ds.instances)
        for (Index w = 0; w < in.x.rows(); ++w) {
          row = {in.id, std::to_string(w)};
          for (Index j = 0; j < in.x.cols(); ++j) row.push_back(csv::format(in.x(w, j)));
          for (Index j = 0; j < in.y.cols(); ++j) row.push_back(csv::format(in.y(w, j)));
          csv::write_row(out, row);
        }
      break;
    }
    case ProblemKind::portfolio: {
      row = {"date"};
      for (Index j = 0; j < ds.returns.cols(); ++j) row.push_back("r" + std::to_string(j + 1));
      csv::write_row(out, row);
      for (Index t = 0; t < ds.returns.rows(); ++t) {
        row = {ds.dates[static_cast<std::size_t>(t)]};
        for (Index j = 0; j < ds.returns.cols(); ++j) row.push_back(csv::format(ds.returns(t, j)));
        csv::write_row(out, row);
      }
      break;
    }
  }
}

inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  write_csv(ds, out);
}

struct LoadOptions {
  KnapsackVariant variant = KnapsackVariant::unweighted;
  Index decision_targets = 0;  // budget; 0 means "as many as feature columns"
  Index window = 12;           // portfolio
  double ridge = 1e-4;
};

namespace detail {

// Columns named prefix1, prefix2, ... in order, at least `min` of them.
inline std::vector<std::size_t> numbered_columns(const csv::Table& t, std::string_view prefix,
                                                 std::size_t min) {
  std::vector<std::size_t> cols;
  for (std::size_t k = 1;; ++k) {
    const std::string name = std::string(prefix) + std::to_string(k);
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) {
      if (k <= min) throw SchemaError("missing column '" + name + "'");
      break;
    }
    cols.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  return cols;
}

// Row indices grouped by instance id in order of first appearance.
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> group_rows(const csv::Table& t,
                                                                                std::size_t col) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> where;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& id = t.rows[r][col];
    auto [it, fresh] = where.try_emplace(id, groups.size());
    if (fresh) groups.push_back({id, {}});
    groups[it->second].second.push_back(r);
  }
  return groups;
}

}  // namespace detail

inline Dataset load_csv(std::istream& in, ProblemKind kind, const LoadOptions& opt = {}) {
  const csv::Table t = csv::read_table(in);
  Dataset ds;
  ds.kind = kind;
  switch (kind) {
    case ProblemKind::knapsack: {
      const std::size_t c_id = t.column("instance_id");
      t.column("item_id");
      const auto fcols = detail::numbered_columns(t, "f", 8);
      const std::size_t c_w = t.column("weight");
      const std::size_t c_v = t.column("value");
      if (t.rows.empty()) throw EmptyDatasetError("knapsack CSV has no data rows");
      ds.variant = opt.variant;
      for (const auto& [id, rows] : detail::group_rows(t, c_id)) {
        ProblemInstance inst;
        inst.id = id;
        const auto ni = static_cast<Index>(rows.size());
        const auto nf = static_cast<Index>(fcols.size());
        inst.x.resize(ni, nf);
        inst.y.resize(ni, 1);
        inst.weights.resize(ni);
        for (Index i = 0; i < ni; ++i) {
          const std::size_t r = rows[static_cast<std::size_t>(i)];
          for (Index j = 0; j < nf; ++j) inst.x(i, j) = t.number(r, fcols[static_cast<std::size_t>(j)]);
          inst.weights[i] = t.number(r, c_w);
          inst.y(i, 0) = t.number(r, c_v);
        }
        ds.instances.push_back(std::move(inst));
      }
      break;
    }
    case ProblemKind::budget: {
      const std::size_t c_id = t.column("instance_id");
      t.column("website_id");
      const auto xcols = detail::numbered_columns(t, "x", 1);
      const auto ycols = detail::numbered_columns(t, "y", xcols.size());
      if (t.rows.empty()) throw EmptyDatasetError("budget CSV has no data rows");
      ds.decision_targets =
          opt.decision_targets > 0 ? opt.decision_targets : static_cast<Index>(xcols.size());
      if (ds.decision_targets > static_cast<Index>(ycols.size())) {
        throw SchemaError("budget CSV has fewer target columns than the decision layer consumes");
      }
      for (const auto& [id, rows] : detail::group_rows(t, c_id)) {
        ProblemInstance inst;
        inst.id = id;
        const auto nw = static_cast<Index>(rows.size());
        inst.x.resize(nw, static_cast<Index>(xcols.size()));
        inst.y.resize(nw, static_cast<Index>(ycols.size()));
        for (Index w = 0; w < nw; ++w) {
          const std::size_t r = rows[static_cast<std::size_t>(w)];
          for (std::size_t j = 0; j < xcols.size(); ++j)
            inst.x(w, static_cast<Index>(j)) = t.number(r, xcols[j]);
          for (std::size_t j = 0; j < ycols.size(); ++j)
            inst.y(w, static_cast<Index>(j)) = t.number(r, ycols[j]);
        }
        ds.instances.push_back(std::move(inst));
      }
      break;
    }
    case ProblemKind::portfolio: {
      const std::size_t c_date = t.column("date");
      const auto rcols = detail::numbered_columns(t, "r", 2);
      if (t.rows.empty()) throw EmptyDatasetError("portfolio CSV has no data rows");
      Matrix returns(static_cast<Index>(t.rows.size()), static_cast<Index>(rcols.size()));
      std::vector<std::string> dates;
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        dates.push_back(t.rows[r][c_date]);
        for (std::size_t j = 0; j < rcols.size(); ++j)
          returns(static_cast<Index>(r), static_cast<Index>(j)) = t.number(r, rcols[j]);
      }
      ds = build_portfolio_dataset(std::move(returns), std::move(dates), opt.window, opt.ridge);
      break;
    }
  }
  ds.check_shapes();
  return ds;
}

inline Dataset load_csv(const std::string& path, ProblemKind kind, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return load_csv(in, kind, opt);
}

/// Deterministic shuffled split; each side keeps the original instance order.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("split: train_frac must lie in (0, 1)");
  const std::size_t n = ds.size();
  if (n < 2) throw ConfigError("split: need at least two instances");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(seed, 0x73706c74);
  rng.shuffle(std::span<std::size_t>(idx));
  auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(tr.begin(), tr.end());
  std::sort(te.begin(), te.end());
  auto take = [&](const std::vector<std::size_t>& which, const char* tag) {
    Dataset out = ds;
    out.instances.clear();
    out.split = tag;
    for (std::size_t i : which) out.instances.push_back(ds.instances[i]);
    return out;
  };
  return {take(tr, "train"), take(te, "test")};
}

}  // namespace pgdfl
