#pragma once

// Regret and its normalization, gradient-geometry statistics, and run
// summaries (mean and standard error of the mean).

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pgdfl/combiners.hpp"
#include "pgdfl/data.hpp"
#include "pgdfl/nn.hpp"
#include "pgdfl/tasks.hpp"

namespace pgdfl {

/// Angle between two nonzero vectors, accurate near 0 and pi.
inline double angle_between(const Vector& a, const Vector& b) {
  const Vector ua = a / a.norm();
  const Vector ub = b / b.norm();
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

inline double cosine(const Vector& a, const Vector& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

struct GradGeometry {
  double cos_phi = std::numeric_limits<double>::quiet_NaN();
  double norm_ratio = std::numeric_limits<double>::quiet_NaN();  // |g_dec| / |g_pred|
  int epoch = 0;
  bool defined = false;
};

inline GradGeometry grad_geometry(const GradPair& gp, int epoch = 0) {
  GradGeometry g;
  g.epoch = epoch;
  const double np = gp.g_pred.norm();
  const double nd = gp.g_dec.norm();
  if (np == 0.0 || nd == 0.0) return g;
  g.cos_phi = std::clamp(gp.g_pred.dot(gp.g_dec) / (np * nd), -1.0, 1.0);
  g.norm_ratio = nd / np;
  g.defined = true;
  return g;
}

// ---------------------------------------------------------------------------
// Regret

using Predictor = std::function<Matrix(const ProblemInstance&)>;

inline Predictor model_predictor(const MlpParams& model) {
  return [&model](const ProblemInstance& in) { return forward_batch(model, in.x).y_hat; };
}

/// The ground truth itself.
inline Predictor oracle_predictor() {
  return [](const ProblemInstance& in) { return in.y; };
}

struct RegretRow {
  std::string id;
  double raw = 0.0;
  double worst = 0.0;
  double normalized = 0.0;
  bool excluded = false;  // worst-case regret too small to normalize by
};

struct RegretReport {
  std::vector<RegretRow> rows;
  double mean_raw = 0.0;
  double mean_normalized = 0.0;
  std::size_t excluded = 0;
  /// Instances whose normalized regret exceeds 1 (possible for the budget
  /// negated-truth reference and for leveraged portfolios).
  std::size_t above_one = 0;
};

inline constexpr double kWorstRegretTol = 1e-12;

/// L_dec(worst decision, y) - L_dec(a*(y), y).
inline double worst_case_regret(const DecisionTask& task, const ProblemInstance& in) {
  return task.worst_loss(in) - task.optimal_loss(in);
}

inline RegretRow regret(const DecisionTask& task, const Predictor& predict, const ProblemInstance& in) {
  RegretRow row;
  row.id = in.id;
  const double opt = task.optimal_loss(in);
  const double raw = task.exact_loss(predict(in), in) - opt;
  if (raw < -1e-9 * (1.0 + std::abs(opt))) {
    throw NumericError("regret: exact solver returned a decision better than the optimum on '" + in.id + "'");
  }
  row.raw = std::max(raw, 0.0);
  row.worst = task.worst_loss(in) - opt;
  if (!(row.worst > kWorstRegretTol * (1.0 + std::abs(opt)))) {
    row.excluded = true;
    row.normalized = std::numeric_limits<double>::quiet_NaN();
  } else {
    row.normalized = row.raw / row.worst;
  }
  return row;
}

inline RegretReport regret_report(const DecisionTask& task, const Predictor& predict, const Dataset& ds) {
  RegretReport rep;
  std::size_t used = 0;
  for (const auto& in : ds.instances) {
    RegretRow row = regret(task, predict, in);
    rep.mean_raw += row.raw;
    if (row.excluded) {
      ++rep.excluded;
    } else {
      rep.mean_normalized += row.normalized;
      if (row.normalized > 1.0 + 1e-6) ++rep.above_one;
      ++used;
    }
    rep.rows.push_back(std::move(row));
  }
  if (!ds.instances.empty()) rep.mean_raw /= static_cast<double>(ds.size());
  rep.mean_normalized = used > 0 ? rep.mean_normalized / static_cast<double>(used)
                                 : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

// ---------------------------------------------------------------------------
// Summaries

struct Summary {
  double mean = 0.0;
  double sem = 0.0;
  std::size_t n = 0;
};

/// Mean and sample-std / sqrt(n).
inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.n = xs.size();
  if (s.n == 0) {
    s.mean = s.sem = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) {
    s.sem = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sem = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  return s;
}

}  // namespace pgdfl
