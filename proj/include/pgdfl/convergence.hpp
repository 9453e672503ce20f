#pragma once

// Empirical check of convergence to Pareto stationarity for the bisector
// update with kappa = 0 on two-objective problems with closed-form gradients.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pgdfl/combiners.hpp"
#include "pgdfl/csv.hpp"
#include "pgdfl/errors.hpp"
#include "pgdfl/nn.hpp"
#include "pgdfl/rng.hpp"

namespace pgdfl {

struct TwoObjectiveProblem {
  std::string name;
  Index dim = 1;
  std::function<double(const Vector&)> loss1;
  std::function<double(const Vector&)> loss2;
  std::function<Vector(const Vector&)> grad1;
  std::function<Vector(const Vector&)> grad2;
  double lipschitz1 = 0.0;  // gradient Lipschitz constants
  double lipschitz2 = 0.0;
};

/// 0.5 (x - c)' A (x - c) pieces.
inline TwoObjectiveProblem quadratic_pair(std::string name, Matrix a1, Vector c1, Matrix a2, Vector c2) {
  TwoObjectiveProblem p;
  p.name = std::move(name);
  p.dim = c1.size();
  p.lipschitz1 = Eigen::SelfAdjointEigenSolver<Matrix>(a1).eigenvalues().cwiseAbs().maxCoeff();
  p.lipschitz2 = Eigen::SelfAdjointEigenSolver<Matrix>(a2).eigenvalues().cwiseAbs().maxCoeff();
  p.loss1 = [a1, c1](const Vector& x) { return 0.5 * (x - c1).dot(a1 * (x - c1)); };
  p.loss2 = [a2, c2](const Vector& x) { return 0.5 * (x - c2).dot(a2 * (x - c2)); };
  p.grad1 = [a1, c1](const Vector& x) -> Vector { return a1 * (x - c1); };
  p.grad2 = [a2, c2](const Vector& x) -> Vector { return a2 * (x - c2); };
  return p;
}

/// L1 = L2 = |x|^2.
inline TwoObjectiveProblem shared_minimizer(Index dim) {
  const Matrix a = 2.0 * Matrix::Identity(dim, dim);
  return quadratic_pair("shared-minimizer", a, Vector::Zero(dim), a, Vector::Zero(dim));
}

/// L1 = (x - 1)^2, L2 = (x + 1)^2; Pareto set [-1, 1].
inline TwoObjectiveProblem biquadratic_1d() {
  const Matrix a = Matrix::Constant(1, 1, 2.0);
  return quadratic_pair("biquadratic-1d", a, Vector::Constant(1, 1.0), a, Vector::Constant(1, -1.0));
}

/// Two anisotropic quadratics with differently rotated axes in the plane.
inline TwoObjectiveProblem rotated_quadratics_2d() {
  auto rot = [](double t) {
    Matrix r(2, 2);
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return r;
  };
  Matrix d1 = Matrix::Zero(2, 2);
  d1.diagonal() << 4.0, 1.0;
  Matrix d2 = Matrix::Zero(2, 2);
  d2.diagonal() << 3.0, 0.5;
  const Matrix a1 = rot(0.4) * d1 * rot(0.4).transpose();
  const Matrix a2 = rot(-0.9) * d2 * rot(-0.9).transpose();
  Vector c1(2), c2(2);
  c1 << 1.0, 0.5;
  c2 << -1.0, -0.5;
  return quadratic_pair("rotated-quadratics-2d", a1, c1, a2, c2);
}

/// Largest observed |grad(x) - grad(y)| / |x - y| over random pairs in a box.
inline double estimate_lipschitz(const std::function<Vector(const Vector&)>& grad, Index dim,
                                 double half_width, int samples, std::uint64_t seed) {
  CounterRng rng(seed, 0x6c697073);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector x(dim), y(dim);
    for (Index i = 0; i < dim; ++i) {
      x[i] = rng.uniform(-half_width, half_width);
      y[i] = rng.uniform(-half_width, half_width);
    }
    const double d = (x - y).norm();
    if (d > 0.0) best = std::max(best, (grad(x) - grad(y)).norm() / d);
  }
  return best;
}

struct ScheduleConfig {
  double eta0 = 0.5;
  double exponent = 0.75;  // in (1/2, 1)
  long horizon = 100000;

  void validate() const {
    if (!(eta0 > 0.0)) throw ConfigError("schedule: eta0 must be positive");
    if (!(exponent > 0.5 && exponent < 1.0)) throw ConfigError("schedule: exponent must lie in (1/2, 1)");
    if (horizon < 1) throw ConfigError("schedule: horizon must be positive");
  }

  double eta(long k) const { return eta0 / std::pow(static_cast<double>(k + 1), exponent); }
};

struct TraceRow {
  long k = 0;
  double eta = 0.0;
  double loss1 = 0.0;
  double loss2 = 0.0;
  double psi = 0.0;
  double m = 0.0;
  double m_psi = 0.0;
  double runmin = 0.0;
  double certificate = 0.0;
};

/// Norm of the minimum-norm point in the convex hull of the two gradients.
inline double pareto_certificate(const GradPair& gp) {
  const double lam = mgda_weight(gp);
  return (lam * gp.g_pred + (1.0 - lam) * gp.g_dec).norm();
}

/// (|g1| + |g2|) cos(phi / 2). The half-angle cosine sqrt((1 + cos phi) / 2)
/// equals |u1 + u2| / 2 for the unit directions, which keeps its relative
/// accuracy when the gradients are nearly opposite.
inline double alignment_psi(const Vector& g1, const Vector& g2) {
  const double n1 = g1.norm();
  const double n2 = g2.norm();
  if (n1 == 0.0 || n2 == 0.0) return n1 + n2;
  const double half_cos = std::min(1.0, 0.5 * (g1 / n1 + g2 / n2).norm());
  return (n1 + n2) * half_cos;
}

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::optional<TraceRow> last)
      : NumericError(what), last_(last) {}
  const std::optional<TraceRow>& last_finite() const noexcept { return last_; }

 private:
  std::optional<TraceRow> last_;
};

struct Trace {
  std::vector<TraceRow> rows;
  Vector final_x;
  bool stopped_degenerate = false;  // bisector undefined (or a gradient vanished): exact stationarity
  double max_m = 0.0;               // observed bound A on the geometric-mean norm
};

/// x_{k+1} = x_k - eta_k g(x_k) with g the kappa = 0 bisector update of
/// (grad1, grad2). Stops when the bisector is undefined.
inline Trace run_schedule(const TwoObjectiveProblem& p, const ScheduleConfig& cfg, const Vector& start) {
  cfg.validate();
  if (start.size() != p.dim || !start.allFinite()) throw ConfigError("run_schedule: bad start point");
  Trace tr;
  tr.rows.reserve(static_cast<std::size_t>(cfg.horizon));
  Vector x = start;
  CombinerConfig cc;
  cc.kappa = 0.0;
  double runmin = std::numeric_limits<double>::infinity();
  for (long k = 0; k < cfg.horizon; ++k) {
    GradPair gp{p.grad1(x), p.grad2(x)};
    TraceRow row;
    row.k = k;
    row.eta = cfg.eta(k);
    row.loss1 = p.loss1(x);
    row.loss2 = p.loss2(x);
    if (!gp.g_pred.allFinite() || !gp.g_dec.allFinite() || !std::isfinite(row.loss1) ||
        !std::isfinite(row.loss2)) {
      throw DivergenceError("run_schedule: non-finite iterate at k=" + std::to_string(k),
                            tr.rows.empty() ? std::nullopt : std::optional<TraceRow>(tr.rows.back()));
    }
    const double n1 = gp.g_pred.norm();
    const double n2 = gp.g_dec.norm();
    row.m = std::sqrt(n1) * std::sqrt(n2);
    row.psi = alignment_psi(gp.g_pred, gp.g_dec);
    const CombineResult cr = combine_ours(gp, cc);
    if (cr.degenerate()) row.psi = 0.0;  // no bisector: the half-angle is pi/2
    row.m_psi = row.m * row.psi;
    runmin = std::min(runmin, row.m_psi);
    row.runmin = runmin;
    row.certificate = pareto_certificate(gp);
    tr.max_m = std::max(tr.max_m, row.m);
    tr.rows.push_back(row);
    if (cr.degenerate()) {
      tr.stopped_degenerate = true;
      break;
    }
    x -= row.eta * cr.g;
  }
  tr.final_x = x;
  return tr;
}

struct RateFit {
  bool exact_stationary = false;  // running minimum reached exactly zero
  long exact_at = -1;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double bound = 0.0;  // -(1 - exponent)
};

/// Least-squares slope of log(runmin) against log(k + 1) over the trailing half.
inline RateFit rate_check(const Trace& tr, const ScheduleConfig& cfg) {
  RateFit fit;
  fit.bound = -(1.0 - cfg.exponent);
  for (const auto& r : tr.rows)
    if (r.runmin == 0.0) {
      fit.exact_stationary = true;
      fit.exact_at = r.k;
      return fit;
    }
  if (tr.rows.size() < 1000) throw ConfigError("rate_check: trace needs at least 1000 rows");
  const std::size_t start = tr.rows.size() / 2;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(tr.rows.size() - start);
  for (std::size_t i = start; i < tr.rows.size(); ++i) {
    const double lx = std::log(static_cast<double>(tr.rows[i].k + 1));
    const double ly = std::log(tr.rows[i].runmin);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return fit;
}

/// Left side of the telescoped descent inequality,
/// sum_k (eta_k m_k psi_k - M/2 eta_k^2 m_k^2), which must not exceed
/// L(x_0) - L(x_T) for the summed loss and M = M1 + M2.
inline double telescoping_sum(const Trace& tr, double lipschitz_total) {
  double s = 0.0;
  for (const auto& r : tr.rows) {
    if (&r == &tr.rows.back() && tr.stopped_degenerate) break;
    s += r.eta * r.m_psi - 0.5 * lipschitz_total * r.eta * r.eta * r.m * r.m;
  }
  return s;
}

inline void write_trace(const Trace& tr, std::ostream& out) {
  csv::write_row(out, {"k", "eta", "loss1", "loss2", "psi", "m", "m_psi", "runmin", "certificate"});
  for (const auto& r : tr.rows) {
    csv::write_row(out, {std::to_string(r.k), csv::format(r.eta), csv::format(r.loss1), csv::format(r.loss2),
                         csv::format(r.psi), csv::format(r.m), csv::format(r.m_psi), csv::format(r.runmin),
                         csv::format(r.certificate)});
  }
}

}  // namespace pgdfl
