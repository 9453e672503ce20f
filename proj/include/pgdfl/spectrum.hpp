#pragma once

// Hessian spectral density by stochastic Lanczos quadrature. The Hessian is
// only touched through Hessian-vector products, formed by central differences
// of analytic gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "pgdfl/errors.hpp"
#include "pgdfl/nn.hpp"
#include "pgdfl/rng.hpp"

namespace pgdfl {

using GradientFn = std::function<Vector(const Vector&)>;
using LinearOperator = std::function<Vector(const Vector&)>;

/// (grad(theta + h v/|v|) - grad(theta - h v/|v|)) |v| / 2h with
/// h = 1e-4 (1 + |theta|). Error is O(h^2) for smooth losses.
inline Vector hessian_vector_product(const GradientFn& grad, const Vector& theta, const Vector& v) {
  const double nv = v.norm();
  if (!(nv > 0.0)) throw ValidationError("hessian_vector_product: direction must be nonzero");
  const double h = 1e-4 * (1.0 + theta.norm());
  const Vector dir = v / nv;
  const Vector gp = grad(theta + h * dir);
  const Vector gm = grad(theta - h * dir);
  if (!gp.allFinite() || !gm.allFinite()) throw NumericError("hessian_vector_product: non-finite gradient");
  return (gp - gm) * (nv / (2.0 * h));
}

inline LinearOperator hessian_operator(GradientFn grad, Vector theta) {
  return [grad = std::move(grad), theta = std::move(theta)](const Vector& v) {
    return hessian_vector_product(grad, theta, v);
  };
}

struct LanczosProbe {
  std::vector<double> ritz;
  std::vector<double> weights;  // squared first components, sum to 1
  int steps = 0;
  bool breakdown = false;
};

/// Lanczos with full reorthogonalization from `start`.
inline LanczosProbe lanczos_probe(const LinearOperator& op, const Vector& start, int steps) {
  const Index n = start.size();
  if (steps < 1 || steps > n) throw ConfigError("lanczos: steps must lie in [1, dimension]");
  Matrix q(n, steps);
  std::vector<double> alpha;
  std::vector<double> beta;
  q.col(0) = start / start.norm();
  LanczosProbe out;
  for (int j = 0; j < steps; ++j) {
    Vector w = op(q.col(j));
    const double a = q.col(j).dot(w);
    alpha.push_back(a);
    // Two passes of classical Gram-Schmidt against every previous vector.
    for (int pass = 0; pass < 2; ++pass) {
      const auto basis = q.leftCols(j + 1);
      w -= basis * (basis.transpose() * w);
    }
    if (j + 1 == steps) break;
    const double b = w.norm();
    if (b < 1e-12) {
      out.breakdown = true;
      break;
    }
    beta.push_back(b);
    q.col(j + 1) = w / b;
  }
  const auto m = static_cast<Index>(alpha.size());
  Matrix t = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    t(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(t);
  out.steps = static_cast<int>(m);
  for (Index i = 0; i < m; ++i) {
    out.ritz.push_back(es.eigenvalues()[i]);
    const double c = es.eigenvectors()(0, i);
    out.weights.push_back(c * c);
  }
  return out;
}

struct SpectrumEstimate {
  std::vector<LanczosProbe> probes;
  int steps = 0;
  Vector grid;
  Vector density;

  double min_ritz() const {
    double lo = INFINITY;
    for (const auto& p : probes)
      for (double r : p.ritz) lo = std::min(lo, r);
    return lo;
  }
  double max_ritz() const {
    double hi = -INFINITY;
    for (const auto& p : probes)
      for (double r : p.ritz) hi = std::max(hi, r);
    return hi;
  }

  /// Quadrature mass of the spectral measure in [lo, hi], averaged over probes.
  double mass_within(double lo, double hi) const {
    double total = 0.0;
    for (const auto& p : probes)
      for (std::size_t i = 0; i < p.ritz.size(); ++i)
        if (p.ritz[i] >= lo && p.ritz[i] <= hi) total += p.weights[i];
    return probes.empty() ? 0.0 : total / static_cast<double>(probes.size());
  }

  /// Mass of the broadened density over [lo, hi] (trapezoid, clipped to the grid).
  /// Unlike mass_within this sees Ritz nodes that sit just outside a narrow window.
  double density_mass(double lo, double hi) const {
    double m = 0.0;
    for (Index i = 1; i < grid.size(); ++i) {
      const double a = std::max(grid[i - 1], lo);
      const double b = std::min(grid[i], hi);
      if (!(b > a)) continue;
      const double t = grid[i] - grid[i - 1];
      const auto at = [&](double x) { return density[i - 1] + (density[i] - density[i - 1]) * (x - grid[i - 1]) / t; };
      m += 0.5 * (at(a) + at(b)) * (b - a);
    }
    return m;
  }

  double integral() const {
    double s = 0.0;
    for (Index i = 1; i < grid.size(); ++i) s += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    return s;
  }
};

/// Default grid: the Ritz-value range padded by 10% on each side.
inline std::pair<double, double> spectrum_range(const std::vector<const SpectrumEstimate*>& specs) {
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto* s : specs) {
    lo = std::min(lo, s->min_ritz());
    hi = std::max(hi, s->max_ritz());
  }
  double width = hi - lo;
  if (!(width > 0.0)) width = std::max(1e-3, 1e-3 * std::abs(hi));
  return {lo - 0.1 * width, hi + 0.1 * width};
}

/// Gaussian-broadened density on a uniform grid, bandwidth twice the spacing.
inline void broaden(SpectrumEstimate& s, double lo, double hi, Index points = 1001) {
  s.grid = Vector::LinSpaced(points, lo, hi);
  s.density = Vector::Zero(points);
  const double sigma = 2.0 * (hi - lo) / static_cast<double>(points - 1);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(s.probes.size()));
  for (const auto& p : s.probes)
    for (std::size_t i = 0; i < p.ritz.size(); ++i)
      for (Index g = 0; g < points; ++g) {
        const double z = (s.grid[g] - p.ritz[i]) / sigma;
        if (std::abs(z) < 12.0) s.density[g] += p.weights[i] * norm * std::exp(-0.5 * z * z);
      }
}

/// Stochastic Lanczos quadrature with Gaussian probe vectors.
inline SpectrumEstimate lanczos_spectrum(const LinearOperator& op, Index dim, int steps, int probes,
                                         std::uint64_t seed) {
  if (probes < 1) throw ConfigError("lanczos_spectrum: need at least one probe");
  SpectrumEstimate s;
  s.steps = steps;
  for (int p = 0; p < probes; ++p) {
    CounterRng rng(seed, 0x6c616e63 + static_cast<std::uint64_t>(p));
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = rng.normal();
    s.probes.push_back(lanczos_probe(op, v, steps));
  }
  const auto [lo, hi] = spectrum_range({&s});
  broaden(s, lo, hi);
  return s;
}

inline SpectrumEstimate lanczos_spectrum(const GradientFn& grad, const Vector& theta, int steps = 80,
                                         int probes = 8, std::uint64_t seed = 0) {
  return lanczos_spectrum(hessian_operator(grad, theta), theta.size(), steps, probes, seed);
}

}  // namespace pgdfl
