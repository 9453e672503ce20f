#pragma once

// Downstream optimization layers: portfolio (closed-form KKT), knapsack and
// budget allocation (regularized relaxations for training, exact solvers for
// evaluation). Every relaxed solve returns the decision, the decision loss
// against the supplied ground truth, and the gradient of that loss with
// respect to the prediction.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pgdfl/errors.hpp"
#include "pgdfl/nn.hpp"

namespace pgdfl {

struct DecisionOutput {
  Vector a;
  double loss = 0.0;
  /// Same shape as the prediction; empty for non-differentiable solves.
  Matrix grad_yhat;
  /// Multiplier of the coupling constraint (capacity, budget, sum-to-one).
  double multiplier = 0.0;

  bool has_grad() const noexcept { return grad_yhat.size() > 0; }
};

// ---------------------------------------------------------------------------
// Shared machinery

/// Euclidean projection of z onto {0 <= a <= 1, w.a <= cap} for w > 0.
/// Exact: the multiplier is located by sorting the piecewise-linear breakpoints.
struct CappedBoxProjection {
  Vector a;
  double mu = 0.0;
};

inline CappedBoxProjection project_capped_box(const Vector& z, const Vector& w, double cap) {
  const Index n = z.size();
  auto clip_at = [&](double mu) {
    Vector a(n);
    for (Index i = 0; i < n; ++i) a[i] = std::clamp(z[i] - mu * w[i], 0.0, 1.0);
    return a;
  };
  Vector a0 = clip_at(0.0);
  if (w.dot(a0) <= cap) return {std::move(a0), 0.0};

  std::vector<double> brk;
  brk.reserve(2 * static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double hi = (z[i] - 1.0) / w[i];
    const double lo = z[i] / w[i];
    if (hi > 0.0) brk.push_back(hi);
    if (lo > 0.0) brk.push_back(lo);
  }
  std::sort(brk.begin(), brk.end());

  // Find the first breakpoint where the load drops to cap or below; the root
  // lies in (prev, that breakpoint] where the free set is constant.
  double prev = 0.0;
  double next = brk.empty() ? 0.0 : brk.back();
  for (double b : brk) {
    if (w.dot(clip_at(b)) <= cap) {
      next = b;
      break;
    }
    prev = b;
  }
  const double mid = 0.5 * (prev + next);
  double fixed_load = 0.0;
  double free_wz = 0.0;
  double free_ww = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double t = z[i] - mid * w[i];
    if (t >= 1.0) {
      fixed_load += w[i];
    } else if (t > 0.0) {
      free_wz += w[i] * z[i];
      free_ww += w[i] * w[i];
    }
  }
  double mu = next;
  if (free_ww > 0.0) mu = (fixed_load + free_wz - cap) / free_ww;
  mu = std::clamp(mu, prev, next);
  return {clip_at(mu), mu};
}

/// Gradient of a loss through an argmax characterised by its active-set KKT
/// system. With free coordinates F, reduced Hessian H (|F| x |F|), optional
/// active coupling row c_F and mixed partials M = d(grad_F objective)/d(y_hat),
/// the solution map satisfies
///   [H  -c] [da_F]     [M]
///   [c'  0] [dmu ] = - [0] dy_hat.
/// Given g = dL/da_F this returns dL/dy_hat by solving the adjoint system once.
inline Vector implicit_kkt_gradient(const Matrix& h, const std::optional<Vector>& c,
                                    const Matrix& m, const Vector& g) {
  const Index f = h.rows();
  const Index k = f + (c ? 1 : 0);
  if (f == 0) return Vector::Zero(m.cols());
  Matrix kkt = Matrix::Zero(k, k);
  kkt.topLeftCorner(f, f) = h;
  if (c) {
    kkt.block(0, f, f, 1) = -*c;
    kkt.block(f, 0, 1, f) = c->transpose();
  }
  Vector rhs = Vector::Zero(k);
  rhs.head(f) = g;
  Eigen::FullPivLU<Matrix> lu(kkt.transpose());
  if (!lu.isInvertible()) {
    throw IllConditionedError("implicit differentiation: reduced KKT matrix is singular");
  }
  const Vector adj = lu.solve(rhs);
  return -(m.transpose() * adj.head(f));
}

// ---------------------------------------------------------------------------
// Portfolio:  max y'a - lambda a' Sigma a  s.t. sum(a) = 1

class PortfolioProblem {
 public:
  PortfolioProblem() = default;

  explicit PortfolioProblem(Matrix sigma, double lambda = 1.0)
      : sigma_(std::move(sigma)), lambda_(lambda) {
    const Index n = sigma_.rows();
    if (n < 2 || sigma_.cols() != n) throw ConfigError("portfolio: covariance must be N x N, N >= 2");
    if (!(lambda_ > 0.0)) throw ConfigError("portfolio: risk aversion must be positive");
    if (!sigma_.isApprox(sigma_.transpose(), 1e-12)) {
      throw ConfigError("portfolio: covariance must be symmetric");
    }
    Eigen::LLT<Matrix> llt(sigma_);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
      throw IllConditionedError("portfolio: covariance is not positive definite to working precision");
    }
    sigma_inv_ = llt.solve(Matrix::Identity(n, n));
    sigma_inv_ = 0.5 * (sigma_inv_ + sigma_inv_.transpose()).eval();
    sinv_one_ = sigma_inv_.rowwise().sum();
    one_sinv_one_ = sinv_one_.sum();
    jacobian_ = (sigma_inv_ - sinv_one_ * sinv_one_.transpose() / one_sinv_one_) / (2.0 * lambda_);
  }

  Index assets() const noexcept { return sigma_.rows(); }
  double lambda() const noexcept { return lambda_; }
  const Matrix& sigma() const noexcept { return sigma_; }
  const Matrix& sigma_inv() const noexcept { return sigma_inv_; }
  /// d a* / d y, symmetric and independent of y.
  const Matrix& jacobian() const noexcept { return jacobian_; }

  /// Multiplier nu of the sum-to-one constraint at returns y.
  double nu(const Vector& y) const {
    return (sinv_one_.dot(y) - 2.0 * lambda_) / one_sinv_one_;
  }

  Vector decision(const Vector& y) const {
    check(y);
    return sigma_inv_ * (y - Vector::Constant(y.size(), nu(y))) / (2.0 * lambda_);
  }

  double loss(const Vector& a, const Vector& y) const {
    return -(y.dot(a) - lambda_ * a.dot(sigma_ * a));
  }

  void check(const Vector& y) const {
    if (y.size() != assets()) throw ConfigError("portfolio: return vector length mismatch");
    if (!y.allFinite()) throw ValidationError("portfolio: non-finite returns");
  }

 private:
  Matrix sigma_;
  double lambda_ = 1.0;
  Matrix sigma_inv_;
  Vector sinv_one_;
  double one_sinv_one_ = 0.0;
  Matrix jacobian_;
};

/// Decision on predicted returns, loss and gradient against realised returns.
inline DecisionOutput portfolio_solve(const PortfolioProblem& p, const Vector& y_hat,
                                      const Vector& y_true) {
  p.check(y_true);
  DecisionOutput out;
  out.a = p.decision(y_hat);
  out.multiplier = p.nu(y_hat);
  out.loss = p.loss(out.a, y_true);
  const Vector dl_da = -y_true + 2.0 * p.lambda() * (p.sigma() * out.a);
  out.grad_yhat = p.jacobian() * dl_da;
  return out;
}

inline DecisionOutput portfolio_solve(const PortfolioProblem& p, const Vector& y) {
  return portfolio_solve(p, y, y);
}

// ---------------------------------------------------------------------------
// Knapsack:  max v'a  s.t. w'a <= c,  a binary

enum class KnapsackVariant { unweighted, weighted };

struct KnapsackProblem {
  Vector weights;
  double capacity = 0.0;
  KnapsackVariant variant = KnapsackVariant::unweighted;
  double gamma = 0.1;

  void validate() const {
    if (weights.size() == 0) throw ConfigError("knapsack: no items");
    if ((weights.array() <= 0.0).any()) throw ConfigError("knapsack: weights must be positive");
    if (variant == KnapsackVariant::unweighted && (weights.array() != 1.0).any()) {
      throw ConfigError("knapsack: unweighted variant requires unit weights");
    }
    if (!(capacity > 0.0) || !(capacity < weights.sum())) {
      throw ConfigError("knapsack: capacity must satisfy 0 < c < sum(w)");
    }
    if (!(gamma > 0.0)) throw ConfigError("knapsack: relaxation strength must be positive");
  }
};

inline double knapsack_loss(const Vector& a, const Vector& v) { return -v.dot(a); }

/// Relaxed decision  max v_hat'a - gamma |a|^2  over the capped box, trained
/// against realised values v_true.
inline DecisionOutput knapsack_solve_relaxed(const KnapsackProblem& p, const Vector& v_hat,
                                             const Vector& v_true) {
  p.validate();
  const Index n = p.weights.size();
  if (v_hat.size() != n || v_true.size() != n) throw ConfigError("knapsack: value length mismatch");
  if (!v_hat.allFinite()) throw ValidationError("knapsack: non-finite predicted values");

  auto proj = project_capped_box(v_hat / (2.0 * p.gamma), p.weights, p.capacity);
  DecisionOutput out;
  out.multiplier = 2.0 * p.gamma * proj.mu;
  out.loss = knapsack_loss(proj.a, v_true);

  std::vector<Index> free;
  for (Index i = 0; i < n; ++i)
    if (proj.a[i] > 0.0 && proj.a[i] < 1.0) free.push_back(i);
  const auto f = static_cast<Index>(free.size());
  Matrix h = -2.0 * p.gamma * Matrix::Identity(f, f);
  Matrix m = Matrix::Zero(f, n);
  Vector g(f);
  Vector cw(f);
  for (Index k = 0; k < f; ++k) {
    m(k, free[k]) = 1.0;
    g[k] = -v_true[free[k]];
    cw[k] = p.weights[free[k]];
  }
  std::optional<Vector> c;
  if (proj.mu > 0.0) c = cw;
  out.grad_yhat = implicit_kkt_gradient(h, c, m, g);
  out.a = std::move(proj.a);
  return out;
}

inline DecisionOutput knapsack_solve_relaxed(const KnapsackProblem& p, const Vector& v_hat) {
  return knapsack_solve_relaxed(p, v_hat, v_hat);
}

/// Exact binary knapsack on values v. Unit weights: best floor(c) positive
/// values; otherwise dynamic programming over integer capacity. Ties keep the
/// lower item index.
inline DecisionOutput knapsack_solve_exact(const KnapsackProblem& p, const Vector& v) {
  p.validate();
  const Index n = p.weights.size();
  if (v.size() != n) throw ConfigError("knapsack: value length mismatch");
  if (!v.allFinite()) throw ValidationError("knapsack: non-finite values");
  DecisionOutput out;
  out.a = Vector::Zero(n);

  const bool unit = (p.weights.array() == 1.0).all();
  if (unit) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return v[i] > v[j]; });
    const auto k = static_cast<std::size_t>(std::floor(p.capacity));
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
      if (v[order[r]] > 0.0) out.a[order[r]] = 1.0;
    }
  } else {
    std::vector<int> w(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      if (p.weights[i] != std::round(p.weights[i])) {
        throw ConfigError("knapsack: exact solver needs integer weights");
      }
      w[static_cast<std::size_t>(i)] = static_cast<int>(p.weights[i]);
    }
    const int cap = static_cast<int>(std::floor(p.capacity));
    const auto cols = static_cast<std::size_t>(cap + 1);
    // best[i][r]: optimum over items i.. with remaining capacity r.
    std::vector<double> best((static_cast<std::size_t>(n) + 1) * cols, 0.0);
    auto at = [&](Index i, int r) -> double& {
      return best[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(r)];
    };
    for (Index i = n - 1; i >= 0; --i) {
      const int wi = w[static_cast<std::size_t>(i)];
      for (int r = 0; r <= cap; ++r) {
        double skip = at(i + 1, r);
        double take = (wi <= r) ? v[i] + at(i + 1, r - wi) : skip;
        at(i, r) = (take > skip) ? take : skip;
      }
    }
    int r = cap;
    for (Index i = 0; i < n; ++i) {
      const int wi = w[static_cast<std::size_t>(i)];
      if (wi <= r && v[i] + at(i + 1, r - wi) > at(i + 1, r)) {
        out.a[i] = 1.0;
        r -= wi;
      }
    }
  }
  out.loss = knapsack_loss(out.a, v);
  return out;
}

// ---------------------------------------------------------------------------
// Budget allocation:  max sum_u (1 - prod_w (1 - a_w y_wu))  s.t. sum(a) <= B

struct BudgetProblem {
  Index websites = 5;
  Index users = 10;
  double budget = 2.0;
  double gamma = 0.1;
  int max_iter = 20000;
  double tol = 1e-6;

  void validate() const {
    if (websites <= 0 || users <= 0) throw ConfigError("budget: empty problem");
    if (!(budget > 0.0 && budget < static_cast<double>(websites))) {
      throw ConfigError("budget: need 0 < B < W");
    }
    if (!(gamma > 0.0)) throw ConfigError("budget: relaxation strength must be positive");
  }
};

namespace detail {

inline void check_budget_inputs(const Vector& a, const Matrix& y) {
  if (a.size() != y.rows()) throw ConfigError("budget: decision length must equal website count");
  if ((a.array() < 0.0).any() || (a.array() > 1.0).any() || !a.allFinite()) {
    throw ValidationError("budget: decision entries must lie in [0, 1]");
  }
  if ((y.array() < 0.0).any() || (y.array() > 1.0).any() || !y.allFinite()) {
    throw ValidationError("budget: click-through rates must lie in [0, 1]");
  }
}

// Product over websites of (1 - a_w y_wu), skipping up to two websites.
inline double miss_product(const Vector& a, const Matrix& y, Index u, Index skip1 = -1,
                           Index skip2 = -1) {
  double prod = 1.0;
  for (Index w = 0; w < y.rows(); ++w) {
    if (w == skip1 || w == skip2) continue;
    prod *= 1.0 - a[w] * y(w, u);
  }
  return prod;
}

inline double budget_objective_unchecked(const Vector& a, const Matrix& y) {
  double total = 0.0;
  for (Index u = 0; u < y.cols(); ++u) total += 1.0 - miss_product(a, y, u);
  return total;
}

inline Vector budget_grad_a_unchecked(const Vector& a, const Matrix& y) {
  Vector g = Vector::Zero(y.rows());
  for (Index w = 0; w < y.rows(); ++w)
    for (Index u = 0; u < y.cols(); ++u) g[w] += y(w, u) * miss_product(a, y, u, w);
  return g;
}

}  // namespace detail

/// Expected number of users reached.
inline double budget_objective(const Vector& a, const Matrix& y) {
  detail::check_budget_inputs(a, y);
  return detail::budget_objective_unchecked(a, y);
}

/// Partial derivatives of budget_objective with respect to a.
inline Vector budget_objective_grad_a(const Vector& a, const Matrix& y) {
  detail::check_budget_inputs(a, y);
  return detail::budget_grad_a_unchecked(a, y);
}

/// Hessian of budget_objective in a (zero diagonal).
inline Matrix budget_objective_hess_a(const Vector& a, const Matrix& y) {
  const Index n = y.rows();
  Matrix h = Matrix::Zero(n, n);
  for (Index w = 0; w < n; ++w)
    for (Index v = w + 1; v < n; ++v) {
      double s = 0.0;
      for (Index u = 0; u < y.cols(); ++u)
        s -= y(w, u) * y(v, u) * detail::miss_product(a, y, u, w, v);
      h(w, v) = s;
      h(v, w) = s;
    }
  return h;
}

/// d(df/da_w)/dy for every website w; columns index y row-major (v * U + u).
inline Matrix budget_objective_mixed(const Vector& a, const Matrix& y) {
  const Index n = y.rows();
  const Index users = y.cols();
  Matrix m = Matrix::Zero(n, n * users);
  for (Index w = 0; w < n; ++w)
    for (Index v = 0; v < n; ++v)
      for (Index u = 0; u < users; ++u) {
        m(w, v * users + u) = (v == w)
                                  ? detail::miss_product(a, y, u, w)
                                  : -y(w, u) * a[v] * detail::miss_product(a, y, u, w, v);
      }
  return m;
}

inline double budget_loss(const Vector& a, const Matrix& y) { return -budget_objective(a, y); }

namespace detail {

struct BudgetKkt {
  std::vector<Index> free;
  bool coupled = false;
  double mu = 0.0;
};

// First-order residual |a - P(a + grad)| of the regularized program.
inline double budget_residual(const BudgetProblem& p, const Vector& a, const Matrix& y_hat) {
  const Vector g = budget_grad_a_unchecked(a, y_hat) - 2.0 * p.gamma * a;
  const Vector ones = Vector::Ones(a.size());
  return (project_capped_box(a + g, ones, p.budget).a - a).norm();
}

// Newton refinement of the stationarity system on a fixed active set. Returns
// nullopt when the active set turns out inconsistent.
inline std::optional<std::pair<Vector, BudgetKkt>> budget_polish(const BudgetProblem& p,
                                                                 const Vector& a0, double mu0,
                                                                 const Matrix& y_hat) {
  const Index n = a0.size();
  BudgetKkt kkt;
  for (Index w = 0; w < n; ++w)
    if (a0[w] > 0.0 && a0[w] < 1.0) kkt.free.push_back(w);
  kkt.coupled = mu0 > 0.0;
  const auto f = static_cast<Index>(kkt.free.size());
  Vector a = a0;
  double mu = kkt.coupled ? mu0 : 0.0;
  if (f > 0) {
    const double fixed = a.sum() - [&] {
      double s = 0.0;
      for (Index w : kkt.free) s += a[w];
      return s;
    }();
    const Index k = f + (kkt.coupled ? 1 : 0);
    for (int it = 0; it < 50; ++it) {
      const Vector grad = budget_grad_a_unchecked(a, y_hat) - 2.0 * p.gamma * a;
      const Matrix hess = budget_objective_hess_a(a, y_hat) - 2.0 * p.gamma * Matrix::Identity(n, n);
      Vector r(k);
      Matrix jac = Matrix::Zero(k, k);
      double load = fixed;
      for (Index i = 0; i < f; ++i) {
        r[i] = grad[kkt.free[i]] - mu;
        for (Index j = 0; j < f; ++j) jac(i, j) = hess(kkt.free[i], kkt.free[j]);
        load += a[kkt.free[i]];
      }
      if (kkt.coupled) {
        r[f] = load - p.budget;
        for (Index i = 0; i < f; ++i) {
          jac(i, f) = -1.0;
          jac(f, i) = 1.0;
        }
      }
      if (r.norm() < 1e-15) break;
      Eigen::FullPivLU<Matrix> lu(jac);
      if (!lu.isInvertible()) return std::nullopt;
      const Vector step = lu.solve(-r);
      for (Index i = 0; i < f; ++i) a[kkt.free[i]] += step[i];
      if (kkt.coupled) mu += step[f];
      if (!a.allFinite()) return std::nullopt;
    }
  }
  // Consistency of the active set: free coordinates strictly inside the box,
  // and complementary slackness signs on the fixed ones.
  const Vector grad = budget_grad_a_unchecked(a, y_hat) - 2.0 * p.gamma * a;
  const double slack = 1e-9;
  if (kkt.coupled && mu < -slack) return std::nullopt;
  for (Index w = 0; w < n; ++w) {
    const bool is_free = std::find(kkt.free.begin(), kkt.free.end(), w) != kkt.free.end();
    if (is_free) {
      if (!(a[w] > 0.0 && a[w] < 1.0)) return std::nullopt;
    } else if (a[w] == 0.0) {
      if (grad[w] - mu > slack) return std::nullopt;
    } else if (grad[w] - mu < -slack) {
      return std::nullopt;
    }
  }
  if (!kkt.coupled && a.sum() > p.budget + 1e-12) return std::nullopt;
  kkt.mu = mu;
  return std::make_pair(std::move(a), std::move(kkt));
}

}  // namespace detail

/// Relaxed decision  max f(a, y_hat) - gamma |a|^2  over {0 <= a <= 1,
/// sum(a) <= B}. Projected gradient ascent identifies the active set, Newton
/// refines the point on it, and the loss -f(a, y_true) is differentiated
/// through the reduced KKT system.
inline DecisionOutput budget_solve_relaxed(const BudgetProblem& p, const Matrix& y_hat,
                                           const Matrix& y_true) {
  p.validate();
  if (y_hat.rows() != p.websites || y_hat.cols() != p.users || y_true.rows() != p.websites ||
      y_true.cols() != p.users) {
    throw ConfigError("budget: CTR matrix must be W x U");
  }
  detail::check_budget_inputs(Vector::Zero(p.websites), y_hat);
  detail::check_budget_inputs(Vector::Zero(p.websites), y_true);

  const Index n = p.websites;
  const Vector ones = Vector::Ones(n);
  // Global bound on the Hessian norm over the unit box.
  double cross = 0.0;
  for (Index w = 0; w < n; ++w)
    for (Index v = 0; v < n; ++v)
      if (v != w) {
        const double s = y_hat.row(w).dot(y_hat.row(v));
        cross += s * s;
      }
  const double lip = 2.0 * p.gamma + std::sqrt(cross);

  Vector a = Vector::Zero(n);
  double mu = 0.0;
  double res = detail::budget_residual(p, a, y_hat);
  int it = 0;
  for (; it < p.max_iter && res > 1e-3 * p.tol; ++it) {
    const Vector g = detail::budget_grad_a_unchecked(a, y_hat) - 2.0 * p.gamma * a;
    auto proj = project_capped_box(a + g / lip, ones, p.budget);
    a = std::move(proj.a);
    mu = proj.mu * lip;
    if (it % 8 == 0 || it + 1 == p.max_iter) res = detail::budget_residual(p, a, y_hat);
  }
  res = detail::budget_residual(p, a, y_hat);
  if (res > p.tol) throw SolverError("budget: projected gradient did not converge", res);

  DecisionOutput out;
  detail::BudgetKkt kkt;
  if (auto polished = detail::budget_polish(p, a, mu, y_hat)) {
    a = std::move(polished->first);
    kkt = std::move(polished->second);
  } else {
    for (Index w = 0; w < n; ++w)
      if (a[w] > 0.0 && a[w] < 1.0) kkt.free.push_back(w);
    kkt.coupled = mu > 0.0;
    kkt.mu = mu;
  }
  out.a = a;
  out.multiplier = kkt.mu;
  out.loss = -detail::budget_objective_unchecked(a, y_true);

  const auto f = static_cast<Index>(kkt.free.size());
  const Matrix hess = budget_objective_hess_a(a, y_hat) - 2.0 * p.gamma * Matrix::Identity(n, n);
  const Matrix mixed = budget_objective_mixed(a, y_hat);
  const Vector dl_da = -detail::budget_grad_a_unchecked(a, y_true);
  Matrix h(f, f);
  Matrix m(f, mixed.cols());
  Vector g(f);
  for (Index i = 0; i < f; ++i) {
    for (Index j = 0; j < f; ++j) h(i, j) = hess(kkt.free[i], kkt.free[j]);
    m.row(i) = mixed.row(kkt.free[i]);
    g[i] = dl_da[kkt.free[i]];
  }
  std::optional<Vector> c;
  if (kkt.coupled) c = Vector::Ones(f);
  const Vector flat = implicit_kkt_gradient(h, c, m, g);
  out.grad_yhat = Eigen::Map<const RowMatrix>(flat.data(), n, p.users);
  return out;
}

inline DecisionOutput budget_solve_relaxed(const BudgetProblem& p, const Matrix& y_hat) {
  return budget_solve_relaxed(p, y_hat, y_hat);
}

namespace detail {

// Best subset of exactly round(B) websites; no range checks so that negated
// CTRs can be used for the worst-case reference decision.
inline DecisionOutput budget_enumerate(const BudgetProblem& p, const Matrix& y) {
  const Index n = y.rows();
  const auto k = static_cast<Index>(std::llround(p.budget));
  DecisionOutput best;
  best.loss = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(static_cast<std::size_t>(n), false);
  std::fill(pick.begin(), pick.begin() + k, true);
  // prev_permutation walks subsets in lexicographic order of the indicator.
  do {
    Vector a(n);
    for (Index w = 0; w < n; ++w) a[w] = pick[static_cast<std::size_t>(w)] ? 1.0 : 0.0;
    const double loss = -budget_objective_unchecked(a, y);
    if (loss < best.loss) {
      best.loss = loss;
      best.a = std::move(a);
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

}  // namespace detail

/// Exhaustive search over all size-B website subsets.
inline DecisionOutput budget_solve_exact(const BudgetProblem& p, const Matrix& y) {
  p.validate();
  if (y.rows() != p.websites || y.cols() != p.users) throw ConfigError("budget: CTR matrix must be W x U");
  detail::check_budget_inputs(Vector::Zero(p.websites), y);
  return detail::budget_enumerate(p, y);
}

}  // namespace pgdfl
