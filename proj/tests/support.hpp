#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library code it checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Test-side RNG (std::mt19937_64, separate from the library generator).
struct Rand {
  std::mt19937_64 eng;
  std::normal_distribution<double> gauss{0.0, 1.0};  // kept: it caches the second draw of each pair
  explicit Rand(std::uint64_t seed) : eng(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  double normal() { return gauss(eng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }
  Vec uniform_vec(Eigen::Index n, double lo, double hi) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }
};

/// y = W2 relu(W1 x + b1) + b2 from a flat vector (W1 row-major, b1, W2 row-major, b2), by scalar loops.
inline std::vector<double> mlp_loops(const Vec& theta, int in, int hidden, int out, const std::vector<double>& x) {
  std::vector<double> h(static_cast<std::size_t>(hidden));
  std::size_t k = 0;
  const std::size_t ob1 = static_cast<std::size_t>(hidden) * in;
  for (int j = 0; j < hidden; ++j) {
    double z = theta[static_cast<Eigen::Index>(ob1 + j)];
    for (int i = 0; i < in; ++i) z += theta[static_cast<Eigen::Index>(k++)] * x[static_cast<std::size_t>(i)];
    h[static_cast<std::size_t>(j)] = z > 0.0 ? z : 0.0;
  }
  const std::size_t ow2 = ob1 + hidden;
  const std::size_t ob2 = ow2 + static_cast<std::size_t>(out) * hidden;
  std::vector<double> y(static_cast<std::size_t>(out));
  for (int o = 0; o < out; ++o) {
    double s = theta[static_cast<Eigen::Index>(ob2 + o)];
    for (int j = 0; j < hidden; ++j)
      s += theta[static_cast<Eigen::Index>(ow2 + static_cast<std::size_t>(o) * hidden + j)] * h[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(o)] = s;
  }
  return y;
}

/// Central-difference gradient of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// |a - b| / max(|a|, |b|, floor), infinity norm.
inline double rel_err(const Vec& a, const Vec& b, double floor = 1e-8) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Best 0/1 knapsack value by trying all 2^n subsets.
inline double knapsack_brute(const Vec& v, const Vec& w, double cap, std::vector<int>* best_set = nullptr) {
  const int n = static_cast<int>(v.size());
  double best = 0.0;
  std::uint32_t best_mask = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double val = 0.0, wt = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        val += v[i];
        wt += w[i];
      }
    if (wt <= cap + 1e-9 && val > best) {
      best = val;
      best_mask = mask;
    }
  }
  if (best_set) {
    best_set->clear();
    for (int i = 0; i < n; ++i)
      if (best_mask & (1u << i)) best_set->push_back(i);
  }
  return best;
}

/// sum_u (1 - prod_w (1 - a_w y_wu)) by literal loops; y is W x U.
inline double coverage_loops(const Vec& a, const Mat& y) {
  double total = 0.0;
  for (Eigen::Index u = 0; u < y.cols(); ++u) {
    double miss = 1.0;
    for (Eigen::Index w = 0; w < y.rows(); ++w) miss *= 1.0 - a[w] * y(w, u);
    total += 1.0 - miss;
  }
  return total;
}

/// Best coverage over all size-B subsets by nested recursion (no library enumeration).
inline double coverage_brute(const Mat& y, int budget, std::vector<int>* best_set = nullptr) {
  const int wn = static_cast<int>(y.rows());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> cur, arg;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(cur.size()) == budget) {
      Vec a = Vec::Zero(wn);
      for (int i : cur) a[i] = 1.0;
      const double f = coverage_loops(a, y);
      if (f > best) {
        best = f;
        arg = cur;
      }
      return;
    }
    for (int i = start; i < wn; ++i) {
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
  if (best_set) *best_set = arg;
  return best;
}

/// Symmetric eigenvalues, ascending.
inline Vec eigenvalues(const Mat& a) { return Eigen::SelfAdjointEigenSolver<Mat>(a).eigenvalues(); }

}  // namespace oracle
