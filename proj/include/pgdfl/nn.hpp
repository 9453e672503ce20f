#pragma once

// One-hidden-layer ReLU perceptron with hand-written backward pass and Adam.
//
// Parameters live in a single flat vector laid out as
//   W1 (hidden x in, row-major) | b1 (hidden) | W2 (out x hidden, row-major) | b2 (out)
// so gradients from different losses are directly comparable vectors.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>

#include "pgdfl/errors.hpp"
#include "pgdfl/rng.hpp"

namespace pgdfl {

using Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlpShape {
  Index in = 0;
  Index hidden = 0;
  Index out = 0;

  Index param_count() const noexcept { return hidden * in + hidden + out * hidden + out; }
  bool operator==(const MlpShape&) const = default;
};

class MlpParams {
 public:
  MlpParams() = default;

  /// All-zero parameters.
  explicit MlpParams(MlpShape shape) : shape_(shape), theta_(Vector::Zero(shape.param_count())) {
    if (shape.in <= 0 || shape.hidden <= 0 || shape.out <= 0) {
      throw ConfigError("MlpShape dimensions must be positive");
    }
  }

  MlpParams(MlpShape shape, Vector theta) : MlpParams(shape) {
    if (theta.size() != shape.param_count()) {
      throw ConfigError("flat parameter vector has " + std::to_string(theta.size()) +
                        " entries, shape needs " + std::to_string(shape.param_count()));
    }
    theta_ = std::move(theta);
  }

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static MlpParams glorot(MlpShape shape, CounterRng& rng) {
    MlpParams p(shape);
    const double r1 = std::sqrt(6.0 / static_cast<double>(shape.in + shape.hidden));
    const double r2 = std::sqrt(6.0 / static_cast<double>(shape.hidden + shape.out));
    auto w1 = p.W1();
    for (Index i = 0; i < w1.rows(); ++i)
      for (Index j = 0; j < w1.cols(); ++j) w1(i, j) = rng.uniform(-r1, r1);
    auto w2 = p.W2();
    for (Index i = 0; i < w2.rows(); ++i)
      for (Index j = 0; j < w2.cols(); ++j) w2(i, j) = rng.uniform(-r2, r2);
    return p;
  }

  const MlpShape& shape() const noexcept { return shape_; }
  const Vector& flat() const noexcept { return theta_; }
  Vector& flat() noexcept { return theta_; }

  Eigen::Map<RowMatrix> W1() { return {theta_.data(), shape_.hidden, shape_.in}; }
  Eigen::Map<Vector> b1() { return {theta_.data() + off_b1(), shape_.hidden}; }
  Eigen::Map<RowMatrix> W2() { return {theta_.data() + off_W2(), shape_.out, shape_.hidden}; }
  Eigen::Map<Vector> b2() { return {theta_.data() + off_b2(), shape_.out}; }

  Eigen::Map<const RowMatrix> W1() const { return {theta_.data(), shape_.hidden, shape_.in}; }
  Eigen::Map<const Vector> b1() const { return {theta_.data() + off_b1(), shape_.hidden}; }
  Eigen::Map<const RowMatrix> W2() const {
    return {theta_.data() + off_W2(), shape_.out, shape_.hidden};
  }
  Eigen::Map<const Vector> b2() const { return {theta_.data() + off_b2(), shape_.out}; }

  bool all_finite() const { return theta_.allFinite(); }

 private:
  Index off_b1() const noexcept { return shape_.hidden * shape_.in; }
  Index off_W2() const noexcept { return off_b1() + shape_.hidden; }
  Index off_b2() const noexcept { return off_W2() + shape_.out * shape_.hidden; }

  MlpShape shape_{};
  Vector theta_;
};

struct ForwardCache {
  Vector x;
  Vector z1;
  Vector h1;
  Vector y_hat;
};

/// Row-per-sample version of ForwardCache.
struct BatchCache {
  Matrix x;
  Matrix z1;
  Matrix mask;  // ReLU activation pattern used for h1
  Matrix h1;
  Matrix y_hat;
};

namespace detail {

inline Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

inline Matrix relu_mask(const Matrix& z) { return (z.array() > 0.0).cast<double>().matrix(); }

}  // namespace detail

inline ForwardCache forward(const MlpParams& params, const Vector& x) {
  if (x.size() != params.shape().in) {
    throw ConfigError("forward: input has " + std::to_string(x.size()) + " features, model expects " +
                      std::to_string(params.shape().in));
  }
  ForwardCache c;
  c.x = x;
  c.z1 = params.W1() * x + params.b1();
  c.h1 = c.z1.cwiseMax(0.0);
  c.y_hat = params.W2() * c.h1 + params.b2();
  return c;
}

/// Gradient of upstream . y_hat(theta) with respect to the flat parameters.
inline Vector backward(const MlpParams& params, const ForwardCache& cache, const Vector& upstream) {
  const MlpShape& s = params.shape();
  if (upstream.size() != s.out || cache.z1.size() != s.hidden || cache.x.size() != s.in) {
    throw ConfigError("backward: upstream or cache shape does not match the model");
  }
  MlpParams g(s);
  g.W2() = upstream * cache.h1.transpose();
  g.b2() = upstream;
  const Vector dz1 =
      (params.W2().transpose() * upstream).cwiseProduct(detail::relu_mask(cache.z1));
  g.W1() = dz1 * cache.x.transpose();
  g.b1() = dz1;
  return std::move(g.flat());
}

/// Forward pass over the rows of x. A `frozen` activation pattern replaces the
/// ReLU gates, making the output exactly bilinear in the two layers.
inline BatchCache forward_batch(const MlpParams& params, const Matrix& x, const Matrix* frozen = nullptr) {
  if (x.cols() != params.shape().in) {
    throw ConfigError("forward_batch: input has " + std::to_string(x.cols()) +
                      " features, model expects " + std::to_string(params.shape().in));
  }
  BatchCache c;
  c.x = x;
  c.z1 = x * params.W1().transpose();
  c.z1.rowwise() += params.b1().transpose();
  if (frozen != nullptr) {
    if (frozen->rows() != c.z1.rows() || frozen->cols() != c.z1.cols()) {
      throw ConfigError("forward_batch: frozen activation pattern has the wrong shape");
    }
    c.mask = *frozen;
  } else {
    c.mask = detail::relu_mask(c.z1);
  }
  c.h1 = c.z1.cwiseProduct(c.mask);
  c.y_hat = c.h1 * params.W2().transpose();
  c.y_hat.rowwise() += params.b2().transpose();
  return c;
}

/// Sum over rows of backward(); upstream has one row per sample.
inline Vector backward_batch(const MlpParams& params, const BatchCache& cache,
                             const Matrix& upstream) {
  const MlpShape& s = params.shape();
  if (upstream.cols() != s.out || upstream.rows() != cache.x.rows()) {
    throw ConfigError("backward_batch: upstream shape does not match the cached batch");
  }
  MlpParams g(s);
  g.W2() = upstream.transpose() * cache.h1;
  g.b2() = upstream.colwise().sum().transpose();
  const Matrix dz1 = (upstream * params.W2()).cwiseProduct(cache.mask);
  g.W1() = dz1.transpose() * cache.x;
  g.b1() = dz1.colwise().sum().transpose();
  return std::move(g.flat());
}

/// Mean squared error over every entry, and its gradient in y_hat.
struct MseResult {
  double loss = 0.0;
  Matrix grad;
};

inline MseResult mse(const Matrix& y_hat, const Matrix& y) {
  if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols()) {
    throw ConfigError("mse: prediction and target shapes differ");
  }
  const double n = static_cast<double>(y.size());
  const Matrix r = y_hat - y;
  return {r.squaredNorm() / n, (2.0 / n) * r};
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  std::uint64_t k = 0;

  AdamState() = default;
  explicit AdamState(Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

/// One bias-corrected Adam step in the negative-gradient direction.
inline void adam_step(MlpParams& params, const Vector& grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
  if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
  const Index n = params.flat().size();
  if (grads.size() != n) throw ConfigError("adam_step: gradient length does not match parameters");
  if (!grads.allFinite()) throw NumericError("adam_step: non-finite gradient, run diverged");
  if (state.m.size() != n) state = AdamState(n);

  state.k += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads.cwiseAbs2();
  const double kd = static_cast<double>(state.k);
  const double c1 = 1.0 - std::pow(cfg.beta1, kd);
  const double c2 = 1.0 - std::pow(cfg.beta2, kd);
  params.flat().array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.eps);
}

}  // namespace pgdfl
