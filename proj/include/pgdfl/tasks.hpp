#pragma once

// Binds a decision layer to dataset instances and to the predictive model:
// prediction shaping, the training-time relaxed loss, the test-time exact
// decision, and the reference decisions used for regret normalization.

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

#include "pgdfl/data.hpp"
#include "pgdfl/decision.hpp"
#include "pgdfl/nn.hpp"

namespace pgdfl {

struct TaskOptions {
  double capacity = 0.0;  // knapsack
  double gamma = 0.1;     // knapsack and budget relaxations
  double budget = 2.0;
  int budget_max_iter = 20000;
  double lambda = 1.0;    // portfolio risk aversion
};

class DecisionTask {
 public:
  struct Relaxed {
    double loss = 0.0;
    Matrix grad;  // d loss / d y_hat, same shape as y_hat
  };

  virtual ~DecisionTask() = default;
  virtual ProblemKind kind() const = 0;
  /// Relaxed decision on the prediction, loss against the instance truth.
  virtual Relaxed relaxed(const Matrix& y_hat, const ProblemInstance& in) const = 0;
  /// Exact decision on the prediction, loss against the instance truth.
  virtual double exact_loss(const Matrix& y_hat, const ProblemInstance& in) const = 0;
  /// Worst-case reference decision, loss against the instance truth.
  virtual double worst_loss(const ProblemInstance& in) const = 0;

  double optimal_loss(const ProblemInstance& in) const { return exact_loss(in.y, in); }
};

class KnapsackTask final : public DecisionTask {
 public:
  KnapsackTask(KnapsackVariant variant, double capacity, double gamma)
      : variant_(variant), capacity_(capacity), gamma_(gamma) {}

  ProblemKind kind() const override { return ProblemKind::knapsack; }

  KnapsackProblem problem(const ProblemInstance& in) const {
    return {in.weights, capacity_, variant_, gamma_};
  }

  Relaxed relaxed(const Matrix& y_hat, const ProblemInstance& in) const override {
    auto out = knapsack_solve_relaxed(problem(in), y_hat.col(0), in.y.col(0));
    return {out.loss, std::move(out.grad_yhat)};
  }

  double exact_loss(const Matrix& y_hat, const ProblemInstance& in) const override {
    const auto out = knapsack_solve_exact(problem(in), y_hat.col(0));
    return knapsack_loss(out.a, in.y.col(0));
  }

  /// Selecting nothing.
  double worst_loss(const ProblemInstance&) const override { return 0.0; }

 private:
  KnapsackVariant variant_;
  double capacity_;
  double gamma_;
};

class BudgetTask final : public DecisionTask {
 public:
  BudgetTask(BudgetProblem problem, Index decision_targets)
      : problem_(problem), targets_(decision_targets) {}

  ProblemKind kind() const override { return ProblemKind::budget; }

  const BudgetProblem& problem() const noexcept { return problem_; }

  /// Leading CTR columns clamped into [0, 1].
  Matrix clamp(const Matrix& y_hat) const {
    return y_hat.leftCols(targets_).cwiseMax(0.0).cwiseMin(1.0);
  }

  Relaxed relaxed(const Matrix& y_hat, const ProblemInstance& in) const override {
    const auto out = budget_solve_relaxed(sized(), clamp(y_hat), in.y.leftCols(targets_));
    Relaxed r;
    r.loss = out.loss;
    r.grad = Matrix::Zero(y_hat.rows(), y_hat.cols());
    for (Index w = 0; w < y_hat.rows(); ++w)
      for (Index u = 0; u < targets_; ++u)
        if (y_hat(w, u) > 0.0 && y_hat(w, u) < 1.0) r.grad(w, u) = out.grad_yhat(w, u);
    return r;
  }

  double exact_loss(const Matrix& y_hat, const ProblemInstance& in) const override {
    const auto out = budget_solve_exact(sized(), clamp(y_hat));
    return budget_loss(out.a, in.y.leftCols(targets_));
  }

  /// Decision taken on the negated ground truth.
  double worst_loss(const ProblemInstance& in) const override {
    const Matrix truth = in.y.leftCols(targets_);
    const auto out = detail::budget_enumerate(sized(), -truth);
    return budget_loss(out.a, truth);
  }

 private:
  BudgetProblem sized() const {
    BudgetProblem p = problem_;
    p.users = targets_;
    return p;
  }

  BudgetProblem problem_;
  Index targets_;
};

class PortfolioTask final : public DecisionTask {
 public:
  explicit PortfolioTask(PortfolioProblem problem) : problem_(std::move(problem)) {}

  ProblemKind kind() const override { return ProblemKind::portfolio; }

  const PortfolioProblem& problem() const noexcept { return problem_; }

  Relaxed relaxed(const Matrix& y_hat, const ProblemInstance& in) const override {
    const auto out = portfolio_solve(problem_, y_hat.row(0).transpose(), in.y.row(0).transpose());
    return {out.loss, out.grad_yhat.transpose()};
  }

  double exact_loss(const Matrix& y_hat, const ProblemInstance& in) const override {
    const Vector a = problem_.decision(y_hat.row(0).transpose());
    return problem_.loss(a, in.y.row(0).transpose());
  }

  /// Everything in the asset with the lowest realised return.
  double worst_loss(const ProblemInstance& in) const override {
    Index j = 0;
    in.y.row(0).minCoeff(&j);
    Vector a = Vector::Zero(problem_.assets());
    a[j] = 1.0;
    return problem_.loss(a, in.y.row(0).transpose());
  }

 private:
  PortfolioProblem problem_;
};

inline std::unique_ptr<DecisionTask> make_task(const Dataset& ds, const TaskOptions& opt) {
  switch (ds.kind) {
    case ProblemKind::knapsack:
      return std::make_unique<KnapsackTask>(ds.variant, opt.capacity, opt.gamma);
    case ProblemKind::budget: {
      BudgetProblem p;
      p.websites = ds.instances.empty() ? 5 : ds.instances.front().y.rows();
      p.users = ds.decision_targets;
      p.budget = opt.budget;
      p.gamma = opt.gamma;
      p.max_iter = opt.budget_max_iter;
      return std::make_unique<BudgetTask>(p, ds.decision_targets);
    }
    case ProblemKind::portfolio:
      return std::make_unique<PortfolioTask>(PortfolioProblem(ds.sigma, opt.lambda));
  }
  throw ConfigError("make_task: unknown problem kind");
}

// ---------------------------------------------------------------------------
// Full-batch losses and parameter gradients

/// Every instance's rows stacked into one forward pass.
struct StackedForward {
  BatchCache cache;
  std::vector<Index> offsets;  // first row of each instance, plus end

  Matrix rows(std::size_t i) const {
    return cache.y_hat.middleRows(offsets[i], offsets[i + 1] - offsets[i]);
  }
};

inline StackedForward forward_dataset(const MlpParams& model, const Dataset& ds,
                                      const Matrix* frozen = nullptr) {
  if (ds.instances.empty()) throw EmptyDatasetError("forward_dataset: no instances");
  StackedForward sf;
  Index total = 0;
  sf.offsets.push_back(0);
  for (const auto& in : ds.instances) {
    total += in.x.rows();
    sf.offsets.push_back(total);
  }
  Matrix x(total, ds.input_dim());
  for (std::size_t i = 0; i < ds.size(); ++i)
    x.middleRows(sf.offsets[i], ds.instances[i].x.rows()) = ds.instances[i].x;
  sf.cache = forward_batch(model, x, frozen);
  return sf;
}

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

struct LossPair {
  LossGrad pred;
  LossGrad dec;
};

/// Mean over instances of the per-instance MSE and of the relaxed decision
/// loss, each with its gradient in the flat model parameters.
inline LossPair dataset_losses(const DecisionTask* task, const MlpParams& model, const Dataset& ds,
                               bool want_pred = true, bool want_dec = true, const Matrix* frozen = nullptr) {
  const StackedForward sf = forward_dataset(model, ds, frozen);
  const double inv_n = 1.0 / static_cast<double>(ds.size());
  const Index rows = sf.cache.y_hat.rows();
  const Index cols = sf.cache.y_hat.cols();
  LossPair out;
  if (want_pred) {
    Matrix up(rows, cols);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto r = mse(sf.rows(i), ds.instances[i].y);
      out.pred.loss += inv_n * r.loss;
      up.middleRows(sf.offsets[i], r.grad.rows()) = inv_n * r.grad;
    }
    out.pred.grad = backward_batch(model, sf.cache, up);
  }
  if (want_dec) {
    if (task == nullptr) throw ConfigError("dataset_losses: decision loss needs a task");
    Matrix up(rows, cols);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto r = task->relaxed(sf.rows(i), ds.instances[i]);
      out.dec.loss += inv_n * r.loss;
      up.middleRows(sf.offsets[i], r.grad.rows()) = inv_n * r.grad;
    }
    out.dec.grad = backward_batch(model, sf.cache, up);
  }
  return out;
}

inline LossGrad prediction_loss_grad(const MlpParams& model, const Dataset& ds) {
  return dataset_losses(nullptr, model, ds, true, false).pred;
}

/// Stacked ReLU activation pattern of the model over every instance.
inline Matrix activation_pattern(const MlpParams& model, const Dataset& ds) {
  return forward_dataset(model, ds).cache.mask;
}

/// Gradient of the mean relaxed decision loss through the layer and the model.
inline LossGrad decision_grad_theta(const DecisionTask& task, const MlpParams& model,
                                    const Dataset& ds) {
  return dataset_losses(&task, model, ds, false, true).dec;
}

}  // namespace pgdfl
