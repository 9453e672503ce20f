#include <gtest/gtest.h>

#include <numbers>

#include "pgdfl/data.hpp"
#include "pgdfl/metrics.hpp"
#include "pgdfl/tasks.hpp"
#include "support.hpp"

using namespace pgdfl;

namespace {

ProblemInstance knapsack_instance(const Vector& values, const Vector& weights) {
  ProblemInstance in;
  in.id = "k";
  in.x = Matrix::Zero(values.size(), 8);
  in.y = values;
  in.weights = weights;
  return in;
}

Predictor constant(Matrix m) {
  return [m = std::move(m)](const ProblemInstance&) { return m; };
}

}  // namespace

TEST(Regret, PerfectPredictionHasZeroRegret) {
  const Dataset k = gen_knapsack(1, 20, KnapsackVariant::weighted);
  TaskOptions ko;
  ko.capacity = 90;
  const Dataset b = gen_budget(1, 20, 0);
  const Dataset p = gen_portfolio(1, 40).dataset;
  for (const Dataset* ds : {&k, &b, &p}) {
    const auto task = make_task(*ds, ds->kind == ProblemKind::knapsack ? ko : TaskOptions{});
    const auto rep = regret_report(*task, oracle_predictor(), *ds);
    for (const auto& row : rep.rows) {
      EXPECT_EQ(row.raw, 0.0);
      if (!row.excluded) {
        EXPECT_EQ(row.normalized, 0.0);
      }
    }
  }
}

TEST(Regret, KnapsackDependsOnlyOnRanking) {
  const Vector v = (Vector(4) << 1.0, 4.0, 2.0, 3.0).finished();
  const auto in = knapsack_instance(v, Vector::Ones(4));
  const KnapsackTask task(KnapsackVariant::unweighted, 2.0, 0.1);
  // strictly increasing transform keeps the ranking
  const Matrix warped = (v.array() * 10.0 + 7.0).matrix();
  EXPECT_EQ(regret(task, constant(warped), in).raw, 0.0);
  const Matrix flipped = -v + Vector::Constant(4, 10.0);
  EXPECT_GT(regret(task, constant(flipped), in).raw, 0.0);
}

TEST(Regret, WorstCaseReferences) {
  const KnapsackTask kt(KnapsackVariant::unweighted, 2.0, 0.1);
  const auto kin = knapsack_instance((Vector(3) << 1, 2, 3).finished(), Vector::Ones(3));
  EXPECT_DOUBLE_EQ(worst_case_regret(kt, kin), 5.0);

  const PortfolioTask pt(PortfolioProblem(Matrix::Identity(2, 2), 1.0));
  ProblemInstance pin;
  pin.id = "p";
  pin.x = Matrix::Zero(1, 2);
  pin.y = (Matrix(1, 2) << 1.0, 0.0).finished();
  // optimum (0.75, 0.25): -(0.75 - 0.625); worst (0, 1): -(0 - 1)
  EXPECT_NEAR(pt.optimal_loss(pin), -0.125, 1e-14);
  EXPECT_NEAR(pt.worst_loss(pin), 1.0, 1e-14);
  EXPECT_NEAR(worst_case_regret(pt, pin), 1.125, 1e-14);

  BudgetProblem bp;
  bp.websites = 3;
  bp.users = 2;
  bp.budget = 1.0;
  const BudgetTask bt(bp, 2);
  ProblemInstance bin;
  bin.id = "b";
  bin.x = Matrix::Zero(3, 2);
  bin.y = Matrix::Constant(3, 2, 0.1);
  EXPECT_GE(worst_case_regret(bt, bin), 0.0);
  const auto row = regret(bt, oracle_predictor(), bin);
  EXPECT_TRUE(row.excluded);
  EXPECT_TRUE(std::isnan(row.normalized));
}

TEST(Regret, NormalizedStaysInUnitIntervalForKnapsack) {
  const Dataset ds = gen_knapsack(3, 50, KnapsackVariant::unweighted);
  TaskOptions o;
  o.capacity = 25;
  const auto task = make_task(ds, o);
  oracle::Rand r(4);
  const Predictor rnd = [&](const ProblemInstance& in) -> Matrix { return r.normal_vec(in.y.rows()); };
  const auto rep = regret_report(*task, rnd, ds);
  for (const auto& row : rep.rows) {
    EXPECT_GE(row.normalized, 0.0);
    EXPECT_LE(row.normalized, 1.0 + 1e-6);
  }
  EXPECT_EQ(rep.above_one, 0u);
  EXPECT_GT(rep.mean_normalized, 0.0);
}

TEST(Regret, RandomPredictorNeverBeatsPerfect) {
  const Dataset ds = gen_knapsack(9, 10, KnapsackVariant::weighted);
  TaskOptions o;
  o.capacity = 30;
  const auto task = make_task(ds, o);
  const double perfect = regret_report(*task, oracle_predictor(), ds).mean_normalized;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    oracle::Rand r(seed);
    const Predictor rnd = [&](const ProblemInstance& in) -> Matrix { return r.uniform_vec(in.y.rows(), 0.0, 3.0); };
    EXPECT_GE(regret_report(*task, rnd, ds).mean_normalized, perfect);
  }
}

TEST(Geometry, Examples) {
  const Vector v = (Vector(3) << 1, 2, 3).finished();
  auto g = grad_geometry({v, v});
  EXPECT_NEAR(g.cos_phi, 1.0, 1e-15);
  EXPECT_NEAR(g.norm_ratio, 1.0, 1e-15);
  g = grad_geometry({(Vector(2) << 1, 0).finished(), (Vector(2) << 0, 5).finished()}, 7);
  EXPECT_EQ(g.cos_phi, 0.0);
  EXPECT_EQ(g.epoch, 7);
  g = grad_geometry({v, -0.01 * v});
  EXPECT_NEAR(g.cos_phi, -1.0, 1e-15);
  EXPECT_NEAR(g.norm_ratio, 0.01, 1e-15);
  g = grad_geometry({Vector::Zero(3), v});
  EXPECT_FALSE(g.defined);
  EXPECT_TRUE(std::isnan(g.cos_phi));
}

TEST(Geometry, AngleAccurateNearParallel) {
  const Vector a = (Vector(2) << 1.0, 0.0).finished();
  const Vector b = (Vector(2) << 1.0, 1e-9).finished();
  EXPECT_NEAR(angle_between(a, b), 1e-9, 1e-20);
  EXPECT_NEAR(angle_between(a, -b), std::numbers::pi - 1e-9, 1e-15);
}

TEST(Summary, HandArithmetic) {
  auto s = summarize({0.1, 0.3});
  EXPECT_NEAR(s.mean, 0.2, 1e-15);
  EXPECT_NEAR(s.sem, 0.1, 1e-15);
  s = summarize({0.4, 0.4, 0.4});
  EXPECT_NEAR(s.sem, 0.0, 1e-16);
  EXPECT_TRUE(std::isnan(summarize({}).mean));
  EXPECT_TRUE(std::isnan(summarize({1.0}).sem));
}

TEST(Summary, MatchesLongDoubleReference) {
  oracle::Rand r(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xs;
    for (int i = 0; i < 10; ++i) xs.push_back(r.uniform(0.0, 1.0));
    long double m = 0.0L;
    for (double x : xs) m += x;
    m /= 10.0L;
    long double ss = 0.0L;
    for (double x : xs) ss += (x - m) * (x - m);
    const long double sem = std::sqrt(ss / 9.0L) / std::sqrt(10.0L);
    const auto s = summarize(xs);
    EXPECT_NEAR(s.mean, static_cast<double>(m), 1e-12);
    EXPECT_NEAR(s.sem, static_cast<double>(sem), 1e-12);
  }
}
