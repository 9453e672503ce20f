#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "pgdfl/data.hpp"
#include "pgdfl/metrics.hpp"
#include "pgdfl/tasks.hpp"
#include "support.hpp"

using namespace pgdfl;

namespace {

bool same(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = a.instances[i];
    const auto& q = b.instances[i];
    if (p.id != q.id || p.x != q.x || p.y != q.y || p.weights != q.weights) return false;
  }
  return true;
}

std::string to_csv(const Dataset& ds) {
  std::ostringstream os;
  write_csv(ds, os);
  return os.str();
}

}  // namespace

TEST(GenKnapsack, DeterministicShapesAndWeights) {
  const Dataset a = gen_knapsack(3, 5, KnapsackVariant::unweighted);
  const Dataset b = gen_knapsack(3, 5, KnapsackVariant::unweighted);
  const Dataset c = gen_knapsack(4, 5, KnapsackVariant::unweighted);
  EXPECT_TRUE(same(a, b));
  EXPECT_FALSE(same(a, c));
  ASSERT_EQ(a.size(), 5u);
  for (const auto& in : a.instances) {
    EXPECT_EQ(in.x.rows(), 48);
    EXPECT_EQ(in.x.cols(), 8);
    EXPECT_EQ(in.y.cols(), 1);
    EXPECT_TRUE((in.weights.array() == 1.0).all());
  }
  std::set<double> seen;
  for (const auto& in : gen_knapsack(3, 20, KnapsackVariant::weighted).instances)
    for (Index i = 0; i < in.weights.size(); ++i) seen.insert(in.weights[i]);
  EXPECT_EQ(seen, (std::set<double>{3.0, 5.0, 7.0}));
}

TEST(GenKnapsack, ValuesArePositive) {
  // 21000 instances x 48 items is just over a million values
  const Dataset ds = gen_knapsack(11, 21000, KnapsackVariant::unweighted);
  double lo = INFINITY;
  std::size_t count = 0;
  for (const auto& in : ds.instances) {
    lo = std::min(lo, in.y.minCoeff());
    count += static_cast<std::size_t>(in.y.size());
  }
  EXPECT_GE(count, 1000000u);
  EXPECT_GT(lo, 0.0);
}

TEST(GenBudget, ShapesAndFeatureMap) {
  const Dataset plain = gen_budget(1, 4, 0);
  EXPECT_EQ(plain.output_dim(), 10);
  EXPECT_EQ(plain.decision_targets, 10);
  const Dataset fake = gen_budget(1, 4, 500);
  EXPECT_EQ(fake.output_dim(), 510);
  EXPECT_EQ(fake.decision_targets, 10);
  for (const auto& in : fake.instances) {
    EXPECT_EQ(in.y.rows(), 5);
    const Matrix ctr = in.y.leftCols(10);
    EXPECT_GE(ctr.minCoeff(), 0.0);
    EXPECT_LE(ctr.maxCoeff(), 0.2);
    EXPECT_GE(in.y.rightCols(500).minCoeff(), 0.0);
    EXPECT_LE(in.y.rightCols(500).maxCoeff(), 1.0);
    for (Index w = 0; w < 5; ++w) {
      // x_w = A y_w by explicit loops
      for (Index i = 0; i < 10; ++i) {
        double s = 0.0;
        for (Index j = 0; j < 10; ++j) s += fake.feature_map(i, j) * in.y(w, j);
        EXPECT_NEAR(in.x(w, i), s, 1e-14);
      }
    }
  }
  EXPECT_THROW(gen_budget(1, 2, -1), ConfigError);
}

TEST(GenPortfolio, CovarianceIsSymmetricPositiveDefinite) {
  const auto pd = gen_portfolio(2, 120);
  const Dataset& ds = pd.dataset;
  EXPECT_EQ(ds.size(), 120u);
  EXPECT_EQ(ds.output_dim(), 49);
  EXPECT_EQ(ds.input_dim(), 12 * 49);
  EXPECT_TRUE(ds.sigma.isApprox(ds.sigma.transpose(), 0.0));
  EXPECT_GT(oracle::eigenvalues(ds.sigma).minCoeff(), 0.0);
  // features are the previous window of returns, oldest first
  const auto& in = ds.instances[5];
  for (Index l = 0; l < 12; ++l)
    for (Index j = 0; j < 49; ++j) EXPECT_EQ(in.x(0, l * 49 + j), ds.returns(5 + l, j));
  EXPECT_EQ(in.y.row(0), ds.returns.row(5 + 12));
}

TEST(GenPortfolio, DegenerateSingleFactorStillSolves) {
  PortfolioGenOptions opt;
  opt.factors = 1;
  opt.noise_std = 0.0;
  const auto pd = gen_portfolio(3, 80, opt);
  const Vector ev = oracle::eigenvalues(pd.dataset.sigma);
  EXPECT_GT(ev.minCoeff(), 0.5e-4);
  EXPECT_GT(ev[ev.size() - 2] / ev[ev.size() - 1], 0.0);
  EXPECT_LT(ev[ev.size() - 2], 1e-3);
  const PortfolioProblem p(pd.dataset.sigma);
  const Vector a = p.decision(pd.dataset.instances[0].y.row(0).transpose());
  EXPECT_TRUE(a.allFinite());
  EXPECT_NEAR(a.sum(), 1.0, 1e-8);
}

TEST(GenPortfolio, TrueConditionalMeanBeatsRandomPredictor) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pd = gen_portfolio(seed, 200);
    const auto task = make_task(pd.dataset, {});
    const auto& ds = pd.dataset;
    const Index window = ds.window;
    std::map<std::string, Index> when;
    for (Index t = 0; t < ds.returns.rows(); ++t) when[ds.dates[static_cast<std::size_t>(t)]] = t;
    const Predictor truth = [&](const ProblemInstance& in) -> Matrix {
      return pd.truth.conditional_mean(when.at(in.id)).transpose();
    };
    oracle::Rand r(seed);
    const Predictor noise = [&](const ProblemInstance&) -> Matrix {
      return (Vector::Constant(49, 0.8) + 4.0 * r.normal_vec(49)).transpose();
    };
    const double rt = regret_report(*task, truth, ds).mean_normalized;
    const double rn = regret_report(*task, noise, ds).mean_normalized;
    if (rt < rn) ++wins;
    EXPECT_GT(window, 0);
  }
  EXPECT_EQ(wins, 10);
}

TEST(Csv, RoundTripIsBitExact) {
  const Dataset k = gen_knapsack(5, 3, KnapsackVariant::weighted);
  std::istringstream ks(to_csv(k));
  LoadOptions ko;
  ko.variant = KnapsackVariant::weighted;
  EXPECT_TRUE(same(k, load_csv(ks, ProblemKind::knapsack, ko)));

  const Dataset b = gen_budget(5, 3, 7);
  std::istringstream bs(to_csv(b));
  LoadOptions bo;
  bo.decision_targets = 10;
  const Dataset b2 = load_csv(bs, ProblemKind::budget, bo);
  EXPECT_TRUE(same(b, b2));
  EXPECT_EQ(b2.decision_targets, 10);

  const Dataset p = gen_portfolio(5, 60).dataset;
  std::istringstream ps(to_csv(p));
  const Dataset p2 = load_csv(ps, ProblemKind::portfolio);
  EXPECT_TRUE(same(p, p2));
  EXPECT_EQ(p.sigma, p2.sigma);
  EXPECT_EQ(to_csv(p), to_csv(p2));
}

TEST(Csv, MissingColumnNamesIt) {
  std::istringstream in("instance_id,item_id,f1,f2,f3,f4,f5,f6,f7,f8,value\n0,0,1,1,1,1,1,1,1,1,2\n");
  try {
    load_csv(in, ProblemKind::knapsack);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("weight"), std::string::npos);
  }
}

TEST(Csv, HeaderOnlyIsEmptyDataset) {
  std::istringstream in("date,r1,r2\n");
  EXPECT_THROW(load_csv(in, ProblemKind::portfolio), EmptyDatasetError);
}

TEST(Csv, MalformedCellReportsLocation) {
  std::istringstream in("date,r1,r2\n0,1.0,2.0\n1,abc,2.0\n2,1,1\n");
  try {
    load_csv(in, ProblemKind::portfolio);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), "r1");
  }
}

TEST(Csv, RaggedInstancesAreSchemaErrors) {
  std::string text = "instance_id,website_id,x1,y1\n";
  text += "a,0,0.1,0.1\na,1,0.2,0.2\nb,0,0.3,0.3\n";
  std::istringstream in(text);
  EXPECT_THROW(load_csv(in, ProblemKind::budget), SchemaError);
}

TEST(Split, SizesDeterminismAndPartition) {
  const Dataset ds = gen_knapsack(1, 10, KnapsackVariant::unweighted);
  const auto [tr, te] = split(ds, 0.7, 42);
  EXPECT_EQ(tr.size(), 7u);
  EXPECT_EQ(te.size(), 3u);
  EXPECT_EQ(tr.split, "train");
  EXPECT_EQ(te.split, "test");
  const auto [tr2, te2] = split(ds, 0.7, 42);
  EXPECT_TRUE(same(tr, tr2));
  EXPECT_TRUE(same(te, te2));
  std::multiset<std::string> ids;
  for (const auto& in : tr.instances) ids.insert(in.id);
  for (const auto& in : te.instances) ids.insert(in.id);
  std::multiset<std::string> orig;
  for (const auto& in : ds.instances) orig.insert(in.id);
  EXPECT_EQ(ids, orig);
}

TEST(Split, RejectsBadArguments) {
  const Dataset one = gen_knapsack(1, 1, KnapsackVariant::unweighted);
  EXPECT_THROW(split(one, 0.5, 0), ConfigError);
  const Dataset ds = gen_knapsack(1, 4, KnapsackVariant::unweighted);
  EXPECT_THROW(split(ds, 1.0, 0), ConfigError);
  EXPECT_THROW(split(ds, 0.0, 0), ConfigError);
}
