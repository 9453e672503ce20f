#include <gtest/gtest.h>

#include <cmath>

#include "pgdfl/combiners.hpp"
#include "support.hpp"

using namespace pgdfl;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

GradPair pair_of(const Vector& p, const Vector& d) { return {p, d}; }

CombinerConfig ours(double kappa = 0.0, double epoch = 0.0) {
  CombinerConfig c;
  c.strategy = Strategy::ours;
  c.kappa = kappa;
  c.epoch = epoch;
  return c;
}

double cos_of(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Half-chord form of the angle; acos of the cosine loses digits near 0 and pi.
double angle(const Vector& a, const Vector& b) {
  const Vector ua = a / a.norm(), ub = b / b.norm();
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

// Merged gradient by explicit scalar loops.
std::vector<double> merged_loops(const Vector& p, const Vector& d, double alpha) {
  double np = 0.0, nd = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    np += p[i] * p[i];
    nd += d[i] * d[i];
  }
  np = std::sqrt(np);
  nd = std::sqrt(nd);
  std::vector<double> dir(static_cast<std::size_t>(p.size()));
  double dn = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    dir[static_cast<std::size_t>(i)] = alpha * p[i] / np + d[i] / nd;
    dn += dir[static_cast<std::size_t>(i)] * dir[static_cast<std::size_t>(i)];
  }
  dn = std::sqrt(dn);
  for (auto& x : dir) x *= std::sqrt(np * nd) / dn;
  return dir;
}

}  // namespace

TEST(AlphaDecay, ClosedFormValues) {
  EXPECT_EQ(alpha_decay(-30.0, 50.0, 0.0), 1.0);
  EXPECT_EQ(alpha_decay(1e6, 50.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(alpha_decay(50.0, 50.0, 1.0), 0.5);
  EXPECT_NEAR(alpha_decay(53.0, 50.0, 1.0), 0.047425873177566781, 1e-15);
  EXPECT_THROW(alpha_decay(0.0, 50.0, -1.0), ConfigError);
}

TEST(AlphaDecay, MonotoneBoundedAndOverflowSafe) {
  for (double kappa : {0.0, 0.5, 1.0, 3.0}) {
    double prev = 2.0;
    for (double t = 0.0; t <= 2000.0; t += 0.5) {
      const double a = alpha_decay(t, 50.0, kappa);
      EXPECT_TRUE(std::isfinite(a));
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
      EXPECT_LE(a, prev);
      prev = a;
    }
  }
  // far past the inflection the closed form is exp(-kappa (t - c)) to first order
  EXPECT_NEAR(std::log(alpha_decay(700.0, 50.0, 1.0)), -650.0, 1e-9);
  EXPECT_EQ(alpha_decay(1e6, 50.0, 1.0), 0.0);
}

TEST(Ours, WorkedExample) {
  const auto r = combine_ours(pair_of(v2(4, 0), v2(0, 1)), ours());
  EXPECT_NEAR(r.g[0], std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(r.g[1], std::sqrt(2.0), 1e-14);
  EXPECT_FALSE(r.degenerate());
  EXPECT_EQ(r.alpha_used, 1.0);
}

TEST(Ours, IdenticalGradientsPassThrough) {
  const Vector v = v2(0.3, -1.2);
  const auto r = combine_ours(pair_of(v, v), ours());
  EXPECT_LT((r.g - v).norm(), 1e-15);
}

TEST(Ours, Fallbacks) {
  const Vector z = Vector::Zero(2);
  auto r = combine_ours(pair_of(v2(1, 0), v2(-3, 0)), ours());
  EXPECT_EQ(r.fallback, Fallback::antiparallel);
  EXPECT_EQ(r.g, v2(-3, 0));
  r = combine_ours(pair_of(z, v2(0, 2)), ours());
  EXPECT_EQ(r.fallback, Fallback::zero_pred);
  EXPECT_EQ(r.g, v2(0, 2));
  r = combine_ours(pair_of(v2(5, 1), z), ours());
  EXPECT_EQ(r.fallback, Fallback::zero_dec);
  EXPECT_EQ(r.g, v2(5, 1));
  r = combine_ours(pair_of(z, z), ours());
  EXPECT_TRUE(r.skip());
  EXPECT_EQ(r.g, z);
  // with kappa > 0 past the inflection the antiparallel pair is no longer degenerate
  r = combine_ours(pair_of(v2(1, 0), v2(-3, 0)), ours(1.0, 60.0));
  EXPECT_FALSE(r.degenerate());
  EXPECT_LT(r.g[0], 0.0);
}

TEST(Ours, RejectsMismatchedOrNonFinite) {
  EXPECT_THROW(combine_ours(pair_of(Vector::Ones(2), Vector::Ones(3)), ours()), ConfigError);
  EXPECT_THROW(combine_ours(pair_of(v2(NAN, 0), v2(1, 0)), ours()), NumericError);
}

TEST(Ours, MatchesScalarLoops) {
  oracle::Rand r(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = r.integer(1, 20);
    const Vector p = r.normal_vec(n) * r.uniform(0.01, 10.0);
    const Vector d = r.normal_vec(n) * r.uniform(0.01, 10.0);
    const double kappa = r.uniform(0.0, 2.0);
    const double t = r.uniform(0.0, 100.0);
    const auto res = combine_ours(pair_of(p, d), ours(kappa, t));
    const double alpha = std::pow(1.0 + std::exp(t - 50.0), -kappa);
    const auto ref = merged_loops(p, d, alpha);
    for (Index i = 0; i < n; ++i) EXPECT_NEAR(res.g[i], ref[static_cast<std::size_t>(i)], 1e-11 * (1.0 + res.g.norm()));
  }
}

TEST(Ours, NeverConflictsWithDecisionGradient) {
  oracle::Rand r(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = r.integer(2, 30);
    const Vector p = r.normal_vec(n);
    const Vector d = r.normal_vec(n);
    const double kappa = trial % 3 == 0 ? 0.0 : r.uniform(0.0, 3.0);
    const auto res = combine_ours(pair_of(p, d), ours(kappa, r.uniform(0.0, 100.0)));
    EXPECT_GE(cos_of(res.g, d), -1e-12);
    EXPECT_NEAR(res.g.norm(), std::sqrt(p.norm() * d.norm()), 1e-12 * res.g.norm());
  }
}

TEST(Ours, BisectsWhenKappaIsZero) {
  oracle::Rand r(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = r.integer(2, 30);
    const Vector p = r.normal_vec(n);
    const Vector d = r.normal_vec(n);
    const Vector g = combine_ours(pair_of(p, d), ours()).g;
    EXPECT_GE(cos_of(g, p), -1e-12);
    EXPECT_NEAR(angle(g, p), angle(g, d), 1e-9);
  }
}

TEST(Ours, ScalingPredictionGradientOnlyChangesNorm) {
  oracle::Rand r(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector p = r.normal_vec(5), d = r.normal_vec(5);
    const double s = r.uniform(0.01, 100.0);
    const Vector g1 = combine_ours(pair_of(p, d), ours()).g;
    const Vector g2 = combine_ours(pair_of(s * p, d), ours()).g;
    EXPECT_LT((g2 / g2.norm() - g1 / g1.norm()).norm(), 1e-12);
    EXPECT_NEAR(g2.norm(), std::sqrt(s) * g1.norm(), 1e-12 * g2.norm());
  }
}

TEST(Ours, LargeKappaFollowsDecisionGradient) {
  oracle::Rand r(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector p = r.normal_vec(6), d = r.normal_vec(6);
    const Vector g = combine_ours(pair_of(p, d), ours(50.0, 60.0)).g;
    EXPECT_LT(angle(g, d), 1e-3);
  }
}

TEST(Convex, EndpointsAndMidpoint) {
  const GradPair gp = pair_of(v2(2, 0), v2(0, 2));
  EXPECT_EQ(combine_convex(gp, 0.0), v2(2, 0));
  EXPECT_EQ(combine_convex(gp, 1.0), v2(0, 2));
  EXPECT_EQ(combine_convex(gp, 0.5), v2(1, 1));
  EXPECT_THROW(combine_convex(gp, 1.5), ConfigError);
}

TEST(PcGrad, Examples) {
  EXPECT_EQ(combine_pcgrad(pair_of(v2(1, 0), v2(0, 3))), v2(1, 3));
  const Vector g = combine_pcgrad(pair_of(v2(1, 0), v2(-1, 1)));
  EXPECT_NEAR(g[0], 0.5, 1e-15);
  EXPECT_NEAR(g[1], 1.5, 1e-15);
  EXPECT_LT(combine_pcgrad(pair_of(v2(1, -2), v2(-1, 2))).norm(), 1e-15);
  EXPECT_EQ(combine_pcgrad(pair_of(Vector::Zero(2), v2(1, 2))), v2(1, 2));
}

TEST(PcGrad, ConflictProjectionsAreOrthogonal) {
  oracle::Rand r(6);
  int conflicts = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Vector p = r.normal_vec(8), d = r.normal_vec(8);
    if (p.dot(d) >= 0.0) {
      EXPECT_LT((combine_pcgrad(pair_of(p, d)) - (p + d)).norm(), 1e-14);
      continue;
    }
    ++conflicts;
    // each surgery step rebuilt from its own definition
    const Vector pp = p - p.dot(d) / d.squaredNorm() * d;
    const Vector dp = d - d.dot(p) / p.squaredNorm() * p;
    EXPECT_LT(std::abs(pp.dot(d)), 1e-10 * p.norm() * d.norm());
    EXPECT_LT(std::abs(dp.dot(p)), 1e-10 * p.norm() * d.norm());
    EXPECT_LT((combine_pcgrad(pair_of(p, d)) - (pp + dp)).norm(), 1e-12);
  }
  EXPECT_GT(conflicts, 100);
}

TEST(Mgda, Examples) {
  EXPECT_EQ(combine_mgda(pair_of(v2(1, 0), v2(0, 1))), v2(0.5, 0.5));
  EXPECT_EQ(combine_mgda(pair_of(v2(2, 0), v2(1, 0))), v2(1, 0));
  EXPECT_LT(combine_mgda(pair_of(v2(1, 0), v2(-1, 0))).norm(), 1e-15);
  EXPECT_EQ(combine_mgda(pair_of(v2(1, 1), v2(1, 1))), v2(1, 1));
}

TEST(Mgda, MinimumNormMatchesGridSearch) {
  oracle::Rand r(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = r.integer(1, 4);
    const Vector p = r.normal_vec(n), d = r.normal_vec(n);
    double best = INFINITY;
    for (int k = 0; k <= 10000; ++k) {
      const double lam = k * 1e-4;
      best = std::min(best, (lam * p + (1.0 - lam) * d).norm());
    }
    const double got = combine_mgda(pair_of(p, d)).norm();
    EXPECT_LE(got, best + 1e-12);
    EXPECT_GE(got, best - 1e-4 * (p - d).norm());
    // zero output exactly when the hull reaches the origin
    const bool hull_has_zero = n == 1 ? p[0] * d[0] <= 0.0 : false;
    if (hull_has_zero) {
      EXPECT_LT(got, 1e-12);
    }
    if (!hull_has_zero && best > 1e-3) {
      EXPECT_GT(got, 0.0);
    }
  }
}

TEST(Dcgd, Examples) {
  const Vector v = v2(1.0, 2.0);
  EXPECT_LT((combine_dcgd(pair_of(v, v)) - 2.0 * v).norm(), 1e-14);
  EXPECT_EQ(combine_dcgd(pair_of(v2(1, -1), v2(-1, 1))), v2(-1, 1));
}

TEST(Dcgd, DualConeDirection) {
  oracle::Rand r(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector p = r.normal_vec(6), d = r.normal_vec(6);
    const Vector g = combine_dcgd(pair_of(p, d));
    EXPECT_GE(g.dot(d), -1e-12 * g.norm() * d.norm());
    const Vector s = p + d;
    const Vector b = (s / s.norm() + d / d.norm()).normalized();
    if (s.dot(b) > 0.0) {
      EXPECT_LT((g - s.dot(b) * b).norm(), 1e-12 * (1.0 + g.norm()));
    }
  }
}

TEST(SelectUpdate, DispatchesByStrategy) {
  const GradPair gp = pair_of(v2(3, 1), v2(-1, 2));
  CombinerConfig c;
  c.strategy = Strategy::pfl;
  EXPECT_EQ(select_update(gp, c).g, gp.g_pred);
  c.strategy = Strategy::dfl;
  EXPECT_EQ(select_update(gp, c).g, gp.g_dec);
  c.strategy = Strategy::convex;
  c.beta = 0.25;
  EXPECT_EQ(select_update(gp, c).g, combine_convex(gp, 0.25));
  c.strategy = Strategy::pcgrad;
  EXPECT_EQ(select_update(gp, c).g, combine_pcgrad(gp));
  c.strategy = Strategy::mgda;
  EXPECT_EQ(select_update(gp, c).g, combine_mgda(gp));
  c.strategy = Strategy::dcgd;
  EXPECT_EQ(select_update(gp, c).g, combine_dcgd(gp));
  c.strategy = Strategy::ours;
  EXPECT_EQ(select_update(gp, c).g, combine_ours(gp, c).g);
}

TEST(SelectUpdate, ParsesTagsAndRejectsUnknown) {
  EXPECT_EQ(parse_strategy("mgda"), Strategy::mgda);
  EXPECT_EQ(to_string(parse_strategy("ours")), "ours");
  EXPECT_THROW(parse_strategy("adam"), ConfigError);
  CombinerConfig c;
  c.kappa = -1.0;
  EXPECT_THROW(select_update(pair_of(v2(1, 0), v2(0, 1)), c), ConfigError);
  c.kappa = 0.0;
  c.inflection = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}
