#pragma once

// Update rules that merge the prediction-loss gradient and the decision-loss
// gradient into one parameter update.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "pgdfl/errors.hpp"
#include "pgdfl/nn.hpp"

namespace pgdfl {

struct GradPair {
  Vector g_pred;
  Vector g_dec;

  void validate() const {
    if (g_pred.size() != g_dec.size()) throw ConfigError("GradPair: gradient lengths differ");
    if (!g_pred.allFinite() || !g_dec.allFinite()) throw NumericError("GradPair: non-finite gradient");
  }
};

enum class Strategy { pfl, dfl, convex, pcgrad, mgda, dcgd, ours };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::pfl: return "pfl";
    case Strategy::dfl: return "dfl";
    case Strategy::convex: return "convex";
    case Strategy::pcgrad: return "pcgrad";
    case Strategy::mgda: return "mgda";
    case Strategy::dcgd: return "dcgd";
    case Strategy::ours: return "ours";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view tag) {
  for (Strategy s : {Strategy::pfl, Strategy::dfl, Strategy::convex, Strategy::pcgrad, Strategy::mgda,
                     Strategy::dcgd, Strategy::ours}) {
    if (tag == to_string(s)) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(tag) +
                    "' (expected pfl, dfl, convex, pcgrad, mgda, dcgd or ours)");
}

struct CombinerConfig {
  Strategy strategy = Strategy::ours;
  double beta = 0.5;
  double kappa = 0.0;
  double inflection = 50.0;
  double epoch = 0.0;
  double eps_degenerate = 1e-10;

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    if (!(kappa >= 0.0)) throw ConfigError("kappa must be nonnegative");
    if (!(inflection > 0.0)) throw ConfigError("inflection must be positive");
  }
};

/// Why a combiner fell back to a rule other than its main formula.
enum class Fallback { none, zero_pred, zero_dec, both_zero, antiparallel };

struct CombineResult {
  Vector g;
  double alpha_used = 1.0;
  Fallback fallback = Fallback::none;

  bool degenerate() const noexcept { return fallback != Fallback::none; }
  /// Both gradients vanished: the caller should skip the step.
  bool skip() const noexcept { return fallback == Fallback::both_zero; }
};

/// (1 + e^(t - c))^(-kappa), evaluated without overflow for large t - c.
inline double alpha_decay(double t, double c, double kappa) {
  if (!(kappa >= 0.0)) throw ConfigError("alpha_decay: kappa must be nonnegative");
  if (kappa == 0.0) return 1.0;
  const double x = t - c;
  if (x < 700.0) return std::pow(1.0 + std::exp(x), -kappa);
  return std::exp(-kappa * (x + std::log1p(std::exp(-x))));
}

inline CombineResult combine_ours(const GradPair& gp, const CombinerConfig& cfg) {
  gp.validate();
  CombineResult r;
  r.alpha_used = alpha_decay(cfg.epoch, cfg.inflection, cfg.kappa);
  // stableNorm: a huge but finite gradient must not overflow to a zero direction
  const double np = gp.g_pred.stableNorm();
  const double nd = gp.g_dec.stableNorm();
  if (np == 0.0 && nd == 0.0) {
    r.g = Vector::Zero(gp.g_dec.size());
    r.fallback = Fallback::both_zero;
    return r;
  }
  if (np == 0.0) {
    r.g = gp.g_dec;
    r.fallback = Fallback::zero_pred;
    return r;
  }
  if (nd == 0.0) {
    r.g = gp.g_pred;
    r.fallback = Fallback::zero_dec;
    return r;
  }
  const Vector dir = r.alpha_used * (gp.g_pred / np) + gp.g_dec / nd;
  const double dn = dir.norm();
  if (dn < cfg.eps_degenerate) {
    r.g = gp.g_dec;
    r.fallback = Fallback::antiparallel;
    return r;
  }
  const double m = std::sqrt(np) * std::sqrt(nd);
  r.g = (m / dn) * dir;
  return r;
}

inline Vector combine_convex(const GradPair& gp, double beta) {
  gp.validate();
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("combine_convex: beta must lie in [0, 1]");
  return (1.0 - beta) * gp.g_pred + beta * gp.g_dec;
}

/// Gradient surgery: on conflict, each gradient drops its component along the other.
inline Vector combine_pcgrad(const GradPair& gp) {
  gp.validate();
  const double pp = gp.g_pred.squaredNorm();
  const double dd = gp.g_dec.squaredNorm();
  if (pp == 0.0) return gp.g_dec;
  if (dd == 0.0) return gp.g_pred;
  const double pd = gp.g_pred.dot(gp.g_dec);
  if (pd >= 0.0) return gp.g_pred + gp.g_dec;
  const Vector pred_proj = gp.g_pred - (pd / dd) * gp.g_dec;
  const Vector dec_proj = gp.g_dec - (pd / pp) * gp.g_pred;
  return pred_proj + dec_proj;
}

/// Weight on g_pred of the minimum-norm point of the segment [g_dec, g_pred].
inline double mgda_weight(const GradPair& gp) {
  const Vector diff = gp.g_pred - gp.g_dec;
  const double dd = diff.squaredNorm();
  if (dd == 0.0) return 0.5;
  return std::clamp(-diff.dot(gp.g_dec) / dd, 0.0, 1.0);
}

inline Vector combine_mgda(const GradPair& gp) {
  gp.validate();
  const double lam = mgda_weight(gp);
  return lam * gp.g_pred + (1.0 - lam) * gp.g_dec;
}

/// Dual-cone update as drawn for two gradients: the summed gradient projected
/// onto the bisector of its own direction and the decision gradient. When the
/// sum points exactly against g_dec, g_dec is projected into the dual cone
/// instead (it is returned unchanged when the two gradients do not conflict).
inline Vector combine_dcgd(const GradPair& gp) {
  gp.validate();
  const Vector s = gp.g_pred + gp.g_dec;
  const double ns = s.norm();
  const double nd = gp.g_dec.norm();
  if (ns == 0.0 || nd == 0.0) return gp.g_dec;
  const Vector bis = s / ns + gp.g_dec / nd;
  const double nb = bis.norm();
  if (nb > 1e-12) {
    const Vector b = bis / nb;
    const double sb = s.dot(b);
    if (sb > 0.0) return sb * b;
  }
  const double pp = gp.g_pred.squaredNorm();
  const double pd = gp.g_pred.dot(gp.g_dec);
  if (pd >= 0.0 || pp == 0.0) return gp.g_dec;
  return gp.g_dec - (pd / pp) * gp.g_pred;
}

inline CombineResult select_update(const GradPair& gp, const CombinerConfig& cfg) {
  cfg.validate();
  gp.validate();
  CombineResult r;
  switch (cfg.strategy) {
    case Strategy::pfl: r.g = gp.g_pred; break;
    case Strategy::dfl: r.g = gp.g_dec; break;
    case Strategy::convex: r.g = combine_convex(gp, cfg.beta); break;
    case Strategy::pcgrad: r.g = combine_pcgrad(gp); break;
    case Strategy::mgda: r.g = combine_mgda(gp); break;
    case Strategy::dcgd: r.g = combine_dcgd(gp); break;
    case Strategy::ours: return combine_ours(gp, cfg);
  }
  return r;
}

}  // namespace pgdfl
