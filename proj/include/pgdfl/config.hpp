#pragma once

// Experiment configuration: problem and method tags, training
// hyperparameters, and the flat key=value text form shared by config files
// and run manifests.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pgdfl/combiners.hpp"
#include "pgdfl/csv.hpp"
#include "pgdfl/data.hpp"
#include "pgdfl/decision.hpp"
#include "pgdfl/errors.hpp"

namespace pgdfl {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(std::string_view key, std::string_view s) {
  const auto v = csv::parse_double(trim(s));
  if (!v) throw ConfigError("'" + std::string(key) + "': not a number: '" + std::string(s) + "'");
  return *v;
}

inline long long to_integer(std::string_view key, std::string_view s) {
  const double v = to_double(key, s);
  if (v != std::floor(v) || std::abs(v) > 9e15) {
    throw ConfigError("'" + std::string(key) + "': not an integer: '" + std::string(s) + "'");
  }
  return static_cast<long long>(v);
}

}  // namespace detail

/// "0-9", "0,3,5" or mixtures such as "0-4,7".
inline std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : detail::split_on(text, ',')) {
    if (part.empty()) throw ConfigError("seeds: empty entry in '" + std::string(text) + "'");
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      const long long s = detail::to_integer("seeds", part);
      if (s < 0) throw ConfigError("seeds: negative seed");
      seeds.push_back(static_cast<std::uint64_t>(s));
      continue;
    }
    const long long a = detail::to_integer("seeds", part.substr(0, dash));
    const long long b = detail::to_integer("seeds", part.substr(dash + 1));
    if (a < 0 || b < a) throw ConfigError("seeds: bad range '" + part + "'");
    for (long long s = a; s <= b; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (seeds.empty()) throw ConfigError("seeds: no seeds given");
  return seeds;
}

inline std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    std::size_t j = i;
    while (j + 1 < seeds.size() && seeds[j + 1] == seeds[j] + 1) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(seeds[i]);
    if (j > i) out += '-' + std::to_string(seeds[j]);
    i = j;
  }
  return out;
}

/// Problem variant: knapsack weighting and capacities, or the budget fake-target count.
struct Variant {
  KnapsackVariant knapsack = KnapsackVariant::unweighted;
  std::vector<double> capacities;
  Index fake_targets = 0;
};

/// knapsack: "unweighted" or "weighted", optionally "@C" for one capacity
/// (default capacities {25,35,45} and {30,90,150}); budget: "0", "500" or
/// "fake500"; portfolio: "" or "default".
inline Variant parse_variant(ProblemKind kind, std::string_view tag) {
  Variant v;
  const std::string t = detail::trim(tag);
  switch (kind) {
    case ProblemKind::knapsack: {
      const auto at = t.find('@');
      const std::string base = t.substr(0, at);
      if (base.empty() || base == "unweighted") {
        v.knapsack = KnapsackVariant::unweighted;
        v.capacities = {25.0, 35.0, 45.0};
      } else if (base == "weighted") {
        v.knapsack = KnapsackVariant::weighted;
        v.capacities = {30.0, 90.0, 150.0};
      } else {
        throw ConfigError("unknown knapsack variant '" + t + "' (expected unweighted or weighted)");
      }
      if (at != std::string::npos) {
        const long long c = detail::to_integer("variant capacity", t.substr(at + 1));
        if (c <= 0) throw ConfigError("knapsack capacity must be a positive integer");
        v.capacities = {static_cast<double>(c)};
      }
      return v;
    }
    case ProblemKind::budget: {
      std::string n = t;
      if (n.rfind("fake", 0) == 0) n = n.substr(4);
      if (n.empty()) n = "0";
      const long long f = detail::to_integer("variant", n);
      if (f < 0) throw ConfigError("budget fake-target count must be nonnegative");
      v.fake_targets = static_cast<Index>(f);
      return v;
    }
    case ProblemKind::portfolio:
      if (!t.empty() && t != "default") throw ConfigError("portfolio has no variants, got '" + t + "'");
      return v;
  }
  return v;
}

/// Canonical variant tag used in file names and summaries.
inline std::string variant_tag(ProblemKind kind, const Variant& v) {
  switch (kind) {
    case ProblemKind::knapsack: {
      std::string s = v.knapsack == KnapsackVariant::weighted ? "weighted" : "unweighted";
      if (v.capacities.size() == 1) s += "@" + std::to_string(std::llround(v.capacities[0]));
      return s;
    }
    case ProblemKind::budget: return "fake" + std::to_string(v.fake_targets);
    case ProblemKind::portfolio: return "default";
  }
  return "?";
}

/// A method tag and its hyperparameters. Labels: pfl, dfl, pcgrad, mgda,
/// dcgd, convex_b<beta>, ours_k<kappa>.
struct MethodSpec {
  Strategy strategy = Strategy::ours;
  double beta = 0.5;
  double kappa = 0.0;

  std::string label() const {
    switch (strategy) {
      case Strategy::convex: return "convex_b" + csv::format(beta);
      case Strategy::ours: return "ours_k" + csv::format(kappa);
      default: return std::string(to_string(strategy));
    }
  }
};

/// Accepts a bare strategy tag (hyperparameters from `defaults`) or a label.
inline MethodSpec parse_method(std::string_view tag, const MethodSpec& defaults = {}) {
  const std::string t = detail::trim(tag);
  MethodSpec m = defaults;
  if (t.rfind("convex_b", 0) == 0) {
    m.strategy = Strategy::convex;
    m.beta = detail::to_double("method", t.substr(8));
  } else if (t.rfind("ours_k", 0) == 0) {
    m.strategy = Strategy::ours;
    m.kappa = detail::to_double("method", t.substr(6));
  } else {
    m.strategy = parse_strategy(t);
  }
  return m;
}

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::knapsack;
  std::string variant;
  MethodSpec method;
  double inflection = 50.0;
  int epochs = 100;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double lr = 1e-3;
  double gamma = 0.1;
  std::string data;            // CSV path; empty means synthetic
  std::uint64_t data_seed = 0;  // synthetic generator seed
  std::size_t n_instances = 0;  // 0 picks the per-problem default
  double train_frac = 0.7;
  Index hidden = 0;             // 0 picks 10 (knapsack, budget) or 500 (portfolio)
  double lambda = 1.0;          // portfolio risk aversion
  double budget = 2.0;          // budget allocation: websites selected
  std::vector<int> checkpoints{2};
  std::string out;

  Variant resolved_variant() const { return parse_variant(problem, variant); }

  Index hidden_width() const {
    if (hidden > 0) return hidden;
    return problem == ProblemKind::portfolio ? 500 : 10;
  }

  std::size_t instance_count() const {
    if (n_instances > 0) return n_instances;
    switch (problem) {
      case ProblemKind::knapsack: return 200;
      case ProblemKind::budget: return 100;
      case ProblemKind::portfolio: return 300;
    }
    return 100;
  }

  CombinerConfig combiner() const {
    CombinerConfig c;
    c.strategy = method.strategy;
    c.beta = method.beta;
    c.kappa = method.kappa;
    c.inflection = inflection;
    return c;
  }

  void validate() const {
    resolved_variant();
    combiner().validate();
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
    if (hidden < 0) throw ConfigError("hidden must be nonnegative");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(budget >= 1.0)) throw ConfigError("budget must be at least 1");
    for (int c : checkpoints)
      if (c < 0) throw ConfigError("checkpoint epochs must be nonnegative");
  }
};

/// Applies one key=value setting.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto integer = [&](long long lo) {
    const long long v = detail::to_integer(key, value);
    if (v < lo) throw ConfigError("'" + key + "' must be at least " + std::to_string(lo));
    return v;
  };
  if (key == "problem") {
    cfg.problem = parse_problem(value);
  } else if (key == "variant") {
    cfg.variant = value;
  } else if (key == "method") {
    cfg.method = parse_method(value, cfg.method);
  } else if (key == "beta") {
    cfg.method.beta = detail::to_double(key, value);
  } else if (key == "kappa") {
    cfg.method.kappa = detail::to_double(key, value);
  } else if (key == "inflection") {
    cfg.inflection = detail::to_double(key, value);
  } else if (key == "epochs") {
    cfg.epochs = static_cast<int>(integer(0));
  } else if (key == "seeds") {
    cfg.seeds = parse_seeds(value);
  } else if (key == "lr") {
    cfg.lr = detail::to_double(key, value);
  } else if (key == "gamma") {
    cfg.gamma = detail::to_double(key, value);
  } else if (key == "data") {
    cfg.data = value;
  } else if (key == "data_seed") {
    cfg.data_seed = static_cast<std::uint64_t>(integer(0));
  } else if (key == "n_instances") {
    cfg.n_instances = static_cast<std::size_t>(integer(0));
  } else if (key == "train_frac") {
    cfg.train_frac = detail::to_double(key, value);
  } else if (key == "hidden") {
    cfg.hidden = static_cast<Index>(integer(0));
  } else if (key == "lambda") {
    cfg.lambda = detail::to_double(key, value);
  } else if (key == "budget") {
    cfg.budget = detail::to_double(key, value);
  } else if (key == "checkpoints") {
    cfg.checkpoints.clear();
    if (!value.empty())
      for (const auto& p : detail::split_on(value, ','))
        cfg.checkpoints.push_back(static_cast<int>(detail::to_integer(key, p)));
  } else if (key == "out") {
    cfg.out = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Flat key=value text; '#' starts a comment. Later lines override earlier ones.
inline std::map<std::string, std::string> parse_kv(std::istream& in, const std::string& source = "config") {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source + ": expected key=value", lineno, "");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    if (key.empty()) throw ParseError(source + ": empty key", lineno, "");
    kv[key] = detail::trim(t.substr(eq + 1));
  }
  return kv;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  for (const auto& [k, v] : parse_kv(in, path)) apply_setting(base, k, v);
  return base;
}

/// Every field, in a fixed order, such that load_config reproduces the config.
inline std::string to_kv(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "problem=" << to_string(cfg.problem) << '\n'
     << "variant=" << cfg.variant << '\n'
     << "method=" << to_string(cfg.method.strategy) << '\n'
     << "beta=" << csv::format(cfg.method.beta) << '\n'
     << "kappa=" << csv::format(cfg.method.kappa) << '\n'
     << "inflection=" << csv::format(cfg.inflection) << '\n'
     << "epochs=" << cfg.epochs << '\n'
     << "seeds=" << format_seeds(cfg.seeds) << '\n'
     << "lr=" << csv::format(cfg.lr) << '\n'
     << "gamma=" << csv::format(cfg.gamma) << '\n'
     << "data=" << cfg.data << '\n'
     << "data_seed=" << cfg.data_seed << '\n'
     << "n_instances=" << cfg.instance_count() << '\n'
     << "train_frac=" << csv::format(cfg.train_frac) << '\n'
     << "hidden=" << cfg.hidden_width() << '\n'
     << "lambda=" << csv::format(cfg.lambda) << '\n'
     << "budget=" << csv::format(cfg.budget) << '\n'
     << "checkpoints=";
  for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) os << (i ? "," : "") << cfg.checkpoints[i];
  os << '\n' << "out=" << cfg.out << '\n';
  return os.str();
}

}  // namespace pgdfl
