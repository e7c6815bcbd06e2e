#pragma once

// Success-rate evaluation of a fixed policy on grid specs, over every
// horizon up to the maximum, with Wilson score intervals.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "robust_entropy/error.hpp"
#include "robust_entropy/gridworld.hpp"
#include "robust_entropy/instances.hpp"
#include "robust_entropy/training.hpp"

namespace robust_entropy {

/// Two-sided 96% normal quantile.
inline constexpr double kWilsonZ = 2.054;

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = kWilsonZ) {
  if (n == 0) return {};
  const double nn = static_cast<double>(n), p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// One-sided sign-test p-value: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
inline double sign_test_pvalue(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (std::size_t i = wins; i <= n; ++i)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, p);
}

struct SuccessPoint {
  std::size_t horizon = 0;
  double success = 0.0;
  Interval ci;
};

struct SpecEvaluation {
  std::string spec_id;
  std::size_t episodes = 0;
  /// successes[h - 1] = episodes reaching the goal within h steps.
  std::vector<std::size_t> successes;

  double success_at(std::size_t horizon) const {
    if (horizon == 0 || horizon > successes.size()) fail(ErrorKind::out_of_range, "horizon outside the evaluated range");
    return static_cast<double>(successes[horizon - 1]) / static_cast<double>(episodes);
  }

  std::vector<SuccessPoint> curve() const {
    std::vector<SuccessPoint> out;
    for (std::size_t h = 1; h <= successes.size(); ++h)
      out.push_back({h, success_at(h), wilson_interval(successes[h - 1], episodes)});
    return out;
  }
};

/// Episode e on spec i draws from stream(seed, i * 2^32 + e), so results do not
/// depend on evaluation order.
inline std::vector<SpecEvaluation> evaluate(const Policy& policy,
                                            const std::vector<std::pair<std::string, GridSpec>>& specs,
                                            std::size_t episodes, std::size_t horizon, std::uint64_t seed) {
  if (episodes == 0 || horizon == 0) fail(ErrorKind::invalid_input, "episodes and horizon must be positive");
  std::vector<SpecEvaluation> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const GridSpec& spec = specs[i].second;
    const Mdp mdp = build_grid(spec, 0.5, false);
    if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
      fail(ErrorKind::invalid_input, "policy does not match grid '" + specs[i].first + "'");
    SpecEvaluation ev{specs[i].first, episodes, std::vector<std::size_t>(horizon, 0)};
    const std::size_t start = spec.index(spec.start), goal = spec.index(spec.goal);
    for (std::size_t e = 0; e < episodes; ++e) {
      Rng rng = stream(seed, (static_cast<std::uint64_t>(i) << 32) | e);
      const Trajectory t = rollout(mdp, start, goal, policy, horizon, rng);
      if (!t.reached_goal) continue;
      for (std::size_t h = t.length(); h <= horizon; ++h) ++ev.successes[h - 1];
    }
    out.push_back(std::move(ev));
  }
  return out;
}

inline std::string evaluation_csv(const std::vector<SpecEvaluation>& evals) {
  std::string csv = "spec_id,horizon,success,ci_low,ci_high\n";
  char buf[160];
  for (const auto& ev : evals)
    for (const auto& pt : ev.curve()) {
      std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g\n", ev.spec_id.c_str(), pt.horizon, pt.success,
                    pt.ci.low, pt.ci.high);
      csv += buf;
    }
  return csv;
}

}  // namespace robust_entropy
