#pragma once

// Randomized property suites for the robustness identities. Each suite is a
// pure function of (instances, seed) and reports counts and worst errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "robust_entropy/instances.hpp"
#include "robust_entropy/kernel_robustness.hpp"
#include "robust_entropy/reward_adversary.hpp"
#include "robust_entropy/risk_averse.hpp"

namespace robust_entropy {

struct SuiteReport {
  std::string name;
  std::size_t instances = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
  /// Suite-specific figures (limits, realized quantities).
  nlohmann::json details = nlohmann::json::object();
  std::vector<std::string> failure_notes;

  bool passed() const { return failures == 0 && checks > 0; }

  void check(bool ok, const std::string& note) {
    ++checks;
    if (ok) return;
    ++failures;
    if (failure_notes.size() < 20) failure_notes.push_back(note);
  }
  void error(double e) { max_error = std::max(max_error, e); }
};

inline nlohmann::json to_json(const SuiteReport& r) {
  return {{"suite", r.name},         {"passed", r.passed()},   {"instances", r.instances},
          {"checks", r.checks},      {"failures", r.failures}, {"max_error", r.max_error},
          {"details", r.details},    {"failure_notes", r.failure_notes}};
}

inline constexpr Regularizer kRewardRows[] = {Regularizer::policy, Regularizer::state, Regularizer::state_action};

namespace detail {

struct RandomInstance {
  Mdp mdp;
  Policy policy;
  UncertaintySpec spec;
};

/// S in 2..6, A in 1..3, gamma in {0.5, 0.9}, alpha log-uniform in [0.05, 5],
/// epsilon uniform in [0.01, 1].
inline RandomInstance random_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> states(2, 6), actions(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t S = states(rng), A = actions(rng);
  const double gamma = unit(rng) < 0.5 ? 0.5 : 0.9;
  RandomInstance out;
  out.mdp = random_mdp(S, A, gamma, rng);
  out.policy = random_policy(S, A, rng, 1e-2);
  out.spec.alpha = 0.05 * std::pow(100.0, unit(rng));
  out.spec.epsilon = 0.01 + 0.99 * unit(rng);
  return out;
}

}  // namespace detail

/// Numerical adversary against the closed-form robust return, every row.
inline SuiteReport duality_suite(std::size_t instances, std::uint64_t seed, double tolerance = 1e-4) {
  SuiteReport rep;
  rep.name = "reward_duality";
  rep.instances = instances;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = stream(seed, i);
    auto inst = detail::random_instance(rng);
    for (Regularizer reg : kRewardRows) {
      inst.spec.regularizer = reg;
      const std::string tag = "instance " + std::to_string(i) + " " + to_string(reg);
      try {
        const double numeric = adversarial_minimize(inst.mdp, inst.policy, inst.spec).value;
        const double closed = robust_return_closed_form(inst.mdp, inst.policy, inst.spec);
        rep.error(std::abs(numeric - closed));
        rep.check(std::abs(numeric - closed) < tolerance, tag + ": |numeric - closed| = " +
                                                              std::to_string(std::abs(numeric - closed)));
      } catch (const Error& e) {
        rep.check(false, tag + ": " + e.what());
      }
    }
  }
  rep.details["tolerance"] = tolerance;
  return rep;
}

/// Closed-form worst-case rewards: value equals the numerical minimum and the
/// constraint is saturated.
inline SuiteReport worst_case_suite(std::size_t instances, std::uint64_t seed, double value_tol = 1e-4,
                                    double saturation_tol = 1e-8) {
  SuiteReport rep;
  rep.name = "worst_case_reward";
  rep.instances = instances;
  double max_saturation = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = stream(seed, 1000000 + i);
    auto inst = detail::random_instance(rng);
    const Occupancy occ = compute_occupancy(inst.mdp, inst.policy);
    for (Regularizer reg : kRewardRows) {
      inst.spec.regularizer = reg;
      const std::string tag = "instance " + std::to_string(i) + " " + to_string(reg);
      try {
        const auto pert = worst_case_reward(inst.mdp, inst.policy, inst.spec);
        double value = 0.0;
        for (std::size_t k = 0; k < occ.rho.size(); ++k) value += occ.rho[k] * pert.r_tilde[k];
        const double numeric = adversarial_minimize(inst.mdp, inst.policy, inst.spec).value;
        const double saturation =
            std::abs(constraint_value(inst.mdp, inst.policy, reg, inst.spec.alpha, pert.delta) -
                     constraint_bound(inst.spec, inst.mdp.n_states, inst.mdp.n_actions));
        rep.error(std::abs(value - numeric));
        max_saturation = std::max(max_saturation, saturation);
        rep.check(std::abs(value - numeric) < value_tol, tag + ": value gap " + std::to_string(value - numeric));
        rep.check(saturation < saturation_tol, tag + ": saturation " + std::to_string(saturation));
      } catch (const Error& e) {
        rep.check(false, tag + ": " + e.what());
      }
    }
  }
  rep.details["max_saturation"] = max_saturation;
  return rep;
}

/// Nesting in the temperature, agreement with the limit sets at extreme
/// temperatures, and nesting of the two-state boundary polylines.
inline SuiteReport temperature_suite(std::size_t pairs, std::uint64_t seed) {
  SuiteReport rep;
  rep.name = "temperature_nesting";
  rep.instances = pairs;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::size_t members = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    Rng rng = stream(seed, i);
    auto inst = detail::random_instance(rng);
    const std::size_t n = inst.mdp.n_states * inst.mdp.n_actions;
    numvec delta(n);
    for (auto& x : delta) x = -2.0 + 4.0 * unit(rng);
    const auto pert = RewardPerturbation::from_delta(inst.mdp, delta);
    const double a1 = std::pow(10.0, -3.0 + 6.0 * unit(rng));
    const double a2 = std::pow(10.0, std::log10(a1) + (3.0 - std::log10(a1)) * unit(rng));
    const Regularizer reg = kRewardRows[i % 3];
    const bool in1 = membership(inst.mdp, inst.policy, {reg, a1, inst.spec.epsilon}, pert);
    if (!in1) continue;
    ++members;
    rep.check(membership(inst.mdp, inst.policy, {reg, a2, inst.spec.epsilon}, pert),
              "pair " + std::to_string(i) + " leaves the set as alpha grows");
  }
  rep.details["nesting_members"] = members;

  // Two-state setting r_pi = (1, 0), eps = 1/2; samples with slack above 1e-3.
  Mdp two = Mdp::zeros(2, 1, 0.9);
  two.P(0, 0, 0) = two.P(1, 0, 1) = 1.0;
  two.r(0, 0) = 1.0;
  two.initial_dist = {0.5, 0.5};
  const Policy one = Policy::uniform(2, 1);
  const double eps = 0.5;
  std::size_t compared = 0;
  Rng rng = stream(seed, ~std::uint64_t{0});
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto pert = RewardPerturbation::from_delta(two, {-1.0 + 2.0 * unit(rng), -1.0 + 2.0 * unit(rng)});
    const double mean = 0.5 * (pert.delta[0] + pert.delta[1]);
    const double mx = std::max(pert.delta[0], pert.delta[1]);
    if (std::abs(mean - eps) > 1e-3) {
      ++compared;
      rep.check(membership(two, one, {Regularizer::state, 1e3, eps}, pert) ==
                    limit_set_membership(two, one, eps, LimitSet::alpha_inf, pert),
                "large-temperature disagreement at sample " + std::to_string(i));
    }
    if (std::abs(mx - eps) > 1e-3) {
      ++compared;
      rep.check(membership(two, one, {Regularizer::state, 1e-3, eps}, pert) ==
                    limit_set_membership(two, one, eps, LimitSet::alpha_zero, pert),
                "small-temperature disagreement at sample " + std::to_string(i));
    }
  }
  rep.details["limit_comparisons"] = compared;

  // Polylines: no vertex of a larger-temperature boundary lies strictly inside
  // the polygon of a smaller-temperature set.
  const numvec r_pi = {1.0, 0.0};
  const std::vector<double> alphas = {0.1, 0.3, 1.0, 3.0, 10.0};
  const std::size_t samples = 400;
  auto polygon = [&](double alpha) {
    std::vector<std::pair<double, double>> poly;
    for (const auto& p : two_state_boundary(r_pi, eps, alpha, samples)) poly.push_back({p.r1, p.r2});
    const double big = 1e6;
    poly.push_back({poly.back().first, big});
    poly.push_back({big, big});
    poly.push_back({big, poly.front().second});
    return poly;
  };
  auto strictly_inside = [](const std::vector<std::pair<double, double>>& poly, double x, double y) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      const auto [xi, yi] = poly[i];
      const auto [xj, yj] = poly[j];
      const double cross = (xj - xi) * (y - yi) - (yj - yi) * (x - xi);
      const bool on_segment = std::abs(cross) <= 1e-12 * std::max(1.0, std::abs(xj - xi) + std::abs(yj - yi)) &&
                              std::min(xi, xj) - 1e-12 <= x && x <= std::max(xi, xj) + 1e-12 &&
                              std::min(yi, yj) - 1e-12 <= y && y <= std::max(yi, yj) + 1e-12;
      if (on_segment) return false;
      if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
  };
  for (std::size_t lo = 0; lo + 1 < alphas.size(); ++lo) {
    const auto inner = polygon(alphas[lo]);
    for (std::size_t hi = lo + 1; hi < alphas.size(); ++hi)
      for (const auto& p : two_state_boundary(r_pi, eps, alphas[hi], samples))
        rep.check(!strictly_inside(inner, p.r1, p.r2),
                  "boundary at alpha " + std::to_string(alphas[hi]) + " enters the set at alpha " +
                      std::to_string(alphas[lo]));
  }
  return rep;
}

/// Kernel lower bound over sampled member kernels and its ordering against the
/// state-action bound, on 4-state MDPs with positive rewards.
inline SuiteReport kernel_suite(std::size_t instances, std::uint64_t seed, std::size_t members = 1000) {
  SuiteReport rep;
  rep.name = "kernel_bound";
  rep.instances = instances;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t sampled = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = stream(seed, i);
    const std::size_t A = 2 + i % 2;
    const Mdp m = random_mdp(4, A, unit(rng) < 0.5 ? 0.5 : 0.9, rng, {.reward_low = 0.1});
    const Policy pi = random_policy(4, A, rng, 1e-2);
    const double alpha = 0.1 + 0.9 * unit(rng), eps = 0.01 + 0.2 * unit(rng);
    const std::string tag = "instance " + std::to_string(i);
    const double bound = kernel_lower_bound(m, pi, alpha, eps);
    const auto res = search_member_kernels(m, pi, alpha, eps, rng, {.members = members, .descent_steps = 500});
    sampled += res.members;
    rep.check(res.members == members, tag + ": only " + std::to_string(res.members) + " members sampled");
    rep.check(res.min_value >= bound, tag + ": member value " + std::to_string(res.min_value) + " below bound " +
                                          std::to_string(bound));
    rep.error(std::max(0.0, bound - res.min_value));

    const double sa = state_action_kernel_bound(m, pi, alpha, eps);
    const Occupancy occ = compute_occupancy(m, pi);
    const double H = expected_policy_entropy(occ, pi);
    rep.check(sa <= bound, tag + ": state-action bound above state bound");
    if (std::log(static_cast<double>(A)) - H > 1e-6) rep.check(sa < bound, tag + ": ordering not strict");
    if (H > 1e-6) rep.check(sa < bound, tag + ": ordering not strict with positive policy entropy");
  }
  rep.details["members_sampled"] = sampled;
  return rep;
}

/// Constant rewards: every kernel gives the constant, yet the regularizer
/// term is nonzero, so robust = nominal + omega cannot hold identically.
inline SuiteReport impossibility_suite(std::size_t instances, std::uint64_t seed, double alpha = 1.0) {
  SuiteReport rep;
  rep.name = "constant_reward_impossibility";
  rep.instances = instances;
  nlohmann::json max_omega = nlohmann::json::object();
  for (Regularizer reg : kRewardRows) {
    double best = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
      Rng rng = stream(seed, i * 3 + static_cast<std::size_t>(reg));
      std::uniform_int_distribution<std::size_t> states(2, 6), actions(1, 3);
      Mdp m = random_mdp(states(rng), actions(rng), 0.9, rng);
      const double c = -2.0 + 4.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      std::fill(m.reward.begin(), m.reward.end(), c);
      const Policy pi = random_policy(m.n_states, m.n_actions, rng);
      const auto report = impossibility_probe({m}, pi, reg, alpha, rng);
      const auto& e = report.entries.front();
      const double err = std::abs(e.robust_value - c);
      rep.error(err);
      rep.check(err <= 1e-12 * std::max(1.0, std::abs(c)),
                std::string(to_string(reg)) + " instance " + std::to_string(i) + ": robust value off by " +
                    std::to_string(err));
      best = std::max(best, std::abs(e.omega));
    }
    max_omega[to_string(reg)] = best;
    rep.check(best > 1e-3, std::string(to_string(reg)) + ": entropy term vanishes on every instance");
  }
  rep.details["max_abs_omega"] = max_omega;
  return rep;
}

/// The canonical five-state construction under policy-entropy regularization.
inline SuiteReport counterexample_suite(const CounterexampleParams& prm = {}) {
  SuiteReport rep;
  rep.name = "cvar_counterexample";
  rep.instances = 1;
  const auto ce = build_counterexample(prm, 0.5);
  const auto gap = verify_gap(ce.mdp, prm, Regularizer::policy);
  rep.check(std::abs(gap.cvar_optimal - prm.R) <= 1e-12 * std::max(1.0, prm.R), "optimal CVaR differs from R");
  const bool q_ok = gap.realized_q >= 0.4 && gap.realized_q <= 0.6;
  rep.check(q_ok, "realized q " + std::to_string(gap.realized_q) + " outside [0.4, 0.6]");
  if (q_ok) rep.check(gap.gap >= prm.M, "gap " + std::to_string(gap.gap) + " below M");
  rep.details = {{"R3", ce.R3},
                 {"R4", ce.R4},
                 {"cvar_optimal", gap.cvar_optimal},
                 {"cvar_regularized", gap.cvar_regularized},
                 {"gap", gap.gap},
                 {"predicted_gap", ce.predicted_gap},
                 {"realized_q", gap.realized_q}};
  return rep;
}

/// Suites run by `verify --theorem t`.
inline std::vector<SuiteReport> theorem_suites(int theorem, std::size_t instances, std::uint64_t seed) {
  switch (theorem) {
    case 1: return {duality_suite(instances, seed), worst_case_suite(instances, seed)};
    case 2: return {temperature_suite(instances, seed)};
    case 3: return {kernel_suite(instances, seed)};
    case 4: return {impossibility_suite(instances, seed)};
    case 5: return {counterexample_suite()};
  }
  fail(ErrorKind::invalid_input, "theorem must lie in 1..5");
}

}  // namespace robust_entropy
