#pragma once

// Exact return distributions, CVaR, and the five-state construction where an
// entropy-regularized optimum has arbitrarily worse CVaR than the
// unregularized one.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "robust_entropy/error.hpp"
#include "robust_entropy/mdp.hpp"
#include "robust_entropy/solver.hpp"

namespace robust_entropy {

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// Discrete law of the discounted return sum_t gamma^t r_t.
struct ReturnDistribution {
  std::vector<Atom> atoms;

  double mean() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.value * a.prob;
    return m;
  }
};

inline void validate(const ReturnDistribution& dist) {
  if (dist.atoms.empty()) fail(ErrorKind::invalid_distribution, "return distribution has no atoms");
  double total = 0.0;
  for (const auto& a : dist.atoms) {
    if (!(a.prob > 0.0) || !std::isfinite(a.value))
      fail(ErrorKind::invalid_distribution, "atoms need positive probability and finite value");
    total += a.prob;
  }
  if (std::abs(total - 1.0) > 1e-10) fail(ErrorKind::invalid_distribution, "atom probabilities sum to " + std::to_string(total));
}

/// Sorts atoms by value and merges values equal up to 1e-12 relative.
inline ReturnDistribution normalized(ReturnDistribution dist) {
  auto& v = dist.atoms;
  std::sort(v.begin(), v.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
  std::vector<Atom> merged;
  for (const auto& a : v) {
    if (!merged.empty() && std::abs(a.value - merged.back().value) <= 1e-12 * std::max(1.0, std::abs(a.value)))
      merged.back().prob += a.prob;
    else
      merged.push_back(a);
  }
  v = std::move(merged);
  return dist;
}

struct ReturnDistributionOptions {
  std::size_t max_leaves = 100000;
  /// Truncation tolerance on the discarded tail gamma^T r_max / (1 - gamma).
  double tail_tolerance = 1e-8;
};

/// Pushforward of the trajectory law to returns. States that loop on
/// themselves with a single reward under the policy are collapsed
/// analytically; other branches are unrolled until the tail is negligible.
inline ReturnDistribution return_distribution(const Mdp& mdp, const Policy& policy,
                                              const ReturnDistributionOptions& opts = {}) {
  validate(mdp);
  validate(policy, mdp);
  const auto S = mdp.n_states, A = mdp.n_actions;
  const double gamma = mdp.discount;

  // Absorbing under the policy: every used action self-loops with the same reward.
  std::vector<char> absorbing(S, 0);
  numvec loop_reward(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    bool ok = true, first = true;
    for (std::size_t a = 0; a < A && ok; ++a) {
      if (policy(s, a) == 0.0) continue;
      if (mdp.P(s, a, s) != 1.0) ok = false;
      if (first) {
        loop_reward[s] = mdp.r(s, a);
        first = false;
      } else if (mdp.r(s, a) != loop_reward[s]) {
        ok = false;
      }
    }
    absorbing[s] = ok ? 1 : 0;
  }

  double r_max = 0.0;
  for (double r : mdp.reward) r_max = std::max(r_max, std::abs(r));
  std::size_t horizon = 0;
  if (r_max > 0.0 && gamma > 0.0) {
    const double scale = r_max / (1.0 - gamma);
    while (std::pow(gamma, static_cast<double>(horizon)) * scale >= opts.tail_tolerance) ++horizon;
  } else {
    horizon = 1;
  }

  ReturnDistribution out;
  struct Frame {
    std::size_t state;
    std::size_t t;
    double prob, value, discount;
  };
  std::vector<Frame> stack;
  for (std::size_t s = 0; s < S; ++s)
    if (mdp.initial_dist[s] > 0.0) stack.push_back({s, 0, mdp.initial_dist[s], 0.0, 1.0});
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (absorbing[f.state] || f.t >= horizon) {
      const double tail = absorbing[f.state] ? f.discount * loop_reward[f.state] / (1.0 - gamma) : 0.0;
      out.atoms.push_back({f.value + tail, f.prob});
      if (out.atoms.size() > opts.max_leaves)
        fail(ErrorKind::budget_exceeded, "return distribution exceeds " + std::to_string(opts.max_leaves) + " leaves");
      continue;
    }
    for (std::size_t a = 0; a < A; ++a) {
      const double pa = policy(f.state, a);
      if (pa == 0.0) continue;
      const auto row = mdp.row(f.state, a);
      for (std::size_t n = 0; n < S; ++n) {
        if (row[n] == 0.0) continue;
        stack.push_back({n, f.t + 1, f.prob * pa * row[n], f.value + f.discount * mdp.r(f.state, a),
                         f.discount * gamma});
      }
    }
  }
  return normalized(std::move(out));
}

/// Lower-tail CVaR: mean of the worst beta-fraction of probability mass,
/// equal to min E_Q[G] over Q with dQ/dP <= 1/beta.
inline double cvar(const ReturnDistribution& dist, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorKind::invalid_input, "beta must lie in (0, 1)");
  validate(dist);
  const ReturnDistribution sorted = normalized(dist);
  double mass = 0.0, total = 0.0;
  for (const auto& a : sorted.atoms) {
    const double take = std::min(a.prob, beta - mass);
    if (take <= 0.0) break;
    total += take * a.value;
    mass += take;
  }
  return total / beta;
}

/// min_eta { eta + E[(G - eta)^+] / (1 - beta) } evaluated exactly. This is
/// the mean of the best (1 - beta)-fraction, i.e. an upper-tail quantity;
/// kept only as a diagnostic.
inline double cvar_primal_display(const ReturnDistribution& dist, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorKind::invalid_input, "beta must lie in (0, 1)");
  validate(dist);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& eta : dist.atoms) {
    double excess = 0.0;
    for (const auto& a : dist.atoms) excess += a.prob * std::max(0.0, a.value - eta.value);
    best = std::min(best, eta.value + excess / (1.0 - beta));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Counterexample

struct CounterexampleParams {
  double M = 10.0;
  double alpha = 1.0;
  double beta = 0.5;
  double R = 1.0;
  double eps_gap = 0.01;
  double gamma = 0.5;
  /// Probability of the low outcome R3 after the risky action.
  double p = 0.5;
};

struct Counterexample {
  /// States: 0 start, 1 safe loop (R1), 2 risky hub, 3 low loop (R3), 4 high loop (R4).
  /// Action 0 is the safe action a1 at the start; elsewhere both actions coincide.
  Mdp mdp;
  double R3 = 0.0;
  double R4 = 0.0;
  /// CVaR(pi*) - CVaR(pi_R) if pi_R takes the safe action with the anticipated q.
  double predicted_gap = 0.0;
};

inline Counterexample build_counterexample(const CounterexampleParams& prm, double q) {
  if (!(prm.M > 0.0) || !(prm.alpha > 0.0) || !(prm.R > 0.0) || !(prm.eps_gap > 0.0))
    fail(ErrorKind::invalid_input, "M, alpha, R and eps_gap must be positive");
  if (!(prm.beta > 0.0 && prm.beta < 1.0)) fail(ErrorKind::invalid_input, "beta must lie in (0, 1)");
  if (!(prm.gamma > 0.0 && prm.gamma < 1.0)) fail(ErrorKind::invalid_input, "gamma must lie in (0, 1)");
  if (!(q > 0.0 && q < 1.0)) fail(ErrorKind::invalid_input, "q must lie in (0, 1)");
  if (!(prm.p > 0.0 && prm.p < 1.0)) fail(ErrorKind::infeasible_params, "p must lie in (0, 1)");
  if (prm.eps_gap >= prm.R) fail(ErrorKind::infeasible_params, "eps_gap must be below R");
  if ((1.0 - q) * prm.p + q < prm.beta) fail(ErrorKind::infeasible_params, "(1 - q) p + q < beta");

  Counterexample ce;
  ce.R3 = prm.beta * (-prm.M - prm.R) / (prm.p * (1.0 - q)) + prm.R;
  ce.R4 = (prm.R - prm.eps_gap - prm.p * ce.R3) / (1.0 - prm.p);

  const double g = prm.gamma;
  Mdp& m = ce.mdp;
  m = Mdp::zeros(5, 2, g);
  m.P(0, 0, 1) = 1.0;
  m.P(0, 1, 2) = 1.0;
  for (std::size_t a = 0; a < 2; ++a) {
    m.P(1, a, 1) = 1.0;
    m.P(2, a, 3) = prm.p;
    m.P(2, a, 4) = 1.0 - prm.p;
    m.P(3, a, 3) = 1.0;
    m.P(4, a, 4) = 1.0;
    m.r(1, a) = prm.R * (1.0 - g) / g;
    m.r(3, a) = ce.R3 * (1.0 - g) / (g * g);
    m.r(4, a) = ce.R4 * (1.0 - g) / (g * g);
  }
  m.initial_dist = {1.0, 0.0, 0.0, 0.0, 0.0};

  ReturnDistribution anticipated{{{prm.R, q}, {ce.R3, (1.0 - q) * prm.p}, {ce.R4, (1.0 - q) * (1.0 - prm.p)}}};
  ce.predicted_gap = prm.R - cvar(anticipated, prm.beta);
  return ce;
}

struct GapReport {
  double cvar_optimal = 0.0;
  double cvar_regularized = 0.0;
  double gap = 0.0;
  /// |gap - M|.
  double deviation = 0.0;
  /// Realized probability of the safe action under the regularized optimum.
  double realized_q = 0.0;
  double return_optimal = 0.0;
  double return_regularized = 0.0;
};

inline GapReport verify_gap(const Mdp& mdp, const CounterexampleParams& prm, Regularizer reg,
                            const SolveOptions& base = {}) {
  const auto star = solve_unregularized(mdp);
  SolveOptions opts = base;
  opts.regularizer = reg;
  opts.alpha = prm.alpha;
  const auto soft = solve_regularized(mdp, opts);

  GapReport rep;
  const auto d_star = return_distribution(mdp, star.policy);
  const auto d_soft = return_distribution(mdp, soft.policy);
  rep.cvar_optimal = cvar(d_star, prm.beta);
  rep.cvar_regularized = cvar(d_soft, prm.beta);
  rep.gap = rep.cvar_optimal - rep.cvar_regularized;
  rep.deviation = std::abs(rep.gap - prm.M);
  rep.realized_q = soft.policy(0, 0);
  rep.return_optimal = d_star.mean();
  rep.return_regularized = d_soft.mean();
  return rep;
}

}  // namespace robust_entropy
