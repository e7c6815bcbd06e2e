#pragma once

// Exact tabular MDP primitives: occupancies, returns and entropy quantities.
//
// Occupancies are normalized by (1 - gamma) so that both the state-action
// occupancy rho and its state marginal d are probability distributions. Under
// this normalization expected_return is (1 - gamma) times the conventional
// discounted return.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "robust_entropy/error.hpp"

namespace robust_entropy {

using numvec = std::vector<double>;

struct Mdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  /// P(s'|s,a) stored at [(s * A + a) * S + s'].
  numvec kernel;
  /// r(s,a) stored at [s * A + a].
  numvec reward;
  double discount = 0.0;
  numvec initial_dist;

  double P(std::size_t s, std::size_t a, std::size_t next) const {
    return kernel[(s * n_actions + a) * n_states + next];
  }
  double& P(std::size_t s, std::size_t a, std::size_t next) {
    return kernel[(s * n_actions + a) * n_states + next];
  }
  double r(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }
  double& r(std::size_t s, std::size_t a) { return reward[s * n_actions + a]; }

  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {kernel.data() + (s * n_actions + a) * n_states, n_states};
  }

  /// Zero-initialized MDP with the given dimensions.
  static Mdp zeros(std::size_t states, std::size_t actions, double gamma) {
    Mdp m;
    m.n_states = states;
    m.n_actions = actions;
    m.kernel.assign(states * actions * states, 0.0);
    m.reward.assign(states * actions, 0.0);
    m.discount = gamma;
    m.initial_dist.assign(states, 0.0);
    return m;
  }
};

struct Policy {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  /// pi(a|s) stored at [s * A + a].
  numvec probs;

  double operator()(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
  double& operator()(std::size_t s, std::size_t a) { return probs[s * n_actions + a]; }

  std::span<const double> row(std::size_t s) const {
    return {probs.data() + s * n_actions, n_actions};
  }

  static Policy uniform(std::size_t states, std::size_t actions) {
    return {states, actions, numvec(states * actions, 1.0 / static_cast<double>(actions))};
  }

  static Policy deterministic(std::size_t actions, const std::vector<std::size_t>& choice) {
    Policy p{choice.size(), actions, numvec(choice.size() * actions, 0.0)};
    for (std::size_t s = 0; s < choice.size(); ++s) p(s, choice[s]) = 1.0;
    return p;
  }
};

struct Occupancy {
  /// rho(s,a) at [s * A + a]; sums to one.
  numvec rho;
  /// d(s) = sum_a rho(s,a).
  numvec state_marginal;
  /// Factor applied to the discounted visitation counts, i.e. 1 - gamma.
  double normalization = 1.0;
};

enum class Regularizer { policy, state, state_action };

inline const char* to_string(Regularizer reg) {
  switch (reg) {
    case Regularizer::policy: return "policy";
    case Regularizer::state: return "state";
    case Regularizer::state_action: return "state_action";
  }
  return "unknown";
}

inline Regularizer parse_regularizer(std::string_view name) {
  if (name == "policy") return Regularizer::policy;
  if (name == "state") return Regularizer::state;
  if (name == "state_action" || name == "state-action") return Regularizer::state_action;
  fail(ErrorKind::unknown_regularizer, "unknown regularizer '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Validation

inline void validate(const Mdp& mdp) {
  const auto S = mdp.n_states, A = mdp.n_actions;
  if (S == 0 || A == 0) fail(ErrorKind::invalid_input, "MDP needs at least one state and action");
  if (mdp.kernel.size() != S * A * S || mdp.reward.size() != S * A || mdp.initial_dist.size() != S)
    fail(ErrorKind::invalid_input, "MDP array sizes do not match n_states/n_actions");
  if (!(mdp.discount >= 0.0 && mdp.discount < 1.0))
    fail(ErrorKind::invalid_input, "discount must lie in [0, 1)");
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double total = 0.0;
      for (double p : mdp.row(s, a)) {
        if (!(p >= 0.0)) fail(ErrorKind::invalid_input, "negative or NaN transition probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12)
        fail(ErrorKind::invalid_input, "kernel row (" + std::to_string(s) + "," + std::to_string(a) +
                                           ") does not sum to one");
      if (!std::isfinite(mdp.r(s, a))) fail(ErrorKind::invalid_input, "non-finite reward");
    }
  }
  double total = 0.0;
  for (double p : mdp.initial_dist) {
    if (!(p >= 0.0)) fail(ErrorKind::invalid_input, "negative initial probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) fail(ErrorKind::invalid_input, "initial_dist does not sum to one");
}

inline void validate(const Policy& policy, const Mdp& mdp) {
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions ||
      policy.probs.size() != mdp.n_states * mdp.n_actions)
    fail(ErrorKind::invalid_input, "policy shape does not match MDP");
  for (std::size_t s = 0; s < policy.n_states; ++s) {
    double total = 0.0;
    for (double p : policy.row(s)) {
      if (!(p >= 0.0)) fail(ErrorKind::invalid_input, "negative policy probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      fail(ErrorKind::invalid_input, "policy row " + std::to_string(s) + " does not sum to one");
  }
}

// ---------------------------------------------------------------------------
// Entropy and log-sum-exp

/// Shannon entropy in nats; 0 log 0 = 0.
inline double entropy(std::span<const double> dist) {
  double total = 0.0, h = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) fail(ErrorKind::invalid_distribution, "negative or NaN probability");
    total += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::abs(total - 1.0) > 1e-6) fail(ErrorKind::invalid_distribution, "probabilities do not sum to one");
  return h;
}

/// log(sum exp(u)) with max-shift.
inline double log_sum_exp(std::span<const double> u) {
  if (u.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(u.begin(), u.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : u) acc += std::exp(x - m);
  return m + std::log(acc);
}

// ---------------------------------------------------------------------------
// Derived views

/// P^pi as a dense S x S matrix with rows indexed by the current state.
inline Eigen::MatrixXd policy_kernel(const Mdp& mdp, const Policy& policy) {
  const auto S = mdp.n_states, A = mdp.n_actions;
  Eigen::MatrixXd Ppi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const double w = policy(s, a);
      if (w == 0.0) continue;
      const auto row = mdp.row(s, a);
      for (std::size_t n = 0; n < S; ++n) Ppi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(n)) += w * row[n];
    }
  return Ppi;
}

inline numvec policy_reward(const Mdp& mdp, const Policy& policy) {
  numvec rpi(mdp.n_states, 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) rpi[s] += policy(s, a) * mdp.r(s, a);
  return rpi;
}

/// Copy of `mdp` with its transition kernel replaced.
inline Mdp with_kernel(const Mdp& mdp, numvec kernel) {
  Mdp out = mdp;
  out.kernel = std::move(kernel);
  return out;
}

// ---------------------------------------------------------------------------
// Occupancy

namespace detail {
constexpr std::size_t kDirectSolveLimit = 10000;
}

/// Normalized discounted occupancy. Solves (I - gamma P^pi^T) d = (1 - gamma) mu0
/// directly for S*A <= 1e4, otherwise by power iteration to 1e-10.
inline Occupancy compute_occupancy(const Mdp& mdp, const Policy& policy) {
  validate(mdp);
  validate(policy, mdp);
  const auto S = mdp.n_states, A = mdp.n_actions;
  const double g = mdp.discount;
  Eigen::VectorXd d(static_cast<Eigen::Index>(S));

  if (S * A <= detail::kDirectSolveLimit) {
    const Eigen::MatrixXd Ppi = policy_kernel(mdp, policy);
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(Ppi.rows(), Ppi.cols()) - g * Ppi.transpose();
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(S));
    for (std::size_t s = 0; s < S; ++s) rhs(static_cast<Eigen::Index>(s)) = (1.0 - g) * mdp.initial_dist[s];
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
    d = lu.solve(rhs);
    if (!d.allFinite()) fail(ErrorKind::invalid_input, "occupancy flow system is singular");
  } else {
    // Sparse-friendly power iteration on d <- (1-g) mu0 + g P^pi^T d.
    numvec cur(mdp.initial_dist), next(S);
    for (std::size_t it = 0; it < 1000000; ++it) {
      for (std::size_t s = 0; s < S; ++s) next[s] = (1.0 - g) * mdp.initial_dist[s];
      for (std::size_t s = 0; s < S; ++s) {
        if (cur[s] == 0.0) continue;
        for (std::size_t a = 0; a < A; ++a) {
          const double w = g * cur[s] * policy(s, a);
          if (w == 0.0) continue;
          const auto row = mdp.row(s, a);
          for (std::size_t n = 0; n < S; ++n) next[n] += w * row[n];
        }
      }
      double diff = 0.0;
      for (std::size_t s = 0; s < S; ++s) diff += std::abs(next[s] - cur[s]);
      cur.swap(next);
      if (diff < 1e-10 * (1.0 - g)) break;
    }
    for (std::size_t s = 0; s < S; ++s) d(static_cast<Eigen::Index>(s)) = cur[s];
  }

  Occupancy occ;
  occ.normalization = 1.0 - g;
  occ.state_marginal.resize(S);
  occ.rho.resize(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    const double ds = std::max(0.0, d(static_cast<Eigen::Index>(s)));
    occ.state_marginal[s] = ds;
    for (std::size_t a = 0; a < A; ++a) occ.rho[s * A + a] = ds * policy(s, a);
  }
  return occ;
}

/// <rho, r> under the normalized occupancy.
inline double expected_return(const Mdp& mdp, const Occupancy& occ) {
  double j = 0.0;
  for (std::size_t i = 0; i < occ.rho.size(); ++i) j += occ.rho[i] * mdp.reward[i];
  return j;
}

inline double expected_return(const Mdp& mdp, const Policy& policy) {
  return expected_return(mdp, compute_occupancy(mdp, policy));
}

/// E_d[H_A(pi_s)].
inline double expected_policy_entropy(const Occupancy& occ, const Policy& policy) {
  double h = 0.0;
  for (std::size_t s = 0; s < policy.n_states; ++s) {
    if (occ.state_marginal[s] == 0.0) continue;
    h += occ.state_marginal[s] * entropy(policy.row(s));
  }
  return h;
}

/// The entropy term multiplying alpha for a regularizer row.
inline double regularizer_value(Regularizer reg, const Occupancy& occ, const Policy& policy) {
  switch (reg) {
    case Regularizer::policy: return expected_policy_entropy(occ, policy);
    case Regularizer::state: return entropy(occ.state_marginal);
    case Regularizer::state_action: return entropy(occ.rho);
  }
  fail(ErrorKind::unknown_regularizer, "unhandled regularizer");
}

/// E_rho[r] + alpha * (policy | state | state-action entropy).
inline double regularized_return(const Mdp& mdp, const Policy& policy, Regularizer reg, double alpha) {
  if (!(alpha >= 0.0)) fail(ErrorKind::invalid_input, "alpha must be non-negative");
  const Occupancy occ = compute_occupancy(mdp, policy);
  return expected_return(mdp, occ) + alpha * regularizer_value(reg, occ, policy);
}

/// Number of elements the regularizer's entropy ranges over (A, S or S*A).
inline std::size_t support_size(Regularizer reg, const Mdp& mdp) {
  switch (reg) {
    case Regularizer::policy: return mdp.n_actions;
    case Regularizer::state: return mdp.n_states;
    case Regularizer::state_action: return mdp.n_states * mdp.n_actions;
  }
  return 0;
}

}  // namespace robust_entropy
