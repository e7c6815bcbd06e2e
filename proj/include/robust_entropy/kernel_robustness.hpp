#pragma once

// Transition-kernel uncertainty: the divergence-ball lower bound obtained
// from state entropy, its looser state-action counterpart, a sampling search
// over member kernels, and the constant-reward impossibility probe.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "robust_entropy/error.hpp"
#include "robust_entropy/instances.hpp"
#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

/// alpha * log((1/S) sum_s (d(s) / d_tilde(s))^(1/alpha)), evaluated in log space.
inline double kernel_divergence(const numvec& d, const numvec& d_tilde, double alpha) {
  if (!(alpha > 0.0)) fail(ErrorKind::invalid_input, "alpha must be positive");
  if (d.size() != d_tilde.size()) fail(ErrorKind::invalid_input, "marginals differ in size");
  numvec terms;
  for (std::size_t s = 0; s < d.size(); ++s) {
    if (d[s] == 0.0) continue;
    if (!(d_tilde[s] > 0.0))
      fail(ErrorKind::support_mismatch, "d_tilde(" + std::to_string(s) + ") = 0 where d > 0");
    terms.push_back((std::log(d[s]) - std::log(d_tilde[s])) / alpha);
  }
  return alpha * (log_sum_exp(terms) - std::log(static_cast<double>(d.size())));
}

inline double kernel_divergence(const Mdp& mdp, const Policy& policy, double alpha, const numvec& kernel_tilde) {
  const Occupancy nominal = compute_occupancy(mdp, policy);
  const Occupancy perturbed = compute_occupancy(with_kernel(mdp, kernel_tilde), policy);
  return kernel_divergence(nominal.state_marginal, perturbed.state_marginal, alpha);
}

inline bool kernel_set_membership(const Mdp& mdp, const Policy& policy, double alpha, double epsilon,
                                  const numvec& kernel_tilde) {
  return kernel_divergence(mdp, policy, alpha, kernel_tilde) <= epsilon;
}

namespace detail {

inline double expected_log_reward(const Mdp& mdp, const Occupancy& occ) {
  double total = 0.0;
  for (std::size_t i = 0; i < occ.rho.size(); ++i) {
    if (occ.rho[i] == 0.0) continue;
    if (!(mdp.reward[i] > 0.0))
      fail(ErrorKind::nonpositive_reward, "reward must be positive wherever rho > 0");
    total += occ.rho[i] * std::log(mdp.reward[i]);
  }
  return total;
}

}  // namespace detail

/// exp(E_rho[log r] + alpha (H(d) - log S) - epsilon).
inline double kernel_lower_bound(const Mdp& mdp, const Policy& policy, double alpha, double epsilon) {
  const Occupancy occ = compute_occupancy(mdp, policy);
  const double S = static_cast<double>(mdp.n_states);
  return std::exp(detail::expected_log_reward(mdp, occ) + alpha * (entropy(occ.state_marginal) - std::log(S)) -
                  epsilon);
}

/// exp(E_rho[log r] + alpha (H(rho) - log SA) - epsilon).
inline double state_action_kernel_bound(const Mdp& mdp, const Policy& policy, double alpha, double epsilon) {
  const Occupancy occ = compute_occupancy(mdp, policy);
  const double SA = static_cast<double>(mdp.n_states * mdp.n_actions);
  return std::exp(detail::expected_log_reward(mdp, occ) + alpha * (entropy(occ.rho) - std::log(SA)) - epsilon);
}

struct KernelSearchOptions {
  std::size_t members = 1000;
  std::size_t max_attempts = 200000;
  /// Mixture weights toward a Dirichlet row are drawn log-uniformly in [min_weight, max_weight].
  double min_weight = 1e-3;
  double max_weight = 0.5;
  double concentration = 1.0;
  /// Accepted single-row moves tried during local descent from the best member.
  std::size_t descent_steps = 2000;
};

struct KernelSearchResult {
  std::size_t members = 0;
  std::size_t attempts = 0;
  /// Minimum E_{rho_P~}[r] over all members seen, including local descent.
  double min_value = std::numeric_limits<double>::infinity();
  numvec argmin_kernel;
  /// Minimum over the rejection-sampled members only.
  double sampled_min = std::numeric_limits<double>::infinity();
};

/// Heuristic search of the kernel uncertainty set: rejection sampling over
/// Dirichlet-perturbed kernels, then greedy single-row descent on E[r].
inline KernelSearchResult search_member_kernels(const Mdp& mdp, const Policy& policy, double alpha, double epsilon,
                                                Rng& rng, const KernelSearchOptions& opts = {}) {
  validate(mdp);
  validate(policy, mdp);
  const auto S = mdp.n_states, A = mdp.n_actions;
  const Occupancy nominal = compute_occupancy(mdp, policy);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_row(0, S * A - 1);
  const double lw = std::log(opts.min_weight), hw = std::log(opts.max_weight);

  KernelSearchResult out;
  auto consider = [&](const numvec& kernel, double* value) {
    const Mdp candidate = with_kernel(mdp, kernel);
    const Occupancy occ = compute_occupancy(candidate, policy);
    for (std::size_t s = 0; s < S; ++s)
      if (nominal.state_marginal[s] > 0.0 && occ.state_marginal[s] == 0.0) return false;
    if (kernel_divergence(nominal.state_marginal, occ.state_marginal, alpha) > epsilon) return false;
    *value = expected_return(candidate, occ);
    return true;
  };

  while (out.members < opts.members && out.attempts < opts.max_attempts) {
    ++out.attempts;
    const double w = std::exp(lw + (hw - lw) * unit(rng));
    numvec kernel = mdp.kernel;
    for (std::size_t row = 0; row < S * A; ++row) {
      const numvec noise = dirichlet(S, opts.concentration, rng);
      for (std::size_t n = 0; n < S; ++n) kernel[row * S + n] = (1.0 - w) * kernel[row * S + n] + w * noise[n];
    }
    double value = 0.0;
    if (!consider(kernel, &value)) continue;
    ++out.members;
    if (value < out.sampled_min) {
      out.sampled_min = value;
      out.argmin_kernel = std::move(kernel);
    }
  }
  out.min_value = out.sampled_min;
  if (out.argmin_kernel.empty()) return out;

  numvec current = out.argmin_kernel;
  double step = 0.1;
  for (std::size_t it = 0; it < opts.descent_steps && step > 1e-6; ++it) {
    numvec trial = current;
    const std::size_t row = pick_row(rng);
    const numvec noise = dirichlet(S, opts.concentration, rng);
    for (std::size_t n = 0; n < S; ++n) trial[row * S + n] = (1.0 - step) * trial[row * S + n] + step * noise[n];
    double value = 0.0;
    if (consider(trial, &value) && value < out.min_value) {
      out.min_value = value;
      current = std::move(trial);
    } else if (it % 50 == 49) {
      step *= 0.5;
    }
  }
  out.argmin_kernel = std::move(current);
  return out;
}

/// CSV rows (epsilon, bound, sampled_min) for a sweep over budgets.
inline std::string kernel_bound_sweep_csv(const Mdp& mdp, const Policy& policy, double alpha,
                                          const std::vector<double>& epsilons, Rng& rng,
                                          const KernelSearchOptions& opts = {}) {
  std::string csv = "epsilon,bound,sampled_min\n";
  char buf[96];
  for (double eps : epsilons) {
    const double bound = kernel_lower_bound(mdp, policy, alpha, eps);
    const auto res = search_member_kernels(mdp, policy, alpha, eps, rng, opts);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", eps, bound, res.min_value);
    csv += buf;
  }
  return csv;
}

// ---------------------------------------------------------------------------
// Constant rewards

struct ImpossibilityEntry {
  double c = 0.0;
  /// regularized_return - expected_return.
  double omega = 0.0;
  double nominal = 0.0;
  /// Minimum return over the sampled kernels; equals c for any kernel set.
  double robust_value = 0.0;
};

struct ImpossibilityReport {
  std::vector<ImpossibilityEntry> entries;
  /// True when some omega is nonzero, so robust = nominal + omega fails there.
  bool identity_impossible = false;
};

inline ImpossibilityReport impossibility_probe(const std::vector<Mdp>& family, const Policy& policy, Regularizer reg,
                                               double alpha, Rng& rng, std::size_t kernels_per_mdp = 16) {
  ImpossibilityReport report;
  for (const Mdp& mdp : family) {
    validate(mdp);
    validate(policy, mdp);
    const double c = mdp.reward.front();
    for (double r : mdp.reward)
      if (std::abs(r - c) > 1e-12 * std::max(1.0, std::abs(c)))
        fail(ErrorKind::non_constant_reward, "impossibility probe needs a constant reward");
    ImpossibilityEntry e;
    e.c = c;
    e.nominal = expected_return(mdp, policy);
    e.omega = regularized_return(mdp, policy, reg, alpha) - e.nominal;
    e.robust_value = e.nominal;
    for (std::size_t k = 0; k < kernels_per_mdp; ++k) {
      Mdp other = random_mdp(mdp.n_states, mdp.n_actions, mdp.discount, rng);
      other.reward = mdp.reward;
      other.initial_dist = mdp.initial_dist;
      e.robust_value = std::min(e.robust_value, expected_return(other, policy));
    }
    if (std::abs(e.omega) > 1e-12) report.identity_impossible = true;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace robust_entropy
