#pragma once

// Reward uncertainty sets induced by entropy regularization: closed-form
// robust returns and adversarial rewards, set membership, a numerical
// adversary used as an independent oracle, and the temperature limit sets.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "robust_entropy/error.hpp"
#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

struct UncertaintySpec {
  Regularizer regularizer = Regularizer::state;
  double alpha = 1.0;
  double epsilon = 0.1;
};

inline void validate(const UncertaintySpec& spec) {
  if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha)) fail(ErrorKind::invalid_input, "alpha must be positive");
  if (!(spec.epsilon > 0.0) || !std::isfinite(spec.epsilon)) fail(ErrorKind::invalid_input, "epsilon must be positive");
}

/// A perturbed reward r_tilde together with delta = r - r_tilde.
struct RewardPerturbation {
  numvec r_tilde;
  numvec delta;

  static RewardPerturbation from_delta(const Mdp& mdp, numvec delta) {
    if (delta.size() != mdp.reward.size()) fail(ErrorKind::invalid_input, "delta has wrong size");
    RewardPerturbation p;
    p.r_tilde.resize(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) p.r_tilde[i] = mdp.reward[i] - delta[i];
    p.delta = std::move(delta);
    return p;
  }
  static RewardPerturbation from_reward(const Mdp& mdp, numvec r_tilde) {
    if (r_tilde.size() != mdp.reward.size()) fail(ErrorKind::invalid_input, "r_tilde has wrong size");
    RewardPerturbation p;
    p.delta.resize(r_tilde.size());
    for (std::size_t i = 0; i < r_tilde.size(); ++i) p.delta[i] = mdp.reward[i] - r_tilde[i];
    p.r_tilde = std::move(r_tilde);
    return p;
  }
};

/// The adversary can degrade the reward somewhere (r_tilde is not strictly above r).
inline bool can_degrade(const RewardPerturbation& p) {
  for (double d : p.delta)
    if (d >= 0.0) return true;
  return false;
}

/// Per-state policy average x^pi(s) = sum_a pi(a|s) x(s,a).
inline numvec policy_average(const Policy& policy, std::span<const double> x) {
  numvec out(policy.n_states, 0.0);
  for (std::size_t s = 0; s < policy.n_states; ++s)
    for (std::size_t a = 0; a < policy.n_actions; ++a) out[s] += policy(s, a) * x[s * policy.n_actions + a];
  return out;
}

/// Number of outcomes the row's LSE ranges over: A, S or SA.
inline double constraint_count(Regularizer reg, std::size_t S, std::size_t A) {
  switch (reg) {
    case Regularizer::policy: return static_cast<double>(A);
    case Regularizer::state: return static_cast<double>(S);
    case Regularizer::state_action: return static_cast<double>(S * A);
  }
  return 1.0;
}

/// Right-hand side epsilon / alpha + log(count).
inline double constraint_bound(const UncertaintySpec& spec, std::size_t S, std::size_t A) {
  return spec.epsilon / spec.alpha + std::log(constraint_count(spec.regularizer, S, A));
}

/// Left-hand side of the row's LSE constraint for a given delta.
inline double constraint_value(const Mdp& mdp, const Policy& policy, Regularizer reg, double alpha,
                               std::span<const double> delta) {
  const auto S = mdp.n_states, A = mdp.n_actions;
  numvec scaled;
  switch (reg) {
    case Regularizer::policy: {
      const Occupancy occ = compute_occupancy(mdp, policy);
      double total = 0.0;
      scaled.resize(A);
      for (std::size_t s = 0; s < S; ++s) {
        if (occ.state_marginal[s] == 0.0) continue;
        for (std::size_t a = 0; a < A; ++a) scaled[a] = delta[s * A + a] / alpha;
        total += occ.state_marginal[s] * log_sum_exp(scaled);
      }
      return total;
    }
    case Regularizer::state: {
      scaled = policy_average(policy, delta);
      for (auto& x : scaled) x /= alpha;
      return log_sum_exp(scaled);
    }
    case Regularizer::state_action: {
      scaled.assign(delta.begin(), delta.end());
      for (auto& x : scaled) x /= alpha;
      return log_sum_exp(scaled);
    }
  }
  return 0.0;
}

inline bool membership(const Mdp& mdp, const Policy& policy, const UncertaintySpec& spec,
                       const RewardPerturbation& pert) {
  validate(spec);
  const double bound = constraint_bound(spec, mdp.n_states, mdp.n_actions);
  const double value = constraint_value(mdp, policy, spec.regularizer, spec.alpha, pert.delta);
  return value <= bound + 1e-12 * std::max(1.0, std::abs(bound));
}

/// Closed-form worst-case reward. The additive constant is chosen so the
/// constraint is active: delta = alpha * log(.) + epsilon + alpha * log(count).
inline RewardPerturbation worst_case_reward(const Mdp& mdp, const Policy& policy, const UncertaintySpec& spec) {
  validate(spec);
  validate(policy, mdp);
  const auto S = mdp.n_states, A = mdp.n_actions;
  const Occupancy occ = compute_occupancy(mdp, policy);
  const double shift = spec.epsilon + spec.alpha * std::log(constraint_count(spec.regularizer, S, A));
  numvec delta(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      const double pi = policy(s, a);
      const double d = occ.state_marginal[s];
      double term = 0.0;
      switch (spec.regularizer) {
        case Regularizer::policy:
          if (!(pi > 0.0)) fail(ErrorKind::degenerate_support, "policy row needs pi(a|s) > 0");
          term = std::log(pi);
          break;
        case Regularizer::state:
          if (!(pi > 0.0)) fail(ErrorKind::degenerate_support, "state row needs pi(a|s) > 0");
          if (!(d > 0.0)) fail(ErrorKind::degenerate_support, "state row needs d(s) > 0");
          term = std::log(d) / (static_cast<double>(A) * pi);
          break;
        case Regularizer::state_action: {
          const double rho = occ.rho[s * A + a];
          if (!(rho > 0.0)) fail(ErrorKind::degenerate_support, "state-action row needs rho(s,a) > 0");
          term = std::log(rho);
          break;
        }
      }
      delta[s * A + a] = spec.alpha * term + shift;
    }
  return RewardPerturbation::from_delta(mdp, std::move(delta));
}

inline double robust_return_closed_form(const Mdp& mdp, const Policy& policy, const UncertaintySpec& spec) {
  validate(spec);
  const Occupancy occ = compute_occupancy(mdp, policy);
  const auto S = static_cast<double>(mdp.n_states), A = static_cast<double>(mdp.n_actions);
  const double base = expected_return(mdp, occ) - spec.epsilon;
  switch (spec.regularizer) {
    case Regularizer::policy:
      return base + spec.alpha * (expected_policy_entropy(occ, policy) - std::log(A));
    case Regularizer::state:
      return base + spec.alpha * (entropy(occ.state_marginal) - std::log(S));
    case Regularizer::state_action:
      return base + spec.alpha * (entropy(occ.rho) - std::log(S * A));
  }
  return base;
}

struct AdversaryResult {
  RewardPerturbation perturbation;
  /// E_rho[r_tilde] at the minimizer.
  double value = 0.0;
  /// max |alpha * grad g - rho| at the minimizer (multiplier fixed at alpha).
  double kkt_residual = 0.0;
  /// constraint_value - constraint_bound; zero when the constraint is active.
  double constraint_activity = 0.0;
  std::size_t iterations = 0;
};

/// Numerically minimizes E_rho[r_tilde] over the row's uncertainty set.
/// Minimizes F(x) = alpha * g(x) - <rho, x> by damped Newton, then adds the
/// constant that saturates the constraint (g(x + t) = g(x) + t / alpha).
inline AdversaryResult adversarial_minimize(const Mdp& mdp, const Policy& policy, const UncertaintySpec& spec,
                                            std::size_t max_iterations = 500) {
  validate(spec);
  validate(policy, mdp);
  const auto S = mdp.n_states, A = mdp.n_actions;
  const auto n = static_cast<Eigen::Index>(S * A);
  const double alpha = spec.alpha;
  const Occupancy occ = compute_occupancy(mdp, policy);
  const Eigen::Map<const Eigen::VectorXd> rho(occ.rho.data(), n);

  auto softmax = [](const Eigen::VectorXd& z) {
    const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return Eigen::VectorXd(e / e.sum());
  };
  // alpha * g(x), its gradient and Hessian.
  auto evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    const auto g = constraint_value(mdp, policy, spec.regularizer, alpha, std::span<const double>(x.data(), S * A));
    if (!grad) return alpha * g;
    grad->setZero(n);
    hess->setZero(n, n);
    switch (spec.regularizer) {
      case Regularizer::policy:
        for (std::size_t s = 0; s < S; ++s) {
          const auto K = static_cast<Eigen::Index>(s * A), a = static_cast<Eigen::Index>(A);
          const Eigen::VectorXd p = softmax(x.segment(K, a) / alpha);
          const double w = occ.state_marginal[s];
          grad->segment(K, a) = w * p;
          hess->block(K, K, a, a) = w / alpha * (Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose());
        }
        break;
      case Regularizer::state: {
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), n);
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t a = 0; a < A; ++a)
            W(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s * A + a)) = policy(s, a);
        const Eigen::VectorXd q = softmax(W * x / alpha);
        *grad = W.transpose() * q;
        *hess = W.transpose() * (Eigen::MatrixXd(q.asDiagonal()) - q * q.transpose()) * W / alpha;
        break;
      }
      case Regularizer::state_action: {
        const Eigen::VectorXd p = softmax(x / alpha);
        *grad = p;
        *hess = (Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose()) / alpha;
        break;
      }
    }
    return alpha * g;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n), grad(n);
  Eigen::MatrixXd hess(n, n);
  AdversaryResult out;
  double residual = 0.0;
  std::size_t it = 0;
  for (; it < max_iterations; ++it) {
    const double f = evaluate(x, &grad, &hess) - rho.dot(x);
    const Eigen::VectorXd gF = grad - rho;
    residual = gF.lpNorm<Eigen::Infinity>();
    if (residual < 1e-12) break;
    const double damping = std::max(1e-12, residual);
    const Eigen::VectorXd step =
        -(hess + damping * Eigen::MatrixXd::Identity(n, n)).ldlt().solve(gF);
    double t = 1.0;
    while (t > 1e-16 && evaluate(x + t * step, nullptr, nullptr) - rho.dot(x + t * step) >
                            f + 1e-4 * t * gF.dot(step) + 1e-15 * std::abs(f))
      t *= 0.5;
    if (t <= 1e-16) break;
    x += t * step;
  }
  evaluate(x, &grad, &hess);
  residual = (grad - rho).lpNorm<Eigen::Infinity>();
  if (residual > 1e-6)
    fail(ErrorKind::non_convergence, "adversary KKT residual " + std::to_string(residual) + " above 1e-6");

  const double bound = constraint_bound(spec, S, A);
  const double g = constraint_value(mdp, policy, spec.regularizer, alpha, std::span<const double>(x.data(), S * A));
  x.array() += alpha * (bound - g);

  numvec delta(x.data(), x.data() + n);
  out.perturbation = RewardPerturbation::from_delta(mdp, std::move(delta));
  out.value = expected_return(mdp, occ) - rho.dot(x);
  out.kkt_residual = residual;
  out.constraint_activity =
      constraint_value(mdp, policy, spec.regularizer, alpha, out.perturbation.delta) - bound;
  out.iterations = it;
  return out;
}

// ---------------------------------------------------------------------------
// Temperature limits of the state-entropy set

enum class LimitSet { alpha_zero, alpha_inf };

/// alpha * LSE_S(delta_pi / alpha) - alpha * log S.
inline double state_divergence(std::span<const double> delta_pi, double alpha) {
  numvec scaled(delta_pi.begin(), delta_pi.end());
  for (auto& x : scaled) x /= alpha;
  return alpha * (log_sum_exp(scaled) - std::log(static_cast<double>(scaled.size())));
}

inline bool limit_set_membership(const Mdp&, const Policy& policy, double epsilon, LimitSet which,
                                 const RewardPerturbation& pert) {
  const numvec dpi = policy_average(policy, pert.delta);
  if (which == LimitSet::alpha_zero) return *std::max_element(dpi.begin(), dpi.end()) <= epsilon;
  double mean = 0.0;
  for (double x : dpi) mean += x;
  return mean / static_cast<double>(dpi.size()) <= epsilon;
}

/// Boundary of the two-state set {alpha LSE(delta/alpha) - alpha log 2 <= eps}
/// around r_pi, as (r_tilde1, r_tilde2) points ordered by the mixing weight.
struct BoundaryPoint {
  double alpha, r1, r2;
};

inline std::vector<BoundaryPoint> two_state_boundary(std::span<const double> r_pi, double epsilon, double alpha,
                                                     std::size_t samples) {
  if (r_pi.size() != 2) fail(ErrorKind::invalid_input, "two_state_boundary needs two states");
  if (samples < 2) fail(ErrorKind::invalid_input, "need at least two samples");
  std::vector<BoundaryPoint> out;
  out.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double w = (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
    const double d1 = epsilon + alpha * std::log(2.0 * w);
    const double d2 = epsilon + alpha * std::log(2.0 * (1.0 - w));
    out.push_back({alpha, r_pi[0] - d1, r_pi[1] - d2});
  }
  return out;
}

inline std::string boundary_csv(std::span<const double> r_pi, double epsilon, std::span<const double> alphas,
                                std::size_t samples) {
  std::string csv = "alpha,r_tilde1,r_tilde2\n";
  char buf[96];
  for (double alpha : alphas)
    for (const auto& p : two_state_boundary(r_pi, epsilon, alpha, samples)) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.alpha, p.r1, p.r2);
      csv += buf;
    }
  return csv;
}

}  // namespace robust_entropy
