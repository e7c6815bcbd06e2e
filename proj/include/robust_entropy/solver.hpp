#pragma once

// Optimal policies for the unregularized and entropy-regularized objectives.
//
// The regularized problem is solved in occupancy space: all three objectives
// are concave in rho, and the Bellman flow equalities are linear. We run a
// primal log-barrier Newton method on the reachable states and certify the
// result with an explicit Lagrangian dual bound.

#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "robust_entropy/error.hpp"
#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

struct SolveOptions {
  /// Stop once the certified duality gap falls below this value.
  double tolerance = 1e-8;
  std::size_t max_iterations = 100000;
  Regularizer regularizer = Regularizer::state;
  double alpha = 1.0;
};

struct UnregularizedSolution {
  Policy policy;
  /// Conventional (unnormalized) optimal values.
  numvec values;
  double bellman_residual = 0.0;
  std::size_t iterations = 0;
};

struct RegularizedSolution {
  Policy policy;
  /// The optimizing occupancy found by the barrier method.
  Occupancy occupancy;
  /// Regularized objective of `policy`, recomputed from its own occupancy.
  double objective = 0.0;
  /// Lagrangian dual value; an upper bound on the optimum.
  double dual_bound = 0.0;
  double gap = 0.0;
  /// Objective at every barrier center, in order.
  numvec objective_trace;
  std::size_t iterations = 0;
};

// ---------------------------------------------------------------------------
// Unregularized

/// Conventional Q(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) V(s').
inline double q_value(const Mdp& mdp, const numvec& V, std::size_t s, std::size_t a) {
  double q = mdp.r(s, a);
  const auto row = mdp.row(s, a);
  for (std::size_t n = 0; n < mdp.n_states; ++n) q += mdp.discount * row[n] * V[n];
  return q;
}

namespace detail {

inline numvec evaluate_deterministic(const Mdp& mdp, const std::vector<std::size_t>& choice) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states);
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd rhs(S);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto row = mdp.row(s, choice[s]);
    for (std::size_t n = 0; n < mdp.n_states; ++n)
      lhs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(n)) -= mdp.discount * row[n];
    rhs(static_cast<Eigen::Index>(s)) = mdp.r(s, choice[s]);
  }
  Eigen::VectorXd v = lhs.partialPivLu().solve(rhs);
  return numvec(v.data(), v.data() + S);
}

}  // namespace detail

/// Value iteration to `tolerance`, then exact policy-iteration polish.
inline UnregularizedSolution solve_unregularized(const Mdp& mdp, double tolerance = 1e-12,
                                                 std::size_t max_iterations = 100000) {
  validate(mdp);
  const auto S = mdp.n_states, A = mdp.n_actions;
  numvec V(S, 0.0), next(S);
  UnregularizedSolution out;
  double scale = 1.0;
  for (double r : mdp.reward) scale = std::max(scale, std::abs(r));
  const double threshold = tolerance * scale;

  std::size_t it = 0;
  for (;; ++it) {
    if (it >= max_iterations) fail(ErrorKind::non_convergence, "value iteration exceeded max_iterations");
    double delta = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < A; ++a) best = std::max(best, q_value(mdp, V, s, a));
      next[s] = best;
      delta = std::max(delta, std::abs(best - V[s]));
    }
    V.swap(next);
    if (delta <= threshold) break;
  }

  std::vector<std::size_t> choice(S, 0);
  auto greedy = [&](const numvec& values, std::vector<std::size_t>& pick) {
    bool changed = false;
    for (std::size_t s = 0; s < S; ++s) {
      double best = q_value(mdp, values, s, pick[s]);
      for (std::size_t a = 0; a < A; ++a) {
        const double q = q_value(mdp, values, s, a);
        if (q > best + 1e-12 * scale) {
          best = q;
          pick[s] = a;
          changed = true;
        }
      }
    }
    return changed;
  };
  // Initial greedy pick w.r.t. the value-iteration values (first maximizer wins).
  for (std::size_t s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      const double q = q_value(mdp, V, s, a);
      if (q > best) {
        best = q;
        choice[s] = a;
      }
    }
  }
  numvec values = detail::evaluate_deterministic(mdp, choice);
  for (std::size_t polish = 0; polish < 1000 && greedy(values, choice); ++polish)
    values = detail::evaluate_deterministic(mdp, choice);

  double residual = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) best = std::max(best, q_value(mdp, values, s, a));
    residual = std::max(residual, std::abs(best - values[s]));
  }
  out.policy = Policy::deterministic(A, choice);
  out.values = std::move(values);
  out.bellman_residual = residual;
  out.iterations = it + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Regularized

/// States reachable from the support of the initial distribution.
inline std::vector<std::size_t> reachable_states(const Mdp& mdp) {
  std::vector<char> seen(mdp.n_states, 0);
  std::queue<std::size_t> frontier;
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (mdp.initial_dist[s] > 0.0) {
      seen[s] = 1;
      frontier.push(s);
    }
  while (!frontier.empty()) {
    const auto s = frontier.front();
    frontier.pop();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.row(s, a);
      for (std::size_t n = 0; n < mdp.n_states; ++n)
        if (row[n] > 0.0 && !seen[n]) {
          seen[n] = 1;
          frontier.push(n);
        }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    if (seen[s]) out.push_back(s);
  return out;
}

namespace detail {

/// Occupancy-space problem restricted to reachable states.
class BarrierProblem {
 public:
  BarrierProblem(const Mdp& mdp, Regularizer reg, double alpha)
      : mdp_(mdp), states_(reachable_states(mdp)), A_(mdp.n_actions) {
    switch (reg) {
      case Regularizer::policy: coef_state_ = 0.0; coef_policy_ = alpha; break;
      case Regularizer::state: coef_state_ = alpha; coef_policy_ = 0.0; break;
      case Regularizer::state_action: coef_state_ = alpha; coef_policy_ = alpha; break;
    }
    m_ = states_.size();
    n_ = m_ * A_;
    std::vector<std::ptrdiff_t> index(mdp.n_states, -1);
    for (std::size_t k = 0; k < m_; ++k) index[states_[k]] = static_cast<std::ptrdiff_t>(k);

    B_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_));
    c_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    r_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    for (std::size_t k = 0; k < m_; ++k) {
      const auto s = states_[k];
      c_(static_cast<Eigen::Index>(k)) = (1.0 - mdp.discount) * mdp.initial_dist[s];
      for (std::size_t a = 0; a < A_; ++a) {
        const auto col = static_cast<Eigen::Index>(k * A_ + a);
        r_(col) = mdp.r(s, a);
        B_(static_cast<Eigen::Index>(k), col) += 1.0;
        const auto row = mdp.row(s, a);
        for (std::size_t nxt = 0; nxt < mdp.n_states; ++nxt) {
          if (row[nxt] == 0.0) continue;
          B_(static_cast<Eigen::Index>(index[nxt]), col) -= mdp.discount * row[nxt];
        }
      }
    }
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  const std::vector<std::size_t>& states() const { return states_; }

  Eigen::VectorXd marginal(const Eigen::VectorXd& rho) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < m_; ++k)
      for (std::size_t a = 0; a < A_; ++a) d(static_cast<Eigen::Index>(k)) += rho(static_cast<Eigen::Index>(k * A_ + a));
    return d;
  }

  static double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

  /// Concave objective f(rho) = <r,rho> + cS H(d) + cP (H(rho) - H(d)).
  double objective(const Eigen::VectorXd& rho) const {
    const Eigen::VectorXd d = marginal(rho);
    double hd = 0.0, hrho = 0.0;
    for (Eigen::Index k = 0; k < d.size(); ++k) hd -= xlogx(d(k));
    for (Eigen::Index i = 0; i < rho.size(); ++i) hrho -= xlogx(rho(i));
    return r_.dot(rho) + coef_state_ * hd + coef_policy_ * (hrho - hd);
  }

  double barrier_value(const Eigen::VectorXd& rho, double mu) const {
    double logs = 0.0;
    for (Eigen::Index i = 0; i < rho.size(); ++i) logs += std::log(rho(i));
    return -objective(rho) - mu * logs;
  }

  /// One infeasible-start Newton step for psi = -f - mu sum log rho.
  /// Returns (direction, dual estimate, squared Newton decrement).
  struct Step {
    Eigen::VectorXd direction;
    Eigen::VectorXd dual;
    double decrement2 = 0.0;
  };

  Step newton_step(const Eigen::VectorXd& rho, double mu) const {
    const Eigen::VectorXd d = marginal(rho);
    const auto A = static_cast<Eigen::Index>(A_);
    const auto n = static_cast<Eigen::Index>(n_);
    // Each state block of the Hessian of psi is diag(D) + c 11^T with
    // D_a = cP / rho_a + mu / rho_a^2 and c = (cS - cP) / d.
    Eigen::VectorXd grad(n), diag(n), coupling(static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < m_; ++k) {
      const auto K = static_cast<Eigen::Index>(k);
      const double dk = d(K);
      for (Eigen::Index a = 0; a < A; ++a) {
        const auto i = K * A + a;
        const double x = rho(i);
        const double gf = r_(i) + coef_state_ * (-std::log(dk) - 1.0) + coef_policy_ * (std::log(dk) - std::log(x));
        grad(i) = -gf - mu / x;
        diag(i) = coef_policy_ / x + mu / (x * x);
      }
      coupling(K) = (coef_state_ - coef_policy_) / dk;
    }
    // Full KKT system [H B^T; B 0]; the Hessian alone is near singular
    // along per-state scalings when cS = 0.
    const Eigen::Index M = static_cast<Eigen::Index>(m_);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + M, n + M);
    for (std::size_t k = 0; k < m_; ++k) {
      const auto K = static_cast<Eigen::Index>(k);
      kkt.block(K * A, K * A, A, A).setConstant(coupling(K));
      for (Eigen::Index a = 0; a < A; ++a) kkt(K * A + a, K * A + a) += diag(K * A + a);
    }
    kkt.topRightCorner(n, M) = B_.transpose();
    kkt.bottomLeftCorner(M, n) = B_;
    Eigen::VectorXd rhs(n + M);
    rhs.head(n) = -grad;
    rhs.tail(M) = c_ - B_ * rho;
    const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
    Step step;
    step.direction = sol.head(n);
    step.dual = sol.tail(M);
    double dec = 0.0;
    for (std::size_t k = 0; k < m_; ++k) {
      const auto K = static_cast<Eigen::Index>(k);
      const auto seg = step.direction.segment(K * A, A);
      dec += seg.cwiseProduct(seg).dot(diag.segment(K * A, A)) + coupling(K) * seg.sum() * seg.sum();
    }
    step.decrement2 = std::max(0.0, dec);
    return step;
  }

  /// Lagrangian dual value at v, minimized over the constant shift v + t 1.
  double dual_bound(const Eigen::VectorXd& v) const {
    const auto A = static_cast<Eigen::Index>(A_);
    double linear = c_.dot(v);
    const Eigen::VectorXd reduced = r_ - B_.transpose() * v;
    numvec per_state(m_);
    for (std::size_t k = 0; k < m_; ++k) {
      const auto seg = reduced.segment(static_cast<Eigen::Index>(k) * A, A);
      if (coef_policy_ > 0.0) {
        numvec scaled(A_);
        for (Eigen::Index a = 0; a < A; ++a) scaled[static_cast<std::size_t>(a)] = seg(a) / coef_policy_;
        per_state[k] = coef_policy_ * log_sum_exp(scaled);
      } else {
        per_state[k] = seg.maxCoeff();
      }
    }
    if (coef_state_ > 0.0) {
      for (auto& x : per_state) x /= coef_state_;
      return linear + coef_state_ * log_sum_exp(per_state);
    }
    return linear + *std::max_element(per_state.begin(), per_state.end());
  }

  Eigen::VectorXd initial_point() const {
    // Uniform-policy occupancy restricted to reachable states: strictly positive.
    const Policy uniform = Policy::uniform(mdp_.n_states, mdp_.n_actions);
    const Occupancy occ = compute_occupancy(mdp_, uniform);
    Eigen::VectorXd rho(static_cast<Eigen::Index>(n_));
    for (std::size_t k = 0; k < m_; ++k)
      for (std::size_t a = 0; a < A_; ++a)
        rho(static_cast<Eigen::Index>(k * A_ + a)) = std::max(occ.rho[states_[k] * A_ + a], 1e-300);
    return rho;
  }

  Policy extract_policy(const Eigen::VectorXd& rho) const {
    Policy p = Policy::uniform(mdp_.n_states, mdp_.n_actions);
    const Eigen::VectorXd d = marginal(rho);
    for (std::size_t k = 0; k < m_; ++k) {
      const double dk = d(static_cast<Eigen::Index>(k));
      if (dk < 1e-12) continue;
      for (std::size_t a = 0; a < A_; ++a) p(states_[k], a) = rho(static_cast<Eigen::Index>(k * A_ + a)) / dk;
    }
    return p;
  }

  Occupancy to_occupancy(const Eigen::VectorXd& rho) const {
    Occupancy occ;
    occ.normalization = 1.0 - mdp_.discount;
    occ.rho.assign(mdp_.n_states * A_, 0.0);
    occ.state_marginal.assign(mdp_.n_states, 0.0);
    for (std::size_t k = 0; k < m_; ++k)
      for (std::size_t a = 0; a < A_; ++a) {
        const double x = rho(static_cast<Eigen::Index>(k * A_ + a));
        occ.rho[states_[k] * A_ + a] = x;
        occ.state_marginal[states_[k]] += x;
      }
    return occ;
  }

 private:
  const Mdp& mdp_;
  std::vector<std::size_t> states_;
  std::size_t A_;
  std::size_t m_ = 0, n_ = 0;
  double coef_state_ = 0.0, coef_policy_ = 0.0;
  Eigen::MatrixXd B_;
  Eigen::VectorXd c_, r_;
};

}  // namespace detail

/// Maximizes E_rho[r] + alpha * entropy over the Bellman-flow polytope.
/// Returns a policy whose objective is within opts.tolerance of the optimum,
/// certified by a dual bound; throws non_convergence otherwise.
inline RegularizedSolution solve_regularized(const Mdp& mdp, const SolveOptions& opts) {
  validate(mdp);
  if (!(opts.alpha > 0.0)) fail(ErrorKind::invalid_input, "solve_regularized requires alpha > 0");
  if (!(opts.tolerance > 0.0)) fail(ErrorKind::invalid_input, "tolerance must be positive");

  detail::BarrierProblem problem(mdp, opts.regularizer, opts.alpha);
  Eigen::VectorXd rho = problem.initial_point();
  Eigen::VectorXd dual = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.m()));
  const double n = static_cast<double>(problem.n());

  RegularizedSolution out;
  double mu = 0.1;
  std::size_t iterations = 0;
  for (;;) {
    // Centering.
    for (std::size_t inner = 0; inner < 200; ++inner) {
      if (++iterations > opts.max_iterations)
        fail(ErrorKind::non_convergence, "barrier method exceeded max_iterations");
      const auto step = problem.newton_step(rho, mu);
      dual = step.dual;
      const double psi = problem.barrier_value(rho, mu);
      double t = 1.0;
      for (Eigen::Index i = 0; i < rho.size(); ++i)
        if (step.direction(i) < 0.0) t = std::min(t, -0.99 * rho(i) / step.direction(i));
      Eigen::VectorXd trial = rho + t * step.direction;
      while (t > 1e-12 && problem.barrier_value(trial, mu) > psi - 0.25 * t * step.decrement2 + 1e-14 * std::abs(psi)) {
        t *= 0.5;
        trial = rho + t * step.direction;
      }
      if (t <= 1e-12) break;
      rho = trial;
      if (step.decrement2 < 1e-20 * std::max(1.0, n)) break;
    }
    out.objective_trace.push_back(problem.objective(rho));

    if (n * mu <= 0.1 * opts.tolerance) {
      const double bound = problem.dual_bound(problem.newton_step(rho, mu).dual);
      const Policy policy = problem.extract_policy(rho);
      const double value = regularized_return(mdp, policy, opts.regularizer, opts.alpha);
      if (bound - value <= opts.tolerance || mu < 1e-18) {
        out.policy = policy;
        out.occupancy = problem.to_occupancy(rho);
        out.objective = value;
        out.dual_bound = bound;
        out.gap = bound - value;
        out.iterations = iterations;
        if (out.gap > opts.tolerance)
          fail(ErrorKind::non_convergence, "duality gap " + std::to_string(out.gap) + " above tolerance");
        return out;
      }
    }
    mu *= 0.1;
  }
}

}  // namespace robust_entropy
