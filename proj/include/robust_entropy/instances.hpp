#pragma once

// Seeded random instance generators shared by the verification suites,
// the CLI and the tests.

#include <cstdint>
#include <random>

#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

using Rng = std::mt19937_64;

/// One Dirichlet(concentration, ..., concentration) draw of length n.
inline numvec dirichlet(std::size_t n, double concentration, Rng& rng) {
  std::gamma_distribution<double> gam(concentration, 1.0);
  numvec out(n);
  double total = 0.0;
  for (auto& x : out) {
    x = gam(rng);
    total += x;
  }
  if (total <= 0.0) {
    // Every draw underflowed; fall back to a point mass.
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::fill(out.begin(), out.end(), 0.0);
    out[pick(rng)] = 1.0;
    return out;
  }
  for (auto& x : out) x /= total;
  return out;
}

struct RandomMdpOptions {
  double reward_low = 0.0;
  double reward_high = 1.0;
  /// Dirichlet concentration of kernel rows.
  double concentration = 1.0;
  /// Uniform initial distribution when true, otherwise a Dirichlet draw.
  bool uniform_start = false;
};

inline Mdp random_mdp(std::size_t states, std::size_t actions, double gamma, Rng& rng,
                      const RandomMdpOptions& opts = {}) {
  Mdp m = Mdp::zeros(states, actions, gamma);
  std::uniform_real_distribution<double> rew(opts.reward_low, opts.reward_high);
  for (std::size_t s = 0; s < states; ++s)
    for (std::size_t a = 0; a < actions; ++a) {
      const numvec row = dirichlet(states, opts.concentration, rng);
      for (std::size_t n = 0; n < states; ++n) m.P(s, a, n) = row[n];
      m.r(s, a) = rew(rng);
    }
  if (opts.uniform_start)
    m.initial_dist.assign(states, 1.0 / static_cast<double>(states));
  else
    m.initial_dist = dirichlet(states, 1.0, rng);
  return m;
}

/// Stochastic policy with Dirichlet rows, floored so every action keeps mass.
inline Policy random_policy(std::size_t states, std::size_t actions, Rng& rng, double floor = 1e-3) {
  Policy p{states, actions, numvec(states * actions)};
  for (std::size_t s = 0; s < states; ++s) {
    numvec row = dirichlet(actions, 1.0, rng);
    double total = 0.0;
    for (auto& x : row) {
      x = std::max(x, floor);
      total += x;
    }
    for (std::size_t a = 0; a < actions; ++a) p(s, a) = row[a] / total;
  }
  return p;
}

/// Derive an independent stream for instance `index` of a run seeded with `seed`.
inline Rng stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  return Rng(seq);
}

}  // namespace robust_entropy
