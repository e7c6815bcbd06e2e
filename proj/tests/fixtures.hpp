#pragma once

// Small hand-built MDPs shared across the unit tests.

#include "robust_entropy/mdp.hpp"

namespace fixtures {

using robust_entropy::Mdp;

/// s0 -> s1 -> s0 for every action, start at s0.
inline Mdp two_state_cycle(double gamma, std::size_t actions = 1) {
  Mdp m = Mdp::zeros(2, actions, gamma);
  for (std::size_t a = 0; a < actions; ++a) {
    m.P(0, a, 1) = 1.0;
    m.P(1, a, 0) = 1.0;
  }
  m.initial_dist = {1.0, 0.0};
  return m;
}

/// Single state with self-loops and the given per-action rewards.
inline Mdp single_state(std::vector<double> rewards, double gamma = 0.9) {
  Mdp m = Mdp::zeros(1, rewards.size(), gamma);
  for (std::size_t a = 0; a < rewards.size(); ++a) {
    m.P(0, a, 0) = 1.0;
    m.r(0, a) = rewards[a];
  }
  m.initial_dist = {1.0};
  return m;
}

/// Two states, one action, uniform start, r^pi = (r1, r2). Each state self-loops.
inline Mdp two_state_rewards(double r1, double r2, double gamma = 0.9) {
  Mdp m = Mdp::zeros(2, 1, gamma);
  m.P(0, 0, 0) = 1.0;
  m.P(1, 0, 1) = 1.0;
  m.r(0, 0) = r1;
  m.r(1, 0) = r2;
  m.initial_dist = {0.5, 0.5};
  return m;
}

}  // namespace fixtures
