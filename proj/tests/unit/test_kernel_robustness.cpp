#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "robust_entropy/kernel_robustness.hpp"

using namespace robust_entropy;

namespace {

numvec mix_toward_uniform(const Mdp& m, double w) {
  numvec k = m.kernel;
  for (auto& x : k) x = (1.0 - w) * x + w / static_cast<double>(m.n_states);
  return k;
}

Mdp constant_reward(Mdp m, double c) {
  std::fill(m.reward.begin(), m.reward.end(), c);
  return m;
}

}  // namespace

TEST(KernelSet, NominalKernelIsInside) {
  Rng rng(1);
  const Mdp m = random_mdp(4, 2, 0.9, rng);
  const Policy pi = random_policy(4, 2, rng);
  EXPECT_NEAR(kernel_divergence(m, pi, 0.5, m.kernel), 0.0, 1e-14);
  EXPECT_TRUE(kernel_set_membership(m, pi, 0.5, 1e-9, m.kernel));
}

TEST(KernelSet, UniformMarginalsAreInside) {
  // Every row uniform under both kernels: d is uniform either way.
  Mdp m = Mdp::zeros(3, 2, 0.9);
  std::fill(m.kernel.begin(), m.kernel.end(), 1.0 / 3.0);
  m.initial_dist = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  Mdp other = m;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t n = 0; n < 3; ++n) other.P(s, a, n) = (n == (s + a + 1) % 3) ? 1.0 : 0.0;
  // A cyclic permutation keeps the uniform start uniform.
  EXPECT_NEAR(kernel_divergence(m, Policy::uniform(3, 2), 0.3, other.kernel), 0.0, 1e-14);
  EXPECT_TRUE(kernel_set_membership(m, Policy::uniform(3, 2), 0.3, 1e-6, other.kernel));
}

TEST(KernelSet, SmallMixtureMatchesDirectFormula) {
  Rng rng(2);
  const Mdp m = random_mdp(4, 2, 0.9, rng);
  const Policy pi = random_policy(4, 2, rng);
  const numvec k = mix_toward_uniform(m, 0.01);
  const auto d = compute_occupancy(m, pi).state_marginal;
  const auto dt = compute_occupancy(with_kernel(m, k), pi).state_marginal;
  const double alpha = 0.7;
  double sum = 0.0;
  for (std::size_t s = 0; s < 4; ++s) sum += std::pow(d[s] / dt[s], 1.0 / alpha);
  const double direct = alpha * std::log(sum / 4.0);
  EXPECT_NEAR(kernel_divergence(m, pi, alpha, k), direct, 1e-13);
  EXPECT_EQ(kernel_set_membership(m, pi, alpha, 1e-3, k), direct <= 1e-3);
}

TEST(KernelSet, SupportMismatch) {
  // Under the perturbed kernel state 1 is never reached.
  Mdp m = fixtures::two_state_cycle(0.9);
  numvec k = {1.0, 0.0, 1.0, 0.0};
  try {
    kernel_divergence(m, Policy::uniform(2, 1), 1.0, k);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::support_mismatch);
  }
}

TEST(KernelBound, ConstantRewardUniformMarginalIsTight) {
  Mdp m = Mdp::zeros(3, 2, 0.9);
  std::fill(m.kernel.begin(), m.kernel.end(), 1.0 / 3.0);
  std::fill(m.reward.begin(), m.reward.end(), 2.5);
  m.initial_dist = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  EXPECT_NEAR(kernel_lower_bound(m, Policy::uniform(3, 2), 0.4, 0.0), 2.5, 1e-12);
}

TEST(KernelBound, BelowNominalReturn) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Mdp m = random_mdp(4, 3, 0.9, rng, {.reward_low = 0.05});
    const Policy pi = random_policy(4, 3, rng);
    EXPECT_LE(kernel_lower_bound(m, pi, 0.2 + 0.1 * (trial % 5), 0.0), expected_return(m, pi));
  }
}

TEST(KernelBound, RejectsNonPositiveReward) {
  Rng rng(4);
  Mdp m = random_mdp(3, 2, 0.9, rng);
  m.r(1, 0) = 0.0;
  try {
    kernel_lower_bound(m, Policy::uniform(3, 2), 1.0, 0.1);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::nonpositive_reward);
  }
  EXPECT_THROW(state_action_kernel_bound(m, Policy::uniform(3, 2), 1.0, 0.1), Error);
}

TEST(KernelBound, HoldsOverSampledMembers) {
  Rng rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    const Mdp m = random_mdp(4, 2, 0.9, rng, {.reward_low = 0.1});
    const Policy pi = random_policy(4, 2, rng);
    const double alpha = 0.5, eps = 0.05;
    const auto res = search_member_kernels(m, pi, alpha, eps, rng, {.members = 1000, .descent_steps = 500});
    EXPECT_EQ(res.members, 1000u);
    EXPECT_GE(res.min_value, kernel_lower_bound(m, pi, alpha, eps));
    EXPECT_LE(res.min_value, res.sampled_min);
    EXPECT_TRUE(kernel_set_membership(m, pi, alpha, eps, res.argmin_kernel));
  }
}

TEST(StateActionBound, LooserByPolicyEntropyFactor) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Mdp m = random_mdp(4, 3, 0.9, rng, {.reward_low = 0.1});
    const Policy pi = random_policy(4, 3, rng);
    const double alpha = 0.3 + 0.1 * trial, eps = 0.1;
    const double state = kernel_lower_bound(m, pi, alpha, eps);
    const double sa = state_action_kernel_bound(m, pi, alpha, eps);
    const Occupancy occ = compute_occupancy(m, pi);
    EXPECT_LE(sa, state);
    EXPECT_NEAR(sa / state, std::exp(alpha * (expected_policy_entropy(occ, pi) - std::log(3.0))), 1e-12);
  }
}

TEST(StateActionBound, EqualOnlyForUniformActions) {
  Rng rng(7);
  const Mdp m = random_mdp(4, 3, 0.9, rng, {.reward_low = 0.1});
  EXPECT_NEAR(state_action_kernel_bound(m, Policy::uniform(4, 3), 0.5, 0.1),
              kernel_lower_bound(m, Policy::uniform(4, 3), 0.5, 0.1), 1e-14);
  const Policy det = Policy::deterministic(3, {0, 2, 1, 0});
  EXPECT_NEAR(state_action_kernel_bound(m, det, 0.5, 0.1) / kernel_lower_bound(m, det, 0.5, 0.1),
              std::exp(-0.5 * std::log(3.0)), 1e-12);
}

TEST(Impossibility, ConstantRewardsNeutralizeKernels) {
  Rng rng(8);
  std::vector<Mdp> family;
  for (double c : {0.0, 5.0, -1.5}) family.push_back(constant_reward(random_mdp(4, 2, 0.9, rng), c));
  const Policy pi = random_policy(4, 2, rng);
  const auto report = impossibility_probe(family, pi, Regularizer::state, 1.0, rng);
  ASSERT_EQ(report.entries.size(), 3u);
  for (const auto& e : report.entries) {
    EXPECT_NEAR(e.nominal, e.c, 1e-12);
    EXPECT_NEAR(e.robust_value, e.c, 1e-12);
    EXPECT_GT(e.omega, 0.0);
  }
  EXPECT_TRUE(report.identity_impossible);
}

TEST(Impossibility, ZeroRewardOmegaIsStateEntropy) {
  Rng rng(9);
  const Mdp m = constant_reward(random_mdp(3, 2, 0.8, rng), 0.0);
  const Policy pi = random_policy(3, 2, rng);
  const auto report = impossibility_probe({m}, pi, Regularizer::state, 1.0, rng);
  EXPECT_NEAR(report.entries[0].omega, entropy(compute_occupancy(m, pi).state_marginal), 1e-14);
  EXPECT_EQ(report.entries[0].robust_value, 0.0);
}

TEST(Impossibility, DegenerateCase) {
  Rng rng(10);
  const Mdp m = fixtures::single_state({3.0, 3.0});
  const auto report = impossibility_probe({m}, Policy::deterministic(2, {1}), Regularizer::policy, 1.0, rng);
  EXPECT_EQ(report.entries[0].omega, 0.0);
  EXPECT_FALSE(report.identity_impossible);
}

TEST(Impossibility, RejectsNonConstantReward) {
  Rng rng(11);
  const Mdp m = random_mdp(3, 2, 0.9, rng);
  try {
    impossibility_probe({m}, Policy::uniform(3, 2), Regularizer::state, 1.0, rng);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_constant_reward);
  }
}

TEST(KernelSweep, Csv) {
  Rng rng(12);
  const Mdp m = random_mdp(3, 2, 0.9, rng, {.reward_low = 0.1});
  const std::string csv = kernel_bound_sweep_csv(m, Policy::uniform(3, 2), 0.5, {0.01, 0.1}, rng,
                                                 {.members = 50, .descent_steps = 50});
  EXPECT_EQ(csv.rfind("epsilon,bound,sampled_min\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
