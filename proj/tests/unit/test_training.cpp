#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "robust_entropy/evaluation.hpp"
#include "robust_entropy/solver.hpp"
#include "robust_entropy/training.hpp"

using namespace robust_entropy;

namespace {

TrainingConfig small_config(AgentRegularizer reg, std::uint64_t seed) {
  TrainingConfig c;
  c.regularizer = reg;
  c.policy_coef = 0.02;
  c.beta_start = 0.1;
  c.beta_end = 0.01;
  c.updates = 150;
  c.seed = seed;
  return c;
}

Policy shortest_path_policy(const GridSpec& spec) {
  // Right along the top row, then down the last column.
  std::vector<std::size_t> choice(spec.n_states(), 0);
  for (std::size_t s = 0; s < spec.n_states(); ++s) choice[s] = spec.cell(s).x + 1 < spec.width ? 1 : 2;
  return Policy::deterministic(4, choice);
}

}  // namespace

TEST(Wilson, KnownValues) {
  const Interval ci = wilson_interval(50, 100);
  EXPECT_NEAR(0.5 * (ci.low + ci.high), 0.5, 1e-12);
  // Closed form for p = 1/2: half-width z sqrt(1/(4n) + z^2/(4n^2)) / (1 + z^2/n).
  const double z = kWilsonZ, n = 100.0;
  EXPECT_NEAR(ci.high - 0.5, z * std::sqrt(0.25 / n + z * z / (4 * n * n)) / (1 + z * z / n), 1e-12);
  const Interval all = wilson_interval(20, 20);
  EXPECT_EQ(all.high, 1.0);
  EXPECT_NEAR(all.low, 20.0 / (20.0 + z * z), 1e-12);
  EXPECT_EQ(wilson_interval(0, 20).low, 0.0);
}

TEST(SignTest, PValues) {
  EXPECT_NEAR(sign_test_pvalue(5, 0), 1.0 / 32, 1e-15);
  EXPECT_NEAR(sign_test_pvalue(0, 3), 1.0, 1e-15);
  EXPECT_NEAR(sign_test_pvalue(2, 1), 0.5, 1e-15);
  // 18 of 25 against a direct binomial-coefficient sum.
  double direct = 0.0, c = 1.0;
  for (int i = 0; i <= 25; ++i) {
    if (i >= 18) direct += c;
    c = c * (25 - i) / (i + 1);
  }
  EXPECT_NEAR(sign_test_pvalue(18, 7), direct / std::pow(2.0, 25), 1e-14);
  EXPECT_LT(sign_test_pvalue(18, 7), 0.04);
}

TEST(Evaluate, ShortestPathPolicySucceedsAtFourteen) {
  const GridSpec spec;
  const auto ev = evaluate(shortest_path_policy(spec), {{"nominal", spec}}, 20, 30, 1);
  EXPECT_EQ(ev[0].success_at(13), 0.0);
  EXPECT_EQ(ev[0].success_at(14), 1.0);
  EXPECT_EQ(ev[0].success_at(30), 1.0);
}

TEST(Evaluate, DisconnectedGoalNeverReached) {
  GridSpec spec;
  spec.walls = {{6, 7}, {7, 6}};
  const auto ev = evaluate(Policy::uniform(64, 4), {{"cut", spec}}, 50, 100, 2);
  EXPECT_EQ(ev[0].success_at(100), 0.0);
}

TEST(Evaluate, DeterministicAndOrderIndependent) {
  const GridSpec a, b = apply_perturbation(a, {.kind = PerturbationKind::scattered_obstacles, .seed = 1});
  const Policy pi = Policy::uniform(64, 4);
  const auto first = evaluate(pi, {{"a", a}, {"b", b}}, 40, 80, 3);
  const auto again = evaluate(pi, {{"a", a}, {"b", b}}, 40, 80, 3);
  EXPECT_EQ(evaluation_csv(first), evaluation_csv(again));
  const auto solo = evaluate(pi, {{"a", a}}, 40, 80, 3);
  EXPECT_EQ(solo[0].successes, first[0].successes);
}

TEST(Evaluate, SuccessIsMonotoneInHorizon) {
  const auto ev = evaluate(Policy::uniform(64, 4), {{"n", GridSpec{}}}, 100, 200, 4);
  for (std::size_t h = 1; h < 200; ++h) EXPECT_LE(ev[0].successes[h - 1], ev[0].successes[h]);
  const std::string csv = evaluation_csv(ev);
  EXPECT_EQ(csv.rfind("spec_id,horizon,success,ci_low,ci_high\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 201);
}

TEST(Rollout, RespectsHorizonAndGoal) {
  const GridSpec spec;
  const Mdp mdp = build_grid(spec, 0.9);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Trajectory t = rollout(mdp, 0, 63, Policy::uniform(64, 4), 20, rng);
    EXPECT_LE(t.length(), 20u);
    EXPECT_EQ(t.states.size(), t.length() + 1);
    EXPECT_EQ(t.reached_goal, t.states.back() == 63);
  }
}

TEST(Rollout, FeaturesMatchStates) {
  const GridSpec spec;
  const Mdp mdp = build_grid(spec, 0.9);
  Rng rng(6);
  RolloutBatch batch;
  for (int i = 0; i < 4; ++i) batch.trajectories.push_back(rollout(mdp, 0, 63, Policy::uniform(64, 4), 10, rng));
  const FeatureBatch fb = batch.features(spec, 2);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < batch.trajectories[i].length(); ++j, ++idx) {
      const Cell c = spec.cell(batch.trajectories[i].states[j]);
      EXPECT_EQ(fb.point(idx)[0], c.x);
      EXPECT_EQ(fb.point(idx)[1], c.y);
      EXPECT_EQ(fb.rollout[idx], i);
    }
  EXPECT_EQ(idx, fb.size());
}

TEST(Training, ConfigJsonRoundTrip) {
  TrainingConfig c = small_config(AgentRegularizer::both, 11);
  const TrainingConfig back = training_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(training_config_from_json({{"regularizer", "chaos"}}), Error);
  EXPECT_THROW(training_config_from_json({{"rollouts", 10}, {"group_size", 4}}), Error);
  EXPECT_THROW(training_config_from_json({{"updates", "many"}}), Error);
}

TEST(Training, Deterministic) {
  const auto a = train_rollout_agent(GridSpec{}, small_config(AgentRegularizer::both, 3));
  const auto b = train_rollout_agent(GridSpec{}, small_config(AgentRegularizer::both, 3));
  EXPECT_EQ(a.policy.probs, b.policy.probs);
  EXPECT_EQ(a.log_jsonl(), b.log_jsonl());
  const auto c = train_rollout_agent(GridSpec{}, small_config(AgentRegularizer::both, 4));
  EXPECT_NE(a.policy.probs, c.policy.probs);
}

TEST(Training, LogHasOneLinePerUpdate) {
  const auto res = train_rollout_agent(GridSpec{}, small_config(AgentRegularizer::state, 1));
  ASSERT_EQ(res.log.size(), 150u);
  const std::string log = res.log_jsonl();
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 150);
  const auto first = nlohmann::json::parse(log.substr(0, log.find('\n')));
  for (const char* key : {"step", "return", "state_entropy", "policy_entropy", "beta"}) EXPECT_TRUE(first.contains(key));
  EXPECT_NEAR(res.log.front().beta, 0.1, 1e-15);
  EXPECT_LT(res.log.back().beta, 0.011);
}

TEST(Training, UnregularizedAgentLearnsTheGrid) {
  TrainingConfig c = small_config(AgentRegularizer::none, 0);
  c.updates = 300;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    c.seed = seed;
    const auto res = train_rollout_agent(GridSpec{}, c);
    const auto ev = evaluate(res.policy, {{"n", GridSpec{}}}, 200, 64, seed);
    solved += ev[0].success_at(64) >= 0.95;
  }
  EXPECT_EQ(solved, 5);
}

TEST(Training, DivergenceIsReported) {
  TrainingConfig c = small_config(AgentRegularizer::none, 0);
  GridSpec spec;
  spec.goal_reward = 1e308;
  c.lr_policy = 1e10;
  try {
    train_rollout_agent(spec, c);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
  }
}

TEST(SingleRollout, LongestPathMaximizesEmpiricalEntropy) {
  const auto paths = simple_paths(snake_spec());
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_len = 0;
  for (const auto& p : paths) {
    const double h = single_rollout_entropy(p);
    if (h > best) {
      best = h;
      best_len = p.size();
    }
  }
  EXPECT_EQ(best_len, 12u);
  // Revisiting a cell gives a zero neighbor distance.
  EXPECT_EQ(single_rollout_entropy({{0, 0}, {1, 0}, {0, 0}}), -std::numeric_limits<double>::infinity());
}

TEST(Snake, StateEntropyRaisesExactStateEntropy) {
  // Exact occupancy-space solve: large-temperature state entropy spreads d beyond the optimal policy's.
  const Mdp m = snake_mdp(0.9);
  const auto star = solve_unregularized(m);
  SolveOptions opts;
  opts.regularizer = Regularizer::state;
  opts.alpha = 5.0;
  const auto soft = solve_regularized(m, opts);
  EXPECT_GT(entropy(compute_occupancy(m, soft.policy).state_marginal),
            entropy(compute_occupancy(m, star.policy).state_marginal) + 0.1);
}
