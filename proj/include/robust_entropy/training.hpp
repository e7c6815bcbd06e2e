#pragma once

// Rollout-based tabular actor-critic on grid worlds. State entropy enters as
// a k-NN intrinsic reward over (x, y) positions, policy entropy as a bonus on
// the actor update.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "robust_entropy/error.hpp"
#include "robust_entropy/gridworld.hpp"
#include "robust_entropy/instances.hpp"
#include "robust_entropy/knn_entropy.hpp"
#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

enum class AgentRegularizer { none, policy, state, both };

inline const char* to_string(AgentRegularizer r) {
  switch (r) {
    case AgentRegularizer::none: return "none";
    case AgentRegularizer::policy: return "policy";
    case AgentRegularizer::state: return "state";
    case AgentRegularizer::both: return "both";
  }
  return "?";
}

inline AgentRegularizer parse_agent_regularizer(std::string_view name) {
  if (name == "none") return AgentRegularizer::none;
  if (name == "policy") return AgentRegularizer::policy;
  if (name == "state") return AgentRegularizer::state;
  if (name == "both") return AgentRegularizer::both;
  fail(ErrorKind::unknown_regularizer, "unknown agent regularizer '" + std::string(name) + "'");
}

inline bool uses_policy_entropy(AgentRegularizer r) {
  return r == AgentRegularizer::policy || r == AgentRegularizer::both;
}
inline bool uses_state_entropy(AgentRegularizer r) {
  return r == AgentRegularizer::state || r == AgentRegularizer::both;
}

struct TrainingConfig {
  AgentRegularizer regularizer = AgentRegularizer::none;
  /// Weight of the policy-entropy bonus.
  double policy_coef = 0.0;
  /// Intrinsic temperature, annealed from beta_start to beta_end over the updates.
  double beta_start = 0.0;
  double beta_end = 0.0;
  /// Constant factor on the intrinsic reward.
  double intrinsic_discount = 1.0;
  std::size_t k = 1;
  std::size_t rollouts = 16;
  /// Rollouts per entropy estimate.
  std::size_t group_size = 4;
  double lr_policy = 0.5;
  double lr_value = 0.2;
  std::size_t updates = 300;
  std::size_t horizon = 64;
  double discount = 0.99;
  std::uint64_t seed = 0;
};

inline void validate(const TrainingConfig& c) {
  if (!(c.policy_coef >= 0.0)) fail(ErrorKind::invalid_input, "policy_coef must be nonnegative");
  if (uses_state_entropy(c.regularizer)) validate(TemperatureSchedule{c.beta_start, c.beta_end, std::max<std::size_t>(c.updates, 1)});
  if (!(c.intrinsic_discount >= 0.0)) fail(ErrorKind::invalid_input, "intrinsic_discount must be nonnegative");
  if (c.k == 0 || c.rollouts == 0 || c.group_size == 0 || c.updates == 0 || c.horizon == 0)
    fail(ErrorKind::invalid_input, "k, rollouts, group_size, updates and horizon must be positive");
  if (c.rollouts % c.group_size != 0) fail(ErrorKind::invalid_input, "rollouts must be a multiple of group_size");
  if (!(c.lr_policy > 0.0) || !(c.lr_value > 0.0)) fail(ErrorKind::invalid_input, "learning rates must be positive");
  if (!(c.discount > 0.0 && c.discount < 1.0)) fail(ErrorKind::invalid_input, "discount must lie in (0, 1)");
}

inline nlohmann::json to_json(const TrainingConfig& c) {
  return {{"regularizer", to_string(c.regularizer)},
          {"policy_coef", c.policy_coef},
          {"beta_start", c.beta_start},
          {"beta_end", c.beta_end},
          {"intrinsic_discount", c.intrinsic_discount},
          {"k", c.k},
          {"rollouts", c.rollouts},
          {"group_size", c.group_size},
          {"lr_policy", c.lr_policy},
          {"lr_value", c.lr_value},
          {"updates", c.updates},
          {"horizon", c.horizon},
          {"discount", c.discount},
          {"seed", c.seed}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
  try {
    TrainingConfig c;
    if (j.contains("regularizer")) c.regularizer = parse_agent_regularizer(j.at("regularizer").get<std::string>());
    c.policy_coef = j.value("policy_coef", c.policy_coef);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
    c.intrinsic_discount = j.value("intrinsic_discount", c.intrinsic_discount);
    c.k = j.value("k", c.k);
    c.rollouts = j.value("rollouts", c.rollouts);
    c.group_size = j.value("group_size", c.group_size);
    c.lr_policy = j.value("lr_policy", c.lr_policy);
    c.lr_value = j.value("lr_value", c.lr_value);
    c.updates = j.value("updates", c.updates);
    c.horizon = j.value("horizon", c.horizon);
    c.discount = j.value("discount", c.discount);
    c.seed = j.value("seed", c.seed);
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed training config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Rollouts

struct Trajectory {
  /// s_0 .. s_T; one more entry than actions.
  std::vector<std::size_t> states;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  bool reached_goal = false;

  std::size_t length() const { return actions.size(); }
};

struct RolloutBatch {
  std::vector<Trajectory> trajectories;
  std::size_t horizon = 0;

  /// (x, y) of every state at which an action was taken, tagged by rollout.
  FeatureBatch features(const GridSpec& spec, std::size_t group_size) const {
    FeatureBatch fb;
    fb.dim = 2;
    fb.group_size = group_size;
    for (std::size_t i = 0; i < trajectories.size(); ++i)
      for (std::size_t j = 0; j < trajectories[i].length(); ++j) {
        const Cell c = spec.cell(trajectories[i].states[j]);
        fb.points.push_back(c.x);
        fb.points.push_back(c.y);
        fb.rollout.push_back(i);
      }
    return fb;
  }
};

inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return probs.size() - 1;
}

/// One episode from start; ends on entering the goal or after `horizon` steps.
inline Trajectory rollout(const Mdp& mdp, std::size_t start, std::size_t goal, const Policy& policy,
                          std::size_t horizon, Rng& rng) {
  Trajectory t;
  std::size_t s = start;
  t.states.push_back(s);
  for (std::size_t step = 0; step < horizon && s != goal; ++step) {
    const std::size_t a = sample_index(policy.row(s), rng);
    const std::size_t n = sample_index(mdp.row(s, a), rng);
    t.actions.push_back(a);
    t.rewards.push_back(mdp.r(s, a));
    t.states.push_back(n);
    s = n;
  }
  t.reached_goal = s == goal;
  return t;
}

/// Intrinsic reward per feature point; groups with at most k points get zero.
inline numvec grouped_intrinsic_reward(const FeatureBatch& fb, std::size_t k) {
  numvec out(fb.size(), 0.0);
  for (const auto& members : feature_groups(fb)) {
    if (members.size() <= k) continue;
    const numvec eps = kth_neighbor_distances(fb, members, k);
    for (std::size_t i = 0; i < members.size(); ++i) out[members[i]] = std::log1p(eps[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainingLogEntry {
  std::size_t step = 0;
  /// Mean undiscounted extrinsic return per rollout.
  double mean_return = 0.0;
  double success_rate = 0.0;
  double mean_length = 0.0;
  /// Entropy of the empirical state-visitation histogram of the batch.
  double state_entropy = 0.0;
  /// Mean policy entropy over visited states.
  double policy_entropy = 0.0;
  double beta = 0.0;
};

inline nlohmann::json to_json(const TrainingLogEntry& e) {
  return {{"step", e.step},
          {"return", e.mean_return},
          {"success_rate", e.success_rate},
          {"mean_length", e.mean_length},
          {"state_entropy", e.state_entropy},
          {"policy_entropy", e.policy_entropy},
          {"beta", e.beta}};
}

struct TrainingResult {
  Policy policy;
  std::vector<TrainingLogEntry> log;

  std::string log_jsonl() const {
    std::string out;
    for (const auto& e : log) out += to_json(e).dump() + "\n";
    return out;
  }
};

namespace detail {

inline void softmax_row(const double* logits, double* out, std::size_t n) {
  const double m = *std::max_element(logits, logits + n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += out[i] = std::exp(logits[i] - m);
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
}

}  // namespace detail

/// Tabular softmax actor with a tabular state-value critic, trained by
/// Monte Carlo advantages on total rewards. Deterministic given the config.
inline TrainingResult train_rollout_agent(const GridSpec& spec, const TrainingConfig& cfg) {
  validate(cfg);
  const Mdp mdp = build_grid(spec, cfg.discount);
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  const std::size_t start = spec.index(spec.start), goal = spec.index(spec.goal);
  const bool state_reg = uses_state_entropy(cfg.regularizer);
  const double tau = uses_policy_entropy(cfg.regularizer) ? cfg.policy_coef : 0.0;
  const TemperatureSchedule schedule{cfg.beta_start, cfg.beta_end, cfg.updates};

  numvec theta(S * A, 0.0), value(S, 0.0);
  Policy policy = Policy::uniform(S, A);
  Rng rng = stream(cfg.seed, 0);
  TrainingResult result;

  for (std::size_t t = 1; t <= cfg.updates; ++t) {
    const double beta = state_reg ? temperature_at(schedule, t) : 0.0;
    RolloutBatch batch;
    batch.horizon = cfg.horizon;
    for (std::size_t i = 0; i < cfg.rollouts; ++i)
      batch.trajectories.push_back(rollout(mdp, start, goal, policy, cfg.horizon, rng));

    const FeatureBatch fb = batch.features(spec, cfg.group_size);
    const numvec intrinsic = state_reg ? grouped_intrinsic_reward(fb, cfg.k) : numvec(fb.size(), 0.0);

    TrainingLogEntry entry;
    entry.step = t;
    entry.beta = beta;
    std::vector<double> visits(S, 0.0);
    double visited_entropy = 0.0, visited_count = 0.0;

    std::size_t offset = 0;
    for (const Trajectory& traj : batch.trajectories) {
      const std::size_t T = traj.length();
      numvec total(T);
      for (std::size_t j = 0; j < T; ++j)
        total[j] = total_reward(traj.rewards[j], intrinsic[offset + j], beta, cfg.intrinsic_discount);
      double G = 0.0;
      for (std::size_t j = T; j-- > 0;) {
        G = total[j] + cfg.discount * G;
        const std::size_t s = traj.states[j], a = traj.actions[j];
        const double adv = G - value[s];
        value[s] += cfg.lr_value * adv;
        const double* pi = policy.probs.data() + s * A;
        double H = 0.0;
        for (std::size_t b = 0; b < A; ++b)
          if (pi[b] > 0.0) H -= pi[b] * std::log(pi[b]);
        for (std::size_t b = 0; b < A; ++b) {
          double g = adv * ((b == a ? 1.0 : 0.0) - pi[b]);
          if (tau > 0.0 && pi[b] > 0.0) g -= tau * pi[b] * (std::log(pi[b]) + H);
          theta[s * A + b] += cfg.lr_policy * g;
        }
        detail::softmax_row(theta.data() + s * A, policy.probs.data() + s * A, A);
        visits[s] += 1.0;
        visited_entropy += H;
        visited_count += 1.0;
      }
      for (double r : traj.rewards) entry.mean_return += r;
      entry.success_rate += traj.reached_goal ? 1.0 : 0.0;
      entry.mean_length += static_cast<double>(T);
      offset += T;
    }
    const double n = static_cast<double>(cfg.rollouts);
    entry.mean_return /= n;
    entry.success_rate /= n;
    entry.mean_length /= n;
    if (visited_count > 0.0) {
      for (auto& v : visits) v /= visited_count;
      entry.state_entropy = entropy(visits);
    }
    entry.policy_entropy = visited_count > 0.0 ? visited_entropy / visited_count : 0.0;
    if (!std::isfinite(entry.mean_return) || !std::isfinite(entry.policy_entropy) ||
        std::any_of(theta.begin(), theta.end(), [](double x) { return !std::isfinite(x); }) ||
        std::any_of(value.begin(), value.end(), [](double x) { return !std::isfinite(x); }))
      fail(ErrorKind::divergence, "training diverged at update " + std::to_string(t));
    result.log.push_back(entry);
  }
  result.policy = std::move(policy);
  return result;
}

/// Greedy action per state (lowest index on ties).
inline Policy greedy(const Policy& policy) {
  std::vector<std::size_t> choice(policy.n_states);
  for (std::size_t s = 0; s < policy.n_states; ++s) {
    const auto row = policy.row(s);
    choice[s] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return Policy::deterministic(policy.n_actions, choice);
}

/// Mean number of steps per episode under the policy, capped at the horizon.
inline double mean_trajectory_length(const GridSpec& spec, const Policy& policy, std::size_t episodes,
                                     std::size_t horizon, std::uint64_t seed) {
  const Mdp mdp = build_grid(spec, 0.5, false);
  Rng rng = stream(seed, 1);
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e)
    total += static_cast<double>(
        rollout(mdp, spec.index(spec.start), spec.index(spec.goal), policy, horizon, rng).length());
  return total / static_cast<double>(episodes);
}

/// k-NN entropy of the visited positions s_0 .. s_T of one trajectory, or
/// -infinity when it has too few points.
inline double single_rollout_entropy(const std::vector<Cell>& path, std::size_t k = 1) {
  if (path.size() <= k) return -std::numeric_limits<double>::infinity();
  FeatureBatch fb;
  fb.dim = 2;
  for (const Cell& c : path) {
    fb.points.push_back(c.x);
    fb.points.push_back(c.y);
  }
  std::vector<std::size_t> all(path.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const numvec eps = kth_neighbor_distances(fb, all, k);
  if (std::any_of(eps.begin(), eps.end(), [](double e) { return e == 0.0; }))
    return -std::numeric_limits<double>::infinity();
  return knn_entropy(fb, k);
}

}  // namespace robust_entropy
