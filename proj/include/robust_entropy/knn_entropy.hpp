#pragma once

// Particle k-nearest-neighbor entropy estimation and the intrinsic reward
// derived from it, plus the cosine temperature warm-up used in training.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "robust_entropy/error.hpp"
#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

/// N points of dimension `dim`, stored row-major. `rollout[i]` names the
/// rollout point i came from; with group_size > 0, rollouts r and r' share a
/// group iff r / group_size == r' / group_size. Empty `rollout` or
/// group_size == 0 means a single group.
struct FeatureBatch {
  std::size_t dim = 1;
  numvec points;
  std::vector<std::size_t> rollout;
  std::size_t group_size = 0;

  std::size_t size() const { return dim == 0 ? 0 : points.size() / dim; }
  const double* point(std::size_t i) const { return points.data() + i * dim; }
};

inline void validate(const FeatureBatch& batch) {
  if (batch.dim == 0) fail(ErrorKind::invalid_input, "feature dimension must be positive");
  if (batch.points.size() % batch.dim != 0) fail(ErrorKind::invalid_input, "points size is not a multiple of dim");
  if (!batch.rollout.empty() && batch.rollout.size() != batch.size())
    fail(ErrorKind::invalid_input, "rollout ids must match the number of points");
}

/// Digamma at a positive integer: -euler_gamma + sum_{j<k} 1/j.
inline double digamma_int(std::size_t k) {
  double out = -std::numbers::egamma;
  for (std::size_t j = 1; j < k; ++j) out += 1.0 / static_cast<double>(j);
  return out;
}

/// Distance from each listed point to its k-th nearest other point in the list.
/// Exact brute force; ties do not affect the returned distance.
inline numvec kth_neighbor_distances(const FeatureBatch& batch, const std::vector<std::size_t>& members,
                                     std::size_t k) {
  if (k == 0) fail(ErrorKind::invalid_input, "k must be positive");
  if (members.size() <= k)
    fail(ErrorKind::insufficient_points,
         "need more than k = " + std::to_string(k) + " points, got " + std::to_string(members.size()));
  numvec out(members.size()), dist(members.size() - 1);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double* x = batch.point(members[i]);
    std::size_t m = 0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (j == i) continue;
      const double* y = batch.point(members[j]);
      double d2 = 0.0;
      for (std::size_t c = 0; c < batch.dim; ++c) d2 += (x[c] - y[c]) * (x[c] - y[c]);
      dist[m++] = d2;
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    out[i] = std::sqrt(dist[k - 1]);
  }
  return out;
}

/// (1/N) sum_i log(N eps_i^D pi^(D/2) / (k Gamma(D/2 + 1))) + log k - digamma(k)
/// over the whole batch.
inline double knn_entropy(const FeatureBatch& batch, std::size_t k) {
  validate(batch);
  const std::size_t N = batch.size();
  std::vector<std::size_t> all(N);
  for (std::size_t i = 0; i < N; ++i) all[i] = i;
  const numvec eps = kth_neighbor_distances(batch, all, k);
  const double D = static_cast<double>(batch.dim);
  const double log_ball = 0.5 * D * std::log(std::numbers::pi) - std::lgamma(0.5 * D + 1.0);
  double mean_log = 0.0;
  for (double e : eps) mean_log += std::log(e);
  mean_log /= static_cast<double>(N);
  // The -log k inside the sum cancels the +log k of the bias correction.
  return std::log(static_cast<double>(N)) + log_ball + D * mean_log - digamma_int(k);
}

/// Groups of point indices, ordered by group key.
inline std::vector<std::vector<std::size_t>> feature_groups(const FeatureBatch& batch) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t key = (batch.rollout.empty() || batch.group_size == 0) ? 0 : batch.rollout[i] / batch.group_size;
    groups[key].push_back(i);
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto& [key, members] : groups) out.push_back(std::move(members));
  return out;
}

/// log(1 + distance to the k-th neighbor within the point's group).
inline numvec intrinsic_reward(const FeatureBatch& batch, std::size_t k) {
  validate(batch);
  numvec out(batch.size(), 0.0);
  for (const auto& members : feature_groups(batch)) {
    const numvec eps = kth_neighbor_distances(batch, members, k);
    for (std::size_t i = 0; i < members.size(); ++i) out[members[i]] = std::log1p(eps[i]);
  }
  return out;
}

inline double total_reward(double extrinsic, double intrinsic, double beta, double gamma_t) {
  return extrinsic + beta * gamma_t * intrinsic;
}

struct TemperatureSchedule {
  double beta_start = 1.0;
  double beta_end = 0.1;
  std::size_t total_steps = 1;
};

inline void validate(const TemperatureSchedule& s) {
  if (!(s.beta_end > 0.0) || !(s.beta_start >= s.beta_end))
    fail(ErrorKind::invalid_input, "schedule needs beta_start >= beta_end > 0");
  if (s.total_steps == 0) fail(ErrorKind::invalid_input, "schedule needs at least one step");
}

/// beta_end + (beta_start - beta_end) / 2 * (1 + cos(pi (t - 1) / T)), t in 1..T.
inline double temperature_at(const TemperatureSchedule& s, std::size_t t) {
  validate(s);
  if (t < 1 || t > s.total_steps)
    fail(ErrorKind::out_of_range, "step " + std::to_string(t) + " outside 1.." + std::to_string(s.total_steps));
  const double phase = std::numbers::pi * static_cast<double>(t - 1) / static_cast<double>(s.total_steps);
  return s.beta_end + 0.5 * (s.beta_start - s.beta_end) * (1.0 + std::cos(phase));
}

}  // namespace robust_entropy
