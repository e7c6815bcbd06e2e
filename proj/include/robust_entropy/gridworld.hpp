#pragma once

// Position-only grid worlds with cardinal moves, their perturbations, and
// exhaustive path oracles for small grids.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "robust_entropy/error.hpp"
#include "robust_entropy/instances.hpp"
#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Actions: 0 up (y - 1), 1 right, 2 down, 3 left.
inline constexpr int kMoves[4][2] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
inline constexpr std::size_t kGridActions = 4;

struct GridSpec {
  int width = 8;
  int height = 8;
  Cell start{0, 0};
  Cell goal{7, 7};
  std::vector<Cell> walls;
  double step_reward = 0.0;
  double goal_reward = 1.0;
  /// With this probability the move is replaced by a uniformly random one.
  double slip_prob = 0.0;

  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_wall(Cell c) const { return std::binary_search(walls.begin(), walls.end(), c); }
  std::size_t n_states() const { return static_cast<std::size_t>(width * height); }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y * width + c.x); }
  Cell cell(std::size_t s) const { return {static_cast<int>(s) % width, static_cast<int>(s) / width}; }

  /// Deterministic successor of a move; walls and the boundary block it.
  Cell move(Cell c, std::size_t action) const {
    const Cell n{c.x + kMoves[action][0], c.y + kMoves[action][1]};
    return inside(n) && !is_wall(n) ? n : c;
  }
};

inline void normalize_walls(GridSpec& spec) {
  std::sort(spec.walls.begin(), spec.walls.end());
  spec.walls.erase(std::unique(spec.walls.begin(), spec.walls.end()), spec.walls.end());
}

/// Shortest number of moves from start to goal, or -1 when unreachable.
inline int shortest_path_length(const GridSpec& spec) {
  std::vector<int> dist(spec.n_states(), -1);
  std::queue<Cell> frontier;
  dist[spec.index(spec.start)] = 0;
  frontier.push(spec.start);
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop();
    if (c == spec.goal) return dist[spec.index(c)];
    for (std::size_t a = 0; a < kGridActions; ++a) {
      const Cell n = spec.move(c, a);
      if (dist[spec.index(n)] >= 0) continue;
      dist[spec.index(n)] = dist[spec.index(c)] + 1;
      frontier.push(n);
    }
  }
  return -1;
}

/// Checks bounds, wall placement and rewards. Nominal specs must also
/// connect start to goal; perturbed specs may not.
inline void validate(const GridSpec& spec, bool require_connected = true) {
  if (spec.width <= 0 || spec.height <= 0) fail(ErrorKind::invalid_input, "grid dimensions must be positive");
  if (!spec.inside(spec.start) || !spec.inside(spec.goal)) fail(ErrorKind::invalid_input, "start or goal outside the grid");
  if (!std::is_sorted(spec.walls.begin(), spec.walls.end()))
    fail(ErrorKind::invalid_input, "walls must be sorted; call normalize_walls");
  for (const Cell& w : spec.walls)
    if (!spec.inside(w)) fail(ErrorKind::invalid_input, "wall outside the grid");
  if (spec.is_wall(spec.start) || spec.is_wall(spec.goal)) fail(ErrorKind::invalid_input, "start or goal is a wall");
  if (!(spec.slip_prob >= 0.0 && spec.slip_prob < 1.0)) fail(ErrorKind::invalid_input, "slip_prob must lie in [0, 1)");
  if (!std::isfinite(spec.step_reward) || !std::isfinite(spec.goal_reward))
    fail(ErrorKind::invalid_input, "rewards must be finite");
  if (require_connected && shortest_path_length(spec) < 0)
    fail(ErrorKind::invalid_input, "walls disconnect start from goal");
}

/// Tabular MDP over all cells (state = y * width + x). The goal is absorbing
/// with zero reward; goal_reward is paid on the transition into it. Wall
/// cells are unreachable self-loops.
inline Mdp build_grid(const GridSpec& spec, double discount, bool require_connected = true) {
  validate(spec, require_connected);
  const std::size_t S = spec.n_states();
  Mdp m = Mdp::zeros(S, kGridActions, discount);
  const double slip = spec.slip_prob / static_cast<double>(kGridActions);
  for (std::size_t s = 0; s < S; ++s) {
    const Cell c = spec.cell(s);
    for (std::size_t a = 0; a < kGridActions; ++a) {
      if (c == spec.goal || spec.is_wall(c)) {
        m.P(s, a, s) = 1.0;
        continue;
      }
      for (std::size_t b = 0; b < kGridActions; ++b) {
        const double prob = (b == a ? 1.0 - spec.slip_prob : 0.0) + slip;
        if (prob == 0.0) continue;
        const std::size_t n = spec.index(spec.move(c, b));
        m.P(s, a, n) += prob;
        if (spec.cell(n) == spec.goal) m.r(s, a) += prob * spec.goal_reward;
      }
      m.r(s, a) += spec.step_reward;
    }
  }
  m.initial_dist.assign(S, 0.0);
  m.initial_dist[spec.index(spec.start)] = 1.0;
  return m;
}

/// The 2 x 6 corridor: start in the top-left corner, goal in the top-right.
inline GridSpec snake_spec() {
  GridSpec spec;
  spec.width = 6;
  spec.height = 2;
  spec.start = {0, 0};
  spec.goal = {5, 0};
  return spec;
}

inline Mdp snake_mdp(double discount) { return build_grid(snake_spec(), discount); }

// ---------------------------------------------------------------------------
// Perturbations

enum class PerturbationKind { wall_segment, scattered_obstacles, goal_shift };

inline const char* to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::wall_segment: return "wall_segment";
    case PerturbationKind::scattered_obstacles: return "scattered_obstacles";
    case PerturbationKind::goal_shift: return "goal_shift";
  }
  return "?";
}

inline PerturbationKind parse_perturbation_kind(std::string_view name) {
  if (name == "wall_segment") return PerturbationKind::wall_segment;
  if (name == "scattered_obstacles") return PerturbationKind::scattered_obstacles;
  if (name == "goal_shift") return PerturbationKind::goal_shift;
  fail(ErrorKind::invalid_input, "unknown perturbation kind '" + std::string(name) + "'");
}

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::wall_segment;
  /// Wall column; negative draws one from 1..width-2.
  int column = -1;
  std::size_t obstacle_count = 7;
  /// New goal; std::nullopt draws one uniformly from the free cells other than start.
  std::optional<Cell> goal = std::nullopt;
  std::uint64_t seed = 0;
};

/// Applies one perturbation. The result may disconnect start from goal.
inline GridSpec apply_perturbation(const GridSpec& nominal, const PerturbationSpec& pert) {
  validate(nominal, false);
  GridSpec out = nominal;
  Rng rng = stream(pert.seed, static_cast<std::uint64_t>(pert.kind));
  switch (pert.kind) {
    case PerturbationKind::wall_segment: {
      if (nominal.width < 3) fail(ErrorKind::invalid_input, "wall segment needs width >= 3");
      int x0 = pert.column;
      if (x0 < 0) x0 = std::uniform_int_distribution<int>(1, nominal.width - 2)(rng);
      if (x0 < 1 || x0 > nominal.width - 2) fail(ErrorKind::invalid_input, "wall column must exclude the first and last columns");
      for (int y = 1; y <= nominal.height - 2; ++y) {
        const Cell c{x0, y};
        if (c != nominal.start && c != nominal.goal) out.walls.push_back(c);
      }
      break;
    }
    case PerturbationKind::scattered_obstacles: {
      std::vector<Cell> free;
      for (int y = 0; y < nominal.height; ++y)
        for (int x = 0; x < nominal.width; ++x) {
          const Cell c{x, y};
          if (c != nominal.start && c != nominal.goal && !nominal.is_wall(c)) free.push_back(c);
        }
      if (pert.obstacle_count > free.size()) fail(ErrorKind::invalid_input, "not enough free cells for obstacles");
      std::shuffle(free.begin(), free.end(), rng);
      out.walls.insert(out.walls.end(), free.begin(), free.begin() + static_cast<std::ptrdiff_t>(pert.obstacle_count));
      break;
    }
    case PerturbationKind::goal_shift: {
      Cell g;
      if (pert.goal) {
        g = *pert.goal;
        if (!nominal.inside(g) || g == nominal.start || nominal.is_wall(g))
          fail(ErrorKind::invalid_input, "shifted goal must be a free cell other than start");
      } else {
        std::vector<Cell> free;
        for (int y = 0; y < nominal.height; ++y)
          for (int x = 0; x < nominal.width; ++x) {
            const Cell c{x, y};
            if (c != nominal.start && !nominal.is_wall(c)) free.push_back(c);
          }
        g = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
      }
      out.goal = g;
      break;
    }
  }
  normalize_walls(out);
  return out;
}

// ---------------------------------------------------------------------------
// Path oracles

/// Largest number of distinct cells (start included) on any move sequence of
/// at most max_moves moves that stops on reaching the goal. Exhaustive.
inline std::size_t max_distinct_states(const GridSpec& spec, std::size_t max_moves) {
  validate(spec, false);
  std::vector<int> visits(spec.n_states(), 0);
  std::size_t distinct = 0, best = 0;
  auto enter = [&](Cell c) {
    if (visits[spec.index(c)]++ == 0) ++distinct;
  };
  auto leave = [&](Cell c) {
    if (--visits[spec.index(c)] == 0) --distinct;
  };
  auto dfs = [&](auto&& self, Cell c, std::size_t depth) -> void {
    best = std::max(best, distinct);
    if (c == spec.goal || depth == max_moves) return;
    for (std::size_t a = 0; a < kGridActions; ++a) {
      const Cell n = spec.move(c, a);
      enter(n);
      self(self, n, depth + 1);
      leave(n);
    }
  };
  enter(spec.start);
  dfs(dfs, spec.start, 0);
  return best;
}

/// Every self-avoiding path from start to goal, as cell sequences.
inline std::vector<std::vector<Cell>> simple_paths(const GridSpec& spec, std::size_t limit = 1000000) {
  validate(spec, false);
  std::vector<std::vector<Cell>> out;
  std::vector<char> used(spec.n_states(), 0);
  std::vector<Cell> path{spec.start};
  used[spec.index(spec.start)] = 1;
  auto dfs = [&](auto&& self, Cell c) -> void {
    if (c == spec.goal) {
      if (out.size() >= limit) fail(ErrorKind::budget_exceeded, "too many simple paths");
      out.push_back(path);
      return;
    }
    for (std::size_t a = 0; a < kGridActions; ++a) {
      const Cell n = spec.move(c, a);
      if (used[spec.index(n)]) continue;
      used[spec.index(n)] = 1;
      path.push_back(n);
      self(self, n);
      path.pop_back();
      used[spec.index(n)] = 0;
    }
  };
  dfs(dfs, spec.start);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Cell& c) { return nlohmann::json::array({c.x, c.y}); }

inline Cell cell_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::invalid_input, "cell must be [x, y]");
  return {j[0].get<int>(), j[1].get<int>()};
}

inline nlohmann::json to_json(const GridSpec& spec) {
  nlohmann::json walls = nlohmann::json::array();
  for (const Cell& w : spec.walls) walls.push_back(to_json(w));
  return {{"width", spec.width},           {"height", spec.height},          {"start", to_json(spec.start)},
          {"goal", to_json(spec.goal)},     {"walls", std::move(walls)},      {"step_reward", spec.step_reward},
          {"goal_reward", spec.goal_reward}, {"slip_prob", spec.slip_prob}};
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
  try {
    GridSpec spec;
    spec.width = j.value("width", spec.width);
    spec.height = j.value("height", spec.height);
    if (j.contains("start")) spec.start = cell_from_json(j.at("start"));
    if (j.contains("goal")) spec.goal = cell_from_json(j.at("goal"));
    if (j.contains("walls"))
      for (const auto& w : j.at("walls")) spec.walls.push_back(cell_from_json(w));
    spec.step_reward = j.value("step_reward", spec.step_reward);
    spec.goal_reward = j.value("goal_reward", spec.goal_reward);
    spec.slip_prob = j.value("slip_prob", spec.slip_prob);
    normalize_walls(spec);
    validate(spec, false);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed grid spec: ") + e.what());
  }
}

inline nlohmann::json to_json(const PerturbationSpec& p) {
  nlohmann::json j = {{"kind", to_string(p.kind)},
                      {"column", p.column},
                      {"obstacle_count", p.obstacle_count},
                      {"seed", p.seed}};
  if (p.goal) j["goal"] = to_json(*p.goal);
  return j;
}

inline PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
  try {
    PerturbationSpec p;
    p.kind = parse_perturbation_kind(j.at("kind").get<std::string>());
    p.column = j.value("column", p.column);
    p.obstacle_count = j.value("obstacle_count", p.obstacle_count);
    p.seed = j.value("seed", p.seed);
    if (j.contains("goal")) p.goal = cell_from_json(j.at("goal"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed perturbation spec: ") + e.what());
  }
}

}  // namespace robust_entropy
