#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "robust_entropy/gridworld.hpp"
#include "robust_entropy/solver.hpp"

using namespace robust_entropy;

namespace {

GridSpec empty8() { return GridSpec{}; }

int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

}  // namespace

TEST(BuildGrid, TwoCells) {
  GridSpec spec;
  spec.width = 2;
  spec.height = 1;
  spec.start = {0, 0};
  spec.goal = {1, 0};
  const Mdp m = build_grid(spec, 0.9);
  ASSERT_EQ(m.n_states, 2u);
  EXPECT_EQ(m.P(0, 1, 1), 1.0);
  EXPECT_EQ(m.r(0, 1), 1.0);
  for (std::size_t a : {0u, 2u, 3u}) {
    EXPECT_EQ(m.P(0, a, 0), 1.0);
    EXPECT_EQ(m.r(0, a), 0.0);
  }
  for (std::size_t a = 0; a < 4; ++a) {
    EXPECT_EQ(m.P(1, a, 1), 1.0);
    EXPECT_EQ(m.r(1, a), 0.0);
  }
  EXPECT_EQ(m.initial_dist, (numvec{1.0, 0.0}));
}

TEST(BuildGrid, EmptyEightByEight) {
  const GridSpec spec = empty8();
  const Mdp m = build_grid(spec, 0.95);
  EXPECT_EQ(m.n_states, 64u);
  EXPECT_EQ(shortest_path_length(spec), 14);
  EXPECT_EQ(shortest_path_length(spec), manhattan(spec.start, spec.goal));
  validate(m);
}

TEST(BuildGrid, OptimalPolicyTakesShortestPath) {
  const GridSpec spec = empty8();
  const Mdp m = build_grid(spec, 0.9);
  const Policy pi = solve_unregularized(m).policy;
  Cell c = spec.start;
  int steps = 0;
  while (c != spec.goal && steps < 100) {
    std::size_t a = 0;
    for (std::size_t b = 1; b < 4; ++b)
      if (pi(spec.index(c), b) > pi(spec.index(c), a)) a = b;
    c = spec.move(c, a);
    ++steps;
  }
  EXPECT_EQ(steps, 14);
}

TEST(BuildGrid, SlipKeepsRowsStochastic) {
  GridSpec spec = empty8();
  spec.slip_prob = 0.2;
  spec.step_reward = -0.01;
  const Mdp m = build_grid(spec, 0.9);
  validate(m);
  // From (6,7), moving right: 0.8 + 0.05 lands on the goal.
  EXPECT_NEAR(m.r(spec.index({6, 7}), 1), 0.85 - 0.01, 1e-15);
}

TEST(BuildGrid, WallsBlockAndAreUnreachable) {
  GridSpec spec = empty8();
  spec.walls = {{1, 0}};
  const Mdp m = build_grid(spec, 0.9);
  EXPECT_EQ(m.P(0, 1, 0), 1.0);
  for (std::size_t s = 0; s < 64; ++s)
    for (std::size_t a = 0; a < 4; ++a) {
      if (s != 1) {
        EXPECT_EQ(m.P(s, a, 1), 0.0);
      }
    }
}

TEST(BuildGrid, RejectsInvalid) {
  GridSpec spec = empty8();
  spec.goal = {8, 0};
  EXPECT_THROW(build_grid(spec, 0.9), Error);
  spec = empty8();
  spec.walls = {{0, 0}};
  EXPECT_THROW(build_grid(spec, 0.9), Error);
  spec = empty8();
  spec.walls = {{0, 1}, {1, 0}};
  EXPECT_THROW(build_grid(spec, 0.9), Error);
  EXPECT_NO_THROW(build_grid(spec, 0.9, false));
  spec = empty8();
  spec.slip_prob = 1.0;
  EXPECT_THROW(build_grid(spec, 0.9), Error);
}

TEST(Snake, MaxDistinctStates) {
  const GridSpec spec = snake_spec();
  EXPECT_EQ(shortest_path_length(spec), 5);
  EXPECT_EQ(max_distinct_states(spec, 11), 12u);
  EXPECT_EQ(max_distinct_states(spec, 10), 11u);
  EXPECT_EQ(max_distinct_states(spec, 5), 6u);
}

TEST(Snake, LongestSimplePathIsTheSerpentine) {
  const auto paths = simple_paths(snake_spec());
  std::size_t longest = 0;
  for (const auto& p : paths) longest = std::max(longest, p.size());
  EXPECT_EQ(longest, 12u);
  const std::vector<Cell> serpentine = {{0, 0}, {0, 1}, {1, 1}, {1, 0}, {2, 0}, {2, 1},
                                        {3, 1}, {3, 0}, {4, 0}, {4, 1}, {5, 1}, {5, 0}};
  EXPECT_EQ(std::count(paths.begin(), paths.end(), serpentine), 1);
  for (const auto& p : paths) {
    if (p.size() == 12) {
      EXPECT_EQ(p, serpentine);
    }
  }
}

TEST(Perturbation, WallSegment) {
  const GridSpec out = apply_perturbation(empty8(), {.kind = PerturbationKind::wall_segment, .column = 3});
  const std::vector<Cell> expected = {{3, 1}, {3, 2}, {3, 3}, {3, 4}, {3, 5}, {3, 6}};
  EXPECT_EQ(out.walls, expected);
  EXPECT_EQ(out.goal, empty8().goal);
  EXPECT_EQ(shortest_path_length(out), 14);
}

TEST(Perturbation, WallSegmentRandomColumn) {
  std::set<int> columns;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GridSpec out = apply_perturbation(empty8(), {.kind = PerturbationKind::wall_segment, .seed = seed});
    ASSERT_EQ(out.walls.size(), 6u);
    columns.insert(out.walls.front().x);
  }
  EXPECT_EQ(columns, (std::set<int>{1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(apply_perturbation(empty8(), {.kind = PerturbationKind::wall_segment, .column = 0}), Error);
  EXPECT_THROW(apply_perturbation(empty8(), {.kind = PerturbationKind::wall_segment, .column = 7}), Error);
}

TEST(Perturbation, ScatteredIsSeededAndAvoidsEndpoints) {
  const PerturbationSpec p{.kind = PerturbationKind::scattered_obstacles, .seed = 42};
  const GridSpec a = apply_perturbation(empty8(), p);
  const GridSpec b = apply_perturbation(empty8(), p);
  EXPECT_EQ(a.walls, b.walls);
  EXPECT_EQ(a.walls.size(), 7u);
  EXPECT_FALSE(a.is_wall(a.start));
  EXPECT_FALSE(a.is_wall(a.goal));
  const GridSpec c = apply_perturbation(empty8(), {.kind = PerturbationKind::scattered_obstacles, .seed = 43});
  EXPECT_NE(a.walls, c.walls);
}

TEST(Perturbation, GoalShift) {
  const GridSpec out =
      apply_perturbation(empty8(), {.kind = PerturbationKind::goal_shift, .goal = Cell{0, 1}});
  EXPECT_EQ(out.goal, (Cell{0, 1}));
  EXPECT_EQ(shortest_path_length(out), 1);
  EXPECT_THROW(apply_perturbation(empty8(), {.kind = PerturbationKind::goal_shift, .goal = Cell{0, 0}}), Error);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GridSpec r = apply_perturbation(empty8(), {.kind = PerturbationKind::goal_shift, .seed = seed});
    EXPECT_NE(r.goal, r.start);
  }
}

TEST(Perturbation, OnlyDeclaredCellsChange) {
  const GridSpec nominal = empty8();
  const GridSpec out = apply_perturbation(nominal, {.kind = PerturbationKind::scattered_obstacles, .seed = 5});
  EXPECT_EQ(out.width, nominal.width);
  EXPECT_EQ(out.start, nominal.start);
  EXPECT_EQ(out.goal, nominal.goal);
  EXPECT_EQ(out.goal_reward, nominal.goal_reward);
}

TEST(GridJson, RoundTrip) {
  GridSpec spec = apply_perturbation(empty8(), {.kind = PerturbationKind::scattered_obstacles, .seed = 3});
  spec.slip_prob = 0.1;
  const GridSpec back = grid_from_json(to_json(spec));
  EXPECT_EQ(back.walls, spec.walls);
  EXPECT_EQ(back.slip_prob, spec.slip_prob);
  EXPECT_EQ(to_json(back), to_json(spec));

  const PerturbationSpec p{.kind = PerturbationKind::goal_shift, .goal = Cell{2, 3}, .seed = 9};
  const PerturbationSpec q = perturbation_from_json(to_json(p));
  EXPECT_EQ(q.kind, p.kind);
  EXPECT_EQ(q.goal, p.goal);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_THROW(perturbation_from_json({{"kind", "earthquake"}}), Error);
  EXPECT_THROW(grid_from_json({{"width", "wide"}}), Error);
}
