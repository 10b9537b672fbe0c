#include <gtest/gtest.h>

#include <cmath>

#include "mrgnn/rsrl.hpp"
#include "policy_stubs.hpp"

namespace mrgnn {
namespace {

using testing::GreedySweep;
using testing::ScriptedPolicy;

std::unique_ptr<Policy> fixed(std::size_t i) { return std::make_unique<ScriptedPolicy>(std::vector<std::size_t>{i}); }

// Steps a tree until the current depth terminates; returns epochs used.
int run_to_switch(RLTree& t, double score) {
  for (int e = 1; e < 1000; ++e) {
    t.step(Observation{0.5, 0.5, false});
    if (t.check_termination()) {
      t.descend(score);
      return e;
    }
  }
  return -1;
}

TEST(TreeDepth, Examples) {
  EXPECT_EQ(tree_depth(100, 10), 2u);
  EXPECT_EQ(tree_depth(101, 10), 3u);
  EXPECT_EQ(tree_depth(1, 10), 1u);
  EXPECT_EQ(tree_depth(0, 10), 1u);
  EXPECT_EQ(tree_depth(2, 2), 1u);
  EXPECT_EQ(tree_depth(3, 2), 2u);
}

TEST(TreeWidth, Examples) {
  EXPECT_DOUBLE_EQ(tree_width(1, 10), 0.1);
  EXPECT_DOUBLE_EQ(tree_width(2, 10), 0.01);
  EXPECT_DOUBLE_EQ(tree_width(3, 2), 0.125);
  EXPECT_DOUBLE_EQ(tree_width(0, 10), 1.0);
}

TEST(ActionSpace, DepthOneMidpoints) {
  RLTree t(0, 0, 1000, TreeOptions{}, fixed(0));
  const auto a = t.action_space();
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(a[i], 0.05 + 0.1 * static_cast<double>(i), 1e-12);
}

TEST(ActionSpace, DepthTwoAroundPointNine) {
  RLTree t(0, 0, 1000, TreeOptions{}, fixed(4));
  t.record_score(0.9, 1.0);
  ASSERT_EQ(run_to_switch(t, 0.0), 3);  // 0.45 scores worse: backtrack to 0.9
  EXPECT_EQ(t.depth(), 2u);
  EXPECT_NEAR(t.interval().low, 0.85, 1e-12);
  EXPECT_NEAR(t.interval().high, 0.95, 1e-12);
  const auto a = t.action_space();
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(a[i], 0.855 + 0.01 * static_cast<double>(i), 1e-12);
}

TEST(ActionSpace, ClippedAboveOne) {
  RLTree t(0, 0, 1000, TreeOptions{}, fixed(4));
  t.record_score(0.98, 1.0);
  run_to_switch(t, 0.0);
  const auto a = t.action_space();
  EXPECT_NEAR(a[0], 0.935, 1e-12);
  EXPECT_NEAR(a[4], 0.975, 1e-12);
  for (std::size_t i = 5; i < 10; ++i) EXPECT_NEAR(a[i], i == 5 ? 0.985 : (i == 6 ? 0.995 : 1.0), 1e-12);
  EXPECT_DOUBLE_EQ(t.interval().high, 1.0);
}

TEST(Observe, DistanceAndSimilarity) {
  RLTree t(0, 0, 10, TreeOptions{}, fixed(0));
  auto o = t.observe(0.0, 1.0);
  EXPECT_DOUBLE_EQ(o.state, 0.0);
  EXPECT_DOUBLE_EQ(o.reward, 1.0);
  TreeOptions opts;
  opts.tau = 2.0;
  RLTree t2(0, 0, 10, opts, fixed(0));
  EXPECT_DOUBLE_EQ(t2.observe(0.3, 0.7).reward, 1.4);
}

TEST(Observe, EmptyRetentionRepeatsPreviousObservation) {
  RLTree t(0, 0, 10, TreeOptions{}, fixed(0));
  const auto first = t.observe(std::nullopt, std::nullopt);
  EXPECT_TRUE(first.repeated);
  EXPECT_DOUBLE_EQ(first.state, 1.0);
  EXPECT_DOUBLE_EQ(first.reward, 0.0);
  t.observe(0.4, 0.6);
  const auto again = t.observe(std::nullopt, std::nullopt);
  EXPECT_TRUE(again.repeated);
  EXPECT_DOUBLE_EQ(again.state, 0.4);
  EXPECT_DOUBLE_EQ(again.reward, 0.6);
}

TEST(Observe, TenEdgeScalarOracle) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  double sum = 0.0;
  std::vector<double> d(10);
  for (auto& x : d) sum += (x = u(rng));
  const double mean = sum / 10.0;
  TreeOptions opts;
  opts.tau = 1.5;
  RLTree t(0, 0, 10, opts, fixed(0));
  const auto o = t.observe(mean, 1.0 - mean);
  double s = 0.0, g = 0.0;
  for (double x : d) {
    s += x / 10.0;
    g += 1.5 * (1.0 - x) / 10.0;
  }
  EXPECT_NEAR(o.state, s, 1e-14);
  EXPECT_NEAR(o.reward, g, 1e-14);
}

TEST(Step, FixedActionGivesFixedThreshold) {
  RLTree t(0, 0, 10, TreeOptions{}, fixed(4));
  for (int e = 0; e < 5; ++e) EXPECT_NEAR(t.step(Observation{0.5, 0.5, false}), 0.45, 1e-12);
}

TEST(Step, FirstEpochOfDepthDoesNotUpdate) {
  std::size_t predicts = 0, updates = 0;
  RLTree t(0, 0, 1000, TreeOptions{}, std::make_unique<ScriptedPolicy>(std::vector<std::size_t>{3}, &predicts, &updates));
  t.step(Observation{});
  EXPECT_EQ(predicts, 1u);
  EXPECT_EQ(updates, 0u);
  t.step(Observation{});
  EXPECT_EQ(updates, 1u);
  t.step(Observation{});
  t.descend(0.5);
  t.step(Observation{});  // first epoch of depth 2
  EXPECT_EQ(updates, 2u);
  EXPECT_EQ(predicts, 4u);
}

TEST(Step, InvalidActionFallsBackToMidpoint) {
  RLTree t(0, 0, 10, TreeOptions{}, fixed(99));
  EXPECT_DOUBLE_EQ(t.step(Observation{}), 0.5);
  EXPECT_EQ(t.drain_warnings().size(), 1u);
}

TEST(Step, GreedyConvergesToPeakBin) {
  RLTree t(0, 0, 10, TreeOptions{}, std::make_unique<GreedySweep>());
  auto reward = [](double p) { return -std::abs(p - 0.75); };
  double p = t.threshold();
  int epochs = 0;
  while (!t.converged() && epochs < 50) {
    p = t.step(Observation{0.5, reward(p), false});
    ++epochs;
    if (t.check_termination()) t.descend(reward(p));
  }
  EXPECT_TRUE(t.converged());
  EXPECT_NEAR(t.threshold(), 0.75, 1e-12);
}

TEST(Termination, DiscreteExamples) {
  const std::vector<double> same{0.45, 0.45, 0.45}, mixed{0.45, 0.55, 0.45}, short_h{0.45, 0.45};
  EXPECT_TRUE(termination_fired(same, ActionSpace::discrete, 0.1, 3));
  EXPECT_FALSE(termination_fired(mixed, ActionSpace::discrete, 0.1, 3));
  EXPECT_FALSE(termination_fired(short_h, ActionSpace::discrete, 0.1, 3));
}

TEST(Termination, ContinuousExample) {
  const std::vector<double> h{0.452, 0.449, 0.451};
  EXPECT_TRUE(termination_fired(h, ActionSpace::continuous, 0.01, 3));
  const std::vector<double> wide{0.452, 0.449, 0.461};
  EXPECT_FALSE(termination_fired(wide, ActionSpace::continuous, 0.01, 3));
}

TEST(Termination, ExhaustiveThreeActionHistories) {
  const std::vector<double> grid{0.45, 0.452, 0.455, 0.46, 0.47};
  for (double a : grid) {
    for (double b : grid) {
      for (double c : grid) {
        const std::vector<double> h{a, b, c};
        EXPECT_EQ(termination_fired(h, ActionSpace::discrete, 0.01, 3), a == b && b == c);
        const bool close = std::abs(b - a) < 0.01 && std::abs(c - b) < 0.01;
        EXPECT_EQ(termination_fired(h, ActionSpace::continuous, 0.01, 3), close);
      }
    }
  }
}

TEST(Descend, RequiresTermination) {
  RLTree t(0, 0, 1000, TreeOptions{}, fixed(2));
  t.step(Observation{});
  EXPECT_THROW(t.descend(0.5), StateError);
}

TEST(Descend, BacktracksToBetterHistoricalThreshold) {
  RLTree t(0, 0, 1000, TreeOptions{}, fixed(2));  // settles at 0.25
  t.record_score(0.6, 0.9);
  run_to_switch(t, 0.4);
  EXPECT_TRUE(t.last_backtracked());
  EXPECT_NEAR(t.center(), 0.6, 1e-12);
  EXPECT_NEAR(t.interval().low, 0.55, 1e-12);
}

TEST(Descend, NoBacktrackingKeepsSettledThreshold) {
  TreeOptions opts;
  opts.backtracking = false;
  RLTree t(0, 0, 1000, opts, fixed(2));
  t.record_score(0.6, 0.9);
  run_to_switch(t, 0.4);
  EXPECT_FALSE(t.last_backtracked());
  EXPECT_NEAR(t.center(), 0.25, 1e-12);
}

TEST(Descend, LastDepthFreezesTree) {
  RLTree t(0, 0, 100, TreeOptions{}, fixed(7));  // depth 2
  run_to_switch(t, 0.5);
  run_to_switch(t, 0.6);
  EXPECT_TRUE(t.converged());
  EXPECT_NEAR(t.threshold(), 0.775, 1e-12);  // cell 7 of [0.7, 0.8]
  EXPECT_THROW(t.step(Observation{}), StateError);
}

TEST(Flat, SingleDepthOverFullGrid) {
  TreeOptions opts;
  opts.recursive = false;
  RLTree t(0, 0, 1000, opts, fixed(123));
  EXPECT_EQ(t.num_actions(), 1000u);
  EXPECT_EQ(t.max_depth(), 1u);
  EXPECT_NEAR(t.step(Observation{}), 0.1235, 1e-12);
}

TEST(Forest, ConvergedForestIsUnchanged) {
  const std::vector<std::size_t> degrees{5, 5};
  RLForest f(1, degrees, TreeOptions{}, [](std::size_t, std::size_t r) { return fixed(r + 1); });
  const std::vector<TreeInput> in(2, TreeInput{0.3, 0.7});
  for (int e = 0; e < 3; ++e) f.epoch(in, 0.5);
  ASSERT_TRUE(f.all_converged());
  const auto before = f.thresholds();
  const auto steps = f.epoch(in, 0.5);
  for (const auto& s : steps) EXPECT_TRUE(s.skipped);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(f.thresholds().at(0, r), before.at(0, r));
}

TEST(Forest, FirstEpochPredictsWithoutUpdating) {
  std::size_t predicts = 0, updates = 0;
  const std::vector<std::size_t> degrees{50, 50, 50};
  RLForest f(1, degrees, TreeOptions{}, [&](std::size_t, std::size_t) {
    return std::make_unique<ScriptedPolicy>(std::vector<std::size_t>{0, 1, 2}, &predicts, &updates);
  });
  f.epoch(std::vector<TreeInput>(3, TreeInput{0.5, 0.5}), 0.5);
  EXPECT_EQ(predicts, 3u);
  EXPECT_EQ(updates, 0u);
}

TEST(Forest, IndependentPeaks) {
  const std::vector<double> peaks{0.8137, 0.2291};
  const std::vector<std::size_t> degrees{1000, 1000};
  RLForest f(1, degrees, TreeOptions{}, [](std::size_t, std::size_t) { return std::make_unique<GreedySweep>(); });
  auto landscape = [&](std::size_t r, double p) { return 1.0 - std::abs(p - peaks[r]); };
  for (int e = 0; e < 200 && !f.all_converged(); ++e) {
    const auto th = f.thresholds();
    std::vector<TreeInput> in;
    for (std::size_t r = 0; r < 2; ++r) {
      const double g = landscape(r, th.at(0, r));
      in.push_back(TreeInput{1.0 - g, g});
    }
    f.epoch(in, 0.5);
  }
  ASSERT_TRUE(f.all_converged());
  for (std::size_t r = 0; r < 2; ++r) EXPECT_LE(std::abs(f.thresholds().at(0, r) - peaks[r]), tree_width(3, 10));
}

TEST(Forest, InputCountMustMatch) {
  const std::vector<std::size_t> degrees{5};
  RLForest f(2, degrees, TreeOptions{}, [](std::size_t, std::size_t) { return fixed(0); });
  EXPECT_THROW(f.epoch(std::vector<TreeInput>(1), 0.5), ShapeError);
}

}  // namespace
}  // namespace mrgnn
