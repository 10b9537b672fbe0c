#include <gtest/gtest.h>

#include <cmath>

#include "mrgnn/config.hpp"
#include "mrgnn/synthetic.hpp"
#include "mrgnn/trainer.hpp"

namespace mrgnn {
namespace {

constexpr const char* kSmall = R"(
[synthetic]
num_nodes = 160
feature_dim = 4
class_balance = 0.7, 0.3
class_separation = 4
seed = 4

[relation a]
edges = 500
homophily = 0.8

[relation b]
edges = 500
homophily = 0.3

[train]
epochs = 6
batch_size = 32
embedding_size = 8
kmeans_restarts = 2
rl_learning_rate = 0.2
seed = 9
)";

struct SmallRun {
  RunConfig cfg = parse_config_string(kSmall);
  MultiRelationalGraph g = generate_synthetic(*cfg.synthetic);
};

TEST(Undersample, EqualCounts) {
  std::vector<int> labels(10);
  std::vector<NodeId> batch(10);
  for (NodeId v = 0; v < 10; ++v) {
    batch[v] = v;
    labels[v] = v < 5 ? 1 : 0;
  }
  Rng rng(1);
  const auto out = undersample_batch(batch, labels, 1, 1.0, rng);
  EXPECT_EQ(out.size(), 10u);
}

TEST(Undersample, RatioTwoKeepsTwiceThePositives) {
  std::vector<int> labels(25, 0);
  std::vector<NodeId> batch(25);
  for (NodeId v = 0; v < 25; ++v) batch[v] = v;
  for (NodeId v : {3u, 7u, 11u, 19u, 24u}) labels[v] = 1;
  Rng rng(2);
  const auto out = undersample_batch(batch, labels, 1, 2.0, rng);
  std::size_t pos = 0;
  for (NodeId v : out) pos += labels[v] == 1;
  EXPECT_EQ(pos, 5u);
  EXPECT_EQ(out.size() - pos, 10u);
  EXPECT_TRUE(std::is_sorted(out.begin(), out.end()));  // input order kept
}

TEST(Undersample, NoPositivesKeepsBatch) {
  std::vector<int> labels(6, 0);
  std::vector<NodeId> batch{0, 1, 2, 3, 4, 5};
  Rng rng(3);
  EXPECT_EQ(undersample_batch(batch, labels, 1, 1.0, rng), batch);
}

TEST(MinorityClass, PicksSmallestClass) {
  std::vector<int> labels{0, 0, 1, 2, 2, 1, 0};
  std::vector<NodeId> nodes{0, 1, 2, 3, 4, 5, 6};
  std::vector<NodeId> some{0, 1, 2, 3, 4};
  EXPECT_EQ(minority_class(labels, 3, some), 1);
  EXPECT_EQ(minority_class(labels, 3, nodes), 2);  // tie between 1 and 2 goes high
}

TEST(Fit, ZeroEpochsLeavesInitialState) {
  SmallRun s;
  s.cfg.train.epochs = 0;
  const auto res = fit(s.g, s.cfg.train);
  EXPECT_TRUE(res.epochs.empty());
  EXPECT_EQ(res.state.epoch, 0u);
  EXPECT_EQ(res.completed_epochs(), 0u);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_DOUBLE_EQ(res.state.thresholds.at(0, r), 0.5);
}

TEST(Fit, DeterministicUnderSeed) {
  SmallRun s;
  const auto a = fit(s.g, s.cfg.train);
  const auto b = fit(s.g, s.cfg.train);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    EXPECT_EQ(a.epochs[e].train_total_loss, b.epochs[e].train_total_loss);
    EXPECT_EQ(a.epochs[e].val_auc, b.epochs[e].val_auc);
  }
  EXPECT_EQ(a.final.embeddings, b.final.embeddings);
  EXPECT_EQ(a.test_report.auc, b.test_report.auc);
}

TEST(Fit, TrainingLossDecreases) {
  SmallRun s;
  s.cfg.train.epochs = 20;
  const auto res = fit(s.g, s.cfg.train);
  EXPECT_LT(res.epochs.back().train_gnn_loss, res.epochs.front().train_gnn_loss);
}

// Seeds (of 20) whose mean training loss falls every epoch for 10 epochs.
int monotone_seeds(bool filtering) {
  SyntheticSpec spec;
  spec.num_nodes = 200;
  spec.feature_dim = 4;
  spec.class_separation = 8.0;
  spec.relations = {{"r", 800, 0.8}};
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    const auto g = generate_synthetic(spec);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = seed;
    cfg.filtering = filtering;
    const auto res = fit(g, cfg);
    bool ok = true;
    for (std::size_t e = 1; e < res.epochs.size(); ++e) {
      ok = ok && res.epochs[e].train_total_loss < res.epochs[e - 1].train_total_loss;
    }
    monotone += ok;
  }
  return monotone;
}

TEST(Fit, SeparableLossDecreasesWithFixedNeighbourhoods) { EXPECT_GE(monotone_seeds(false), 19); }

// Exploring thresholds swap neighbourhoods between epochs, which occasionally
// bumps the loss up for one epoch. Measured 16/20 at the default settings.
TEST(Fit, SeparableLossMostlyDecreasesWhileFiltering) { EXPECT_GE(monotone_seeds(true), 16); }

TEST(Fit, OneTreeStepPerLayerAndRelation) {
  SmallRun s;
  s.cfg.train.layers = 2;
  s.cfg.train.epochs = 2;
  const auto res = fit(s.g, s.cfg.train);
  for (const auto& rec : res.epochs) EXPECT_EQ(rec.trees.size(), 4u);
  EXPECT_EQ(res.final.embeddings.rows(), 160);
  EXPECT_EQ(res.final.embeddings.cols(), 8);
}

TEST(Fit, NoFilteringKeepsEveryNeighbour) {
  SmallRun s;
  s.cfg.train.filtering = false;
  const auto res = fit(s.g, s.cfg.train);
  for (const auto& rec : res.epochs) {
    for (const auto& t : rec.trees) {
      EXPECT_TRUE(t.skipped);
      EXPECT_DOUBLE_EQ(t.threshold, 1.0);
    }
  }
}

TEST(Fit, EveryVariantAndPolicyRuns) {
  SmallRun s;
  s.cfg.train.epochs = 3;
  for (auto v : {InterAggregation::threshold, InterAggregation::attention, InterAggregation::weight,
                 InterAggregation::mean}) {
    s.cfg.train.variant = v;
    const auto res = fit(s.g, s.cfg.train);
    EXPECT_FALSE(res.aborted());
    ASSERT_TRUE(res.test_report.auc.has_value());
  }
  s.cfg.train.variant = InterAggregation::threshold;
  for (auto [kind, space] : {std::pair{PolicyKind::actor_critic, ActionSpace::discrete},
                             std::pair{PolicyKind::actor_critic, ActionSpace::continuous},
                             std::pair{PolicyKind::q_learning, ActionSpace::discrete},
                             std::pair{PolicyKind::bmab, ActionSpace::discrete}}) {
    s.cfg.train.policy = kind;
    s.cfg.train.action_space = space;
    const auto res = fit(s.g, s.cfg.train);
    EXPECT_EQ(res.completed_epochs(), 3u);
  }
}

TEST(Fit, InductiveModeHidesTestEdges) {
  SmallRun s;
  const auto rels = training_relations(s.g, TrainingMode::inductive);
  std::vector<char> test(160, 0);
  for (NodeId v : s.g.split.test) test[v] = 1;
  for (const auto& r : rels) {
    for (NodeId v = 0; v < 160; ++v) {
      for (NodeId u : r.neighbors(v)) EXPECT_FALSE(test[v] || test[u]);
    }
  }
  s.cfg.train.mode = TrainingMode::inductive;
  EXPECT_FALSE(fit(s.g, s.cfg.train).aborted());
}

TEST(Fit, NonFiniteLossAbortsAndRestores) {
  SmallRun s;
  s.cfg.train.learning_rate = 1e200;
  s.cfg.train.epochs = 5;
  const auto res = fit(s.g, s.cfg.train);
  ASSERT_TRUE(res.aborted());
  EXPECT_LT(res.epochs.size(), 5u);
  EXPECT_FALSE(res.epochs.back().warnings.empty());
  EXPECT_TRUE(res.final.embeddings.allFinite());
}

TEST(Fit, TimingIsOptIn) {
  SmallRun s;
  s.cfg.train.epochs = 1;
  EXPECT_EQ(fit(s.g, s.cfg.train).epochs[0].wall_ms, 0.0);
  s.cfg.train.timing = true;
  EXPECT_GT(fit(s.g, s.cfg.train).epochs[0].wall_ms, 0.0);
}

TEST(TrainConfig, RejectsBadValues) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.alpha = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.policy = PolicyKind::bmab;
  c.action_space = ActionSpace::continuous;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace mrgnn
