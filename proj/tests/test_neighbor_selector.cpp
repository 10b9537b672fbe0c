#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mrgnn/neighbor_selector.hpp"
#include "test_helpers.hpp"

namespace mrgnn {
namespace {

// Sort-and-cut reference: neighbours by (score desc, id asc), keep ceil(p k).
std::vector<NodeId> brute_force(const RelationAdjacency& adj, NodeId v, double p, std::span<const double> scores) {
  const auto nb = adj.neighbors(v);
  std::vector<std::pair<double, NodeId>> ranked;
  for (std::size_t i = 0; i < nb.size(); ++i) ranked.emplace_back(scores[adj.offset(v) + i], nb[i]);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::size_t keep = 0;
  if (p > 0.0 && !nb.empty()) {
    keep = static_cast<std::size_t>(std::ceil(p * static_cast<double>(nb.size()) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, nb.size());
  }
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(RetainedCount, CeilingWithRepresentationSlack) {
  EXPECT_EQ(retained_count(10, 0.3), 3u);
  EXPECT_EQ(retained_count(3, 0.6), 2u);
  EXPECT_EQ(retained_count(3, 0.67), 3u);
  EXPECT_EQ(retained_count(7, 0.0), 0u);
  EXPECT_EQ(retained_count(7, 1.0), 7u);
  EXPECT_EQ(retained_count(0, 0.5), 0u);
  EXPECT_EQ(retained_count(1000, 0.001), 1u);
}

TEST(TopP, ThreeNeighbourExample) {
  // Centre 0 with neighbours a=1 (0.9), b=2 (0.5), c=3 (0.1).
  const std::vector<Edge> edges{{0, 1}, {0, 2}, {0, 3}};
  const auto adj = RelationAdjacency::from_edges("r", 4, edges);
  std::vector<double> scores(adj.num_directed_edges(), 0.0);
  scores[adj.offset(0) + 0] = 0.9;
  scores[adj.offset(0) + 1] = 0.5;
  scores[adj.offset(0) + 2] = 0.1;
  const std::vector<NodeId> centers{0};
  const auto s = top_p_sample(adj, centers, 0.6, scores);
  EXPECT_EQ(std::vector<NodeId>(s.neighbors_of(0).begin(), s.neighbors_of(0).end()), (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(top_p_sample(adj, centers, 0.67, scores).num_retained(), 3u);
}

TEST(TopP, ExtremesOfP) {
  const auto g = testing::tiny_graph(10, 1, 2, 2, 4, 0.6);
  const auto& adj = g.relations[0];
  std::vector<double> scores(adj.num_directed_edges(), 0.3);
  std::vector<NodeId> all(10);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(top_p_sample(adj, all, 1.0, scores).num_retained(), adj.num_directed_edges());
  EXPECT_EQ(top_p_sample(adj, all, 0.0, scores).num_retained(), 0u);
}

TEST(TopP, MatchesBruteForce) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 3);
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t n = 2 + static_cast<std::size_t>(u(rng) * 49);
    const auto g = testing::tiny_graph(n, 1, 1, 2, 1000 + draw, u(rng));
    const auto& adj = g.relations[0];
    std::vector<double> scores(adj.num_directed_edges());
    const bool ties = draw % 2 == 0;
    for (auto& s : scores) s = ties ? coarse(rng) / 3.0 : u(rng);
    double p = u(rng);
    if (draw % 10 == 0) p = 0.0;
    if (draw % 10 == 1) p = 1.0;
    std::vector<NodeId> centers(n);
    std::iota(centers.begin(), centers.end(), 0);
    const auto slice = top_p_sample(adj, centers, p, scores);
    for (std::size_t i = 0; i < n; ++i) {
      const auto got = slice.neighbors_of(i);
      EXPECT_EQ(std::vector<NodeId>(got.begin(), got.end()), brute_force(adj, static_cast<NodeId>(i), p, scores))
          << "draw " << draw << " node " << i << " p " << p;
    }
  }
}

TEST(TopP, MissingScoreIsConsistencyError) {
  const std::vector<Edge> edges{{0, 1}};
  const auto adj = RelationAdjacency::from_edges("r", 2, edges);
  const std::vector<NodeId> centers{0};
  std::vector<double> short_scores(1, 0.0);
  EXPECT_THROW(top_p_sample(adj, centers, 0.5, short_scores), ConsistencyError);
  std::vector<double> nan_scores(2, std::nan(""));
  EXPECT_THROW(top_p_sample(adj, centers, 0.5, nan_scores), ConsistencyError);
}

TEST(TopP, ThresholdOutOfRange) {
  const auto adj = RelationAdjacency::from_edges("r", 2, std::vector<Edge>{});
  EXPECT_THROW(top_p_sample(adj, {}, 1.5, {}), ValidationError);
}

TEST(RetainedDistance, Examples) {
  const std::vector<Edge> edges{{0, 1}, {0, 2}};
  const auto adj = RelationAdjacency::from_edges("r", 3, edges);
  const std::vector<NodeId> centers{0};
  std::vector<double> zeros(adj.num_directed_edges(), 0.0);
  EXPECT_DOUBLE_EQ(*retained_average_distance(top_p_sample(adj, centers, 1.0, zeros), zeros), 0.0);
  std::vector<double> d(adj.num_directed_edges(), 9.0);
  d[adj.offset(0)] = 0.2;
  d[adj.offset(0) + 1] = 0.4;
  EXPECT_NEAR(*retained_average_distance(top_p_sample(adj, centers, 1.0, d), d), 0.3, 1e-15);
  EXPECT_FALSE(retained_average_distance(top_p_sample(adj, centers, 0.0, d), d).has_value());
}

TEST(RetainedDistance, MatchesScalarLoop) {
  const auto g = testing::tiny_graph(6, 1, 1, 2, 8, 0.7);
  const auto& adj = g.relations[0];
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> d(adj.num_directed_edges());
  for (auto& x : d) x = u(rng);
  const std::vector<NodeId> centers{0, 2, 5};
  const auto slice = top_p_sample(adj, centers, 0.5, d);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    for (std::size_t e : slice.positions_of(i)) {
      sum += d[e];
      ++count;
    }
  }
  ASSERT_GT(count, 0u);
  EXPECT_NEAR(*retained_average_distance(slice, d), sum / static_cast<double>(count), 1e-14);
}

TEST(ThresholdVector, RejectsOutOfRangeValues) {
  ThresholdVector t(1, 2);
  EXPECT_THROW(t.set(0, 0, -0.1), ValidationError);
  EXPECT_THROW(t.set(0, 1, 1.1), ValidationError);
  t.set(0, 1, 0.25);
  EXPECT_DOUBLE_EQ(t.at(0, 1), 0.25);
}

}  // namespace
}  // namespace mrgnn
