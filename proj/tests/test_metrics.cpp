#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mrgnn/metrics.hpp"

namespace mrgnn {
namespace {

std::optional<double> auc_of(std::vector<double> s, std::vector<bool> y) {
  auto flags = std::make_unique<bool[]>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) flags[i] = y[i];
  return auc(s, std::span<const bool>(flags.get(), y.size()));
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(*auc_of({0.9, 0.8, 0.2, 0.1}, {true, true, false, false}), 1.0);
  EXPECT_DOUBLE_EQ(*auc_of({0.5, 0.5, 0.5, 0.5}, {true, false, true, false}), 0.5);
  EXPECT_DOUBLE_EQ(*auc_of({0.9, 0.4, 0.6, 0.1}, {true, true, false, false}), 0.75);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_FALSE(auc_of({0.1, 0.2}, {true, true}).has_value());
  EXPECT_FALSE(auc_of({}, {}).has_value());
}

TEST(Auc, TrapezoidAgreesWithRankStatistic) {
  Rng rng(5);
  std::uniform_int_distribution<int> coarse(0, 6);
  std::bernoulli_distribution coin(0.4);
  for (int draw = 0; draw < 200; ++draw) {
    const std::size_t n = 2 + draw % 40;
    std::vector<double> s(n);
    auto y = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse(rng) / 6.0;  // many ties
      y[i] = coin(rng);
    }
    y[0] = true;
    y[1] = false;
    const std::span<const bool> ys(y.get(), n);
    EXPECT_NEAR(*auc(s, ys), *auc_rank_statistic(s, ys), 1e-9);
  }
}

TEST(Classification, PerfectPredictions) {
  const std::vector<int> y{0, 1, 1, 0, 1};
  const auto c = confusion(y, y, 1);
  EXPECT_DOUBLE_EQ(recall(c), 1.0);
  EXPECT_DOUBLE_EQ(precision(c), 1.0);
  EXPECT_DOUBLE_EQ(f1(c), 1.0);
}

TEST(Classification, AllNegativePredictions) {
  const std::vector<int> y{0, 1, 1}, pred{0, 0, 0};
  const auto c = confusion(pred, y, 1);
  EXPECT_DOUBLE_EQ(recall(c), 0.0);
  EXPECT_DOUBLE_EQ(precision(c), 0.0);  // zero denominator
  EXPECT_DOUBLE_EQ(f1(c), 0.0);
}

TEST(Classification, HandCounts) {
  // TP=3, FN=1, FP=2, TN=1.
  const std::vector<int> y{1, 1, 1, 1, 0, 0, 0}, pred{1, 1, 1, 0, 1, 1, 0};
  const auto c = confusion(pred, y, 1);
  EXPECT_EQ(c.tp, 3u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.fp, 2u);
  EXPECT_EQ(c.tn, 1u);
  EXPECT_DOUBLE_EQ(recall(c), 0.75);
  EXPECT_DOUBLE_EQ(precision(c), 0.6);
  EXPECT_NEAR(f1(c), 2 * 0.75 * 0.6 / 1.35, 1e-12);
}

TEST(Clustering, IdenticalPartition) {
  const std::vector<int> y{0, 0, 1, 1, 2}, c{2, 2, 0, 0, 1};
  EXPECT_NEAR(nmi(c, y), 1.0, 1e-12);
  EXPECT_NEAR(ari(c, y), 1.0, 1e-12);
}

TEST(Clustering, CrossedFourPoints) {
  // Every pair splits differently: index 0, expected 2/3, max 2.
  const std::vector<int> y{0, 0, 1, 1}, c{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(ari(c, y), -0.5);
  EXPECT_NEAR(nmi(c, y), 0.0, 1e-15);
}

TEST(Clustering, UnevenFourPoints) {
  const std::vector<int> y{0, 0, 1, 1}, c{0, 0, 0, 1};
  // Pair counts: index 1, row pairs 3, column pairs 2, expected 1, max 2.5.
  EXPECT_NEAR(ari(c, y), 0.0, 1e-15);
  const double hy = std::log(2.0);
  const double hc = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  const double mi = 0.5 * std::log(4.0 / 3.0) + 0.25 * std::log(2.0 / 3.0) + 0.25 * std::log(2.0);
  EXPECT_NEAR(nmi(c, y), mi / ((hy + hc) / 2), 1e-12);
}

TEST(Clustering, SingleClusterSingleClassIsZeroNmi) {
  const std::vector<int> y{0, 0, 0}, c{0, 0, 0};
  EXPECT_DOUBLE_EQ(nmi(c, y), 0.0);
}

TEST(Clustering, RandomPermutationAriIsNearZero) {
  Rng rng(11);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 3);
  double total = 0.0;
  for (int s = 0; s < 100; ++s) {
    auto c = y;
    std::shuffle(c.begin(), c.end(), rng);
    total += ari(c, y);
  }
  EXPECT_NEAR(total / 100.0, 0.0, 0.05);
}

TEST(KMeans, SeparatedBlobs) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 0.5);
    Matrix x(40, 2);
    for (Eigen::Index i = 0; i < 40; ++i) {
      const double cx = i < 20 ? -5.0 : 5.0;
      x(i, 0) = cx + z(rng);
      x(i, 1) = z(rng);
    }
    const auto km = kmeans(x, 2, 5, seed);
    for (int i = 1; i < 40; ++i) {
      EXPECT_EQ(km.assignment[i] == km.assignment[0], i < 20) << "seed " << seed;
    }
  }
}

TEST(KMeans, KEqualsN) {
  Matrix x(4, 1);
  x << 0, 1, 5, 9;
  const auto km = kmeans(x, 4, 3, 0);
  std::vector<int> a = km.assignment;
  std::sort(a.begin(), a.end());
  EXPECT_EQ(a, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(km.wcss, 0.0);
}

TEST(KMeans, KEqualsOne) {
  Matrix x(3, 2);
  x << 0, 0, 2, 4, 4, 2;
  const auto km = kmeans(x, 1, 1, 0);
  EXPECT_NEAR(km.centroids(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(km.centroids(0, 1), 2.0, 1e-12);
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  Matrix x(5, 1);
  x << 1, 1, 1, 1, 7;
  const auto km = kmeans(x, 3, 2, 4);
  EXPECT_EQ(km.assignment.size(), 5u);
  EXPECT_TRUE(std::isfinite(km.wcss));
}

TEST(KMeans, DeterministicInSeed) {
  Rng rng(1);
  std::normal_distribution<double> z;
  Matrix x(30, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  EXPECT_EQ(kmeans(x, 3, 4, 8).assignment, kmeans(x, 3, 4, 8).assignment);
}

}  // namespace
}  // namespace mrgnn
