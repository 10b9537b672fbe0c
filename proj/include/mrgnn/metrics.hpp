#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/tensor.hpp"

namespace mrgnn {

/// Area under the ROC curve by the trapezoid rule. Tied scores form one
/// diagonal ROC segment, so each tied positive/negative pair counts 1/2.
/// Returns nullopt when either class is missing.
inline std::optional<double> auc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw ShapeError("auc: scores and labels differ in length");
  const auto n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const auto n_neg = static_cast<double>(positive.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0, tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    double dtp = 0.0, dfp = 0.0;
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) {
      (positive[order[j]] ? dtp : dfp) += 1.0;
    }
    area += (dfp / n_neg) * ((tp + (tp + dtp)) / (2.0 * n_pos));
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return area;
}

/// Mann-Whitney rank-statistic form of the AUC (average ranks for ties).
inline std::optional<double> auc_rank_statistic(std::span<const double> scores,
                                                std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw ShapeError("auc: scores and labels differ in length");
  const auto n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const auto n_neg = static_cast<double>(positive.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) rank_sum += avg_rank;
    }
    i = j;
  }
  return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

inline Confusion confusion(std::span<const int> predicted, std::span<const int> labels,
                           int positive_class) {
  if (predicted.size() != labels.size()) throw ShapeError("confusion: length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] == positive_class;
    const bool y = labels[i] == positive_class;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Zero denominators give 0.
inline double recall(const Confusion& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}
inline double precision(const Confusion& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}
inline double f1(const Confusion& c) {
  const double p = precision(c), r = recall(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

namespace detail {

struct Contingency {
  std::vector<std::vector<double>> table;
  std::vector<double> rows, cols;
  double n = 0.0;
};

inline Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ShapeError("partition comparison: length mismatch");
  std::map<int, std::size_t> ia, ib;
  for (int x : a) ia.emplace(x, ia.size());
  for (int x : b) ib.emplace(x, ib.size());
  Contingency c;
  c.table.assign(ia.size(), std::vector<double>(ib.size(), 0.0));
  c.rows.assign(ia.size(), 0.0);
  c.cols.assign(ib.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = ia[a[i]], k = ib[b[i]];
    c.table[r][k] += 1.0;
    c.rows[r] += 1.0;
    c.cols[k] += 1.0;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

}  // namespace detail

/// Normalised mutual information, I(A;B) / ((H(A) + H(B)) / 2). Defined as
/// 0 when both partitions have zero entropy.
inline double nmi(std::span<const int> clusters, std::span<const int> labels) {
  const auto c = detail::contingency(clusters, labels);
  if (c.n == 0) return 0.0;
  auto entropy = [&](const std::vector<double>& m) {
    double h = 0.0;
    for (double x : m) {
      if (x > 0) h -= (x / c.n) * std::log(x / c.n);
    }
    return h;
  };
  const double ha = entropy(c.rows), hb = entropy(c.cols);
  if (ha + hb <= 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    for (std::size_t j = 0; j < c.cols.size(); ++j) {
      const double nij = c.table[i][j];
      if (nij > 0) mi += (nij / c.n) * std::log(c.n * nij / (c.rows[i] * c.cols[j]));
    }
  }
  return std::clamp(mi / ((ha + hb) / 2.0), 0.0, 1.0);
}

/// Adjusted Rand index from pair counts.
inline double ari(std::span<const int> clusters, std::span<const int> labels) {
  const auto c = detail::contingency(clusters, labels);
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& row : c.table) {
    for (double x : row) index += comb2(x);
  }
  for (double x : c.rows) sum_rows += comb2(x);
  for (double x : c.cols) sum_cols += comb2(x);
  const double total = comb2(c.n);
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = (sum_rows + sum_cols) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centroids;
  double wcss = 0.0;
};

namespace detail {

inline KMeansResult lloyd(const Matrix& x, Matrix centroids, std::size_t max_iter) {
  const auto n = x.rows();
  const auto k = centroids.rows();
  KMeansResult res;
  res.assignment.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = (x.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[static_cast<std::size_t>(i)] = best_d;
      if (res.assignment[static_cast<std::size_t>(i)] != best) {
        res.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignment[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: move it to the point farthest from its centroid.
        const auto far = static_cast<Eigen::Index>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        centroids.row(c) = x.row(far);
        dist[static_cast<std::size_t>(far)] = 0.0;
        changed = true;
      }
    }
    if (!changed) break;
  }
  res.wcss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    res.wcss += (x.row(i) - centroids.row(res.assignment[static_cast<std::size_t>(i)])).squaredNorm();
  }
  res.centroids = std::move(centroids);
  return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; keeps the restart with the
/// smallest within-cluster sum of squares. Deterministic given `seed`.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed,
                           std::size_t max_iter = 300) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k < 1 || k > n) throw ValidationError("kmeans: need 1 <= k <= number of points");
  Rng rng(seed);
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (std::size_t run = 0; run < std::max<std::size_t>(1, restarts); ++run) {
    Matrix centroids(static_cast<Eigen::Index>(k), x.cols());
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centroids.row(0) = x.row(static_cast<Eigen::Index>(first(rng)));
    std::vector<double> d2(n);
    for (std::size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
          m = std::min(m, (x.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(j))).squaredNorm());
        }
        d2[i] = m;
        total += m;
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        std::discrete_distribution<std::size_t> draw(d2.begin(), d2.end());
        pick = draw(rng);
      } else {
        pick = first(rng);
      }
      centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    }
    auto res = detail::lloyd(x, std::move(centroids), max_iter);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  return best;
}

/// Classification, ranking and clustering scores for one node set.
struct EvalReport {
  std::optional<double> auc;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  Confusion counts;
  std::size_t num_nodes = 0;
};

}  // namespace mrgnn
