#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/graph.hpp"
#include "mrgnn/tensor.hpp"

namespace mrgnn {

struct SyntheticRelationSpec {
  std::string name;
  std::size_t edge_count = 0;
  // Probability that an edge joins two nodes with the same label.
  double homophily = 0.5;

  friend bool operator==(const SyntheticRelationSpec&, const SyntheticRelationSpec&) = default;
};

struct SyntheticSpec {
  std::size_t num_nodes = 1000;
  int num_classes = 2;
  std::size_t feature_dim = 16;
  std::vector<double> class_balance = {0.5, 0.5};
  std::vector<SyntheticRelationSpec> relations;
  // Euclidean distance between any two class means.
  double class_separation = 2.0;
  double feature_noise = 1.0;
  // Fraction of minority-class nodes whose features come from the majority class.
  double camouflage_rate = 0.0;
  std::uint64_t seed = 0;
  double train_ratio = 0.4;
  double val_ratio = 0.1;

  void validate() const {
    auto prob = [](double p, const std::string& what) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(what + " must lie in [0,1]");
    };
    if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
    if (class_balance.size() != static_cast<std::size_t>(num_classes)) {
      throw ValidationError("class_balance needs one entry per class");
    }
    double total = 0.0;
    for (double p : class_balance) {
      prob(p, "class_balance entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw ValidationError("class_balance must sum to 1");
    if (feature_dim < static_cast<std::size_t>(num_classes)) {
      throw ValidationError("feature_dim must be at least num_classes");
    }
    prob(camouflage_rate, "camouflage_rate");
    for (const auto& r : relations) prob(r.homophily, "homophily of relation '" + r.name + "'");
    if (!(feature_noise >= 0.0)) throw ValidationError("feature_noise must be >= 0");
    if (!(class_separation >= 0.0)) throw ValidationError("class_separation must be >= 0");
  }

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

namespace detail {

inline std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Draws `count` distinct unordered pairs. `draw` produces a random candidate
// pair; `enumerate` lists every admissible pair and is used when the request
// covers a large share of the capacity.
template <class Draw, class Enumerate>
void sample_distinct_pairs(std::size_t count, std::uint64_t capacity, Rng& rng, Draw draw,
                           Enumerate enumerate, std::vector<Edge>& out) {
  if (count == 0) return;
  if (count > capacity) {
    throw GenerationError("requested " + std::to_string(count) + " edges but only " +
                          std::to_string(capacity) + " distinct pairs are available");
  }
  if (2 * count > capacity) {
    std::vector<Edge> all = enumerate();
    std::shuffle(all.begin(), all.end(), rng);
    out.insert(out.end(), all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
    return;
  }
  std::unordered_set<std::uint64_t> used;
  used.reserve(count * 2);
  while (used.size() < count) {
    Edge e = draw();
    if (used.insert(pair_key(e.first, e.second)).second) out.push_back(e);
  }
}

}  // namespace detail

/// Generates a labelled multi-relational graph whose relations hit the
/// requested same-label edge fraction. Pure function of `spec`.
inline MultiRelationalGraph generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.num_nodes;
  const int C = spec.num_classes;

  // Exact class sizes by largest remainder, then a random assignment.
  std::vector<std::size_t> counts(C, 0);
  {
    std::vector<std::pair<double, int>> remainders;
    std::size_t assigned = 0;
    for (int c = 0; c < C; ++c) {
      const double exact = spec.class_balance[c] * static_cast<double>(n);
      counts[c] = static_cast<std::size_t>(std::floor(exact));
      assigned += counts[c];
      remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % C].second];
  }
  std::vector<int> labels;
  labels.reserve(n);
  for (int c = 0; c < C; ++c) labels.insert(labels.end(), counts[c], c);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<std::vector<NodeId>> members(C);
  for (std::size_t v = 0; v < n; ++v) members[labels[v]].push_back(static_cast<NodeId>(v));

  const int minority = minority_of(counts);
  const int majority = majority_of(counts);

  std::vector<int> feature_class(labels);
  if (minority != majority && spec.camouflage_rate > 0.0) {
    std::vector<NodeId> pool = members[minority];
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto k = static_cast<std::size_t>(
        std::llround(spec.camouflage_rate * static_cast<double>(pool.size())));
    for (std::size_t i = 0; i < k; ++i) feature_class[pool[i]] = majority;
  }

  // Class means on scaled basis vectors: pairwise distance = class_separation.
  const double scale = spec.class_separation / std::sqrt(2.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.feature_dim));
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < spec.feature_dim; ++j) {
      const double mean = (static_cast<int>(j) == feature_class[v]) ? scale : 0.0;
      features(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j)) =
          mean + spec.feature_noise * noise(rng);
    }
  }

  auto choose2 = [](std::uint64_t m) -> std::uint64_t { return m < 2 ? 0 : m * (m - 1) / 2; };
  std::vector<double> same_weight(C);
  std::uint64_t same_capacity = 0;
  for (int c = 0; c < C; ++c) {
    same_weight[c] = static_cast<double>(choose2(counts[c]));
    same_capacity += choose2(counts[c]);
  }
  std::vector<std::pair<int, int>> cross_pairs;
  std::vector<double> cross_weight;
  std::uint64_t cross_capacity = 0;
  for (int a = 0; a < C; ++a) {
    for (int b = a + 1; b < C; ++b) {
      cross_pairs.emplace_back(a, b);
      cross_weight.push_back(static_cast<double>(counts[a]) * static_cast<double>(counts[b]));
      cross_capacity += static_cast<std::uint64_t>(counts[a]) * counts[b];
    }
  }

  MultiRelationalGraph g;
  g.features = std::move(features);
  g.labels = labels;
  g.num_classes = C;

  for (const auto& rspec : spec.relations) {
    if (rspec.edge_count > same_capacity + cross_capacity) {
      throw GenerationError("relation '" + rspec.name + "': " + std::to_string(rspec.edge_count) +
                            " edges exceed the " + std::to_string(same_capacity + cross_capacity) +
                            " available node pairs");
    }
    std::binomial_distribution<std::size_t> split_draw(rspec.edge_count, rspec.homophily);
    const std::size_t n_same = split_draw(rng);
    const std::size_t n_cross = rspec.edge_count - n_same;
    std::vector<Edge> edges;
    edges.reserve(rspec.edge_count);

    auto pick = [&](const std::vector<NodeId>& pool) {
      std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
      return pool[d(rng)];
    };

    if (n_same > 0) {
      std::discrete_distribution<int> class_draw(same_weight.begin(), same_weight.end());
      detail::sample_distinct_pairs(
          n_same, same_capacity, rng,
          [&]() {
            const auto& pool = members[class_draw(rng)];
            NodeId a = pick(pool), b = pick(pool);
            while (b == a) b = pick(pool);
            return Edge{a, b};
          },
          [&]() {
            std::vector<Edge> all;
            for (const auto& pool : members) {
              for (std::size_t i = 0; i < pool.size(); ++i) {
                for (std::size_t j = i + 1; j < pool.size(); ++j) all.emplace_back(pool[i], pool[j]);
              }
            }
            return all;
          },
          edges);
    }
    if (n_cross > 0) {
      if (cross_capacity == 0) {
        throw GenerationError("relation '" + rspec.name + "': no cross-label pairs available");
      }
      std::discrete_distribution<std::size_t> pair_draw(cross_weight.begin(), cross_weight.end());
      detail::sample_distinct_pairs(
          n_cross, cross_capacity, rng,
          [&]() {
            const auto [a, b] = cross_pairs[pair_draw(rng)];
            return Edge{pick(members[a]), pick(members[b])};
          },
          [&]() {
            std::vector<Edge> all;
            for (const auto& [a, b] : cross_pairs) {
              for (NodeId u : members[a]) {
                for (NodeId v : members[b]) all.emplace_back(u, v);
              }
            }
            return all;
          },
          edges);
    }
    g.relations.push_back(RelationAdjacency::from_edges(rspec.name, n, edges));
  }

  g.split = stratified_split(g.labels, C, spec.train_ratio, spec.val_ratio,
                             spec.seed ^ 0x9e3779b97f4a7c15ULL);
  return g;
}

}  // namespace mrgnn
