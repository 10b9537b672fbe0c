#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/tensor.hpp"

namespace mrgnn {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// One relation's neighbour lists in CSR layout. Both directions of every
/// undirected edge are stored; lists are sorted ascending and free of
/// duplicates and self-loops.
class RelationAdjacency {
 public:
  RelationAdjacency() = default;

  /// Builds a symmetric adjacency from an undirected edge list. Reverse
  /// edges are added, duplicates collapsed and self-loops dropped.
  static RelationAdjacency from_edges(std::string name, std::size_t num_nodes,
                                      std::span<const Edge> edges) {
    std::vector<std::size_t> degree(num_nodes, 0);
    for (const auto& [u, v] : edges) {
      if (u >= num_nodes || v >= num_nodes) {
        throw ValidationError("relation '" + name + "': edge (" + std::to_string(u) + ", " +
                              std::to_string(v) + ") out of range for " +
                              std::to_string(num_nodes) + " nodes");
      }
      if (u == v) continue;
      ++degree[u];
      ++degree[v];
    }
    std::vector<std::size_t> offsets(num_nodes + 1, 0);
    for (std::size_t i = 0; i < num_nodes; ++i) offsets[i + 1] = offsets[i] + degree[i];
    std::vector<NodeId> raw(offsets.back());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& [u, v] : edges) {
      if (u == v) continue;
      raw[cursor[u]++] = v;
      raw[cursor[v]++] = u;
    }

    RelationAdjacency adj;
    adj.name_ = std::move(name);
    adj.offsets_.assign(num_nodes + 1, 0);
    adj.indices_.reserve(raw.size());
    for (std::size_t i = 0; i < num_nodes; ++i) {
      auto first = raw.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
      auto last = raw.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
      std::sort(first, last);
      last = std::unique(first, last);
      adj.indices_.insert(adj.indices_.end(), first, last);
      adj.offsets_[i + 1] = adj.indices_.size();
    }
    return adj;
  }

  const std::string& name() const { return name_; }
  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_directed_edges() const { return indices_.size(); }
  std::size_t num_edges() const { return indices_.size() / 2; }

  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  std::size_t offset(NodeId v) const { return offsets_[v]; }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {indices_.data() + offsets_[v], degree(v)};
  }

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const NodeId> indices() const { return indices_; }

  /// Undirected edge list with u < v, in CSR order.
  std::vector<Edge> undirected_edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (NodeId u = 0; u < num_nodes(); ++u) {
      for (NodeId v : neighbors(u)) {
        if (u < v) out.emplace_back(u, v);
      }
    }
    return out;
  }

  /// Copy keeping only edges whose endpoints both satisfy `keep`.
  RelationAdjacency restricted_to(const std::vector<bool>& keep) const {
    std::vector<Edge> edges;
    for (const auto& e : undirected_edges()) {
      if (keep[e.first] && keep[e.second]) edges.push_back(e);
    }
    return from_edges(name_, num_nodes(), edges);
  }

  void validate() const {
    if (offsets_.empty()) throw ValidationError("relation '" + name_ + "': empty offsets");
    if (offsets_.front() != 0 || offsets_.back() != indices_.size()) {
      throw ValidationError("relation '" + name_ + "': offsets do not span the index array");
    }
    const std::size_t n = num_nodes();
    for (std::size_t v = 0; v < n; ++v) {
      if (offsets_[v] > offsets_[v + 1]) {
        throw ValidationError("relation '" + name_ + "': offsets decrease at node " +
                              std::to_string(v));
      }
      for (NodeId u : neighbors(static_cast<NodeId>(v))) {
        if (u >= n) throw ValidationError("relation '" + name_ + "': neighbour out of range");
        if (u == v) throw ValidationError("relation '" + name_ + "': self-loop stored");
        auto back = neighbors(u);
        if (!std::binary_search(back.begin(), back.end(), static_cast<NodeId>(v))) {
          throw ValidationError("relation '" + name_ + "': edge (" + std::to_string(v) + ", " +
                                std::to_string(u) + ") has no reverse");
        }
      }
    }
  }

  friend bool operator==(const RelationAdjacency&, const RelationAdjacency&) = default;

 private:
  std::string name_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> indices_;
};

struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Nodes with features and labels plus R relation-specific edge sets over
/// the same node set.
struct MultiRelationalGraph {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<RelationAdjacency> relations;
  Split split;

  std::size_t num_nodes() const { return labels.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_relations() const { return relations.size(); }

  void validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
      throw ShapeError("feature rows (" + std::to_string(features.rows()) +
                       ") != label count (" + std::to_string(labels.size()) + ")");
    }
    if (num_classes < 1) throw ValidationError("graph has no classes");
    for (int y : labels) {
      if (y < 0 || y >= num_classes) {
        throw ValidationError("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes) + ")");
      }
    }
    if (!features.allFinite()) throw ValidationError("features contain non-finite values");
    for (const auto& rel : relations) {
      if (rel.num_nodes() != num_nodes()) {
        throw ValidationError("relation '" + rel.name() + "' sized for " +
                              std::to_string(rel.num_nodes()) + " nodes, graph has " +
                              std::to_string(num_nodes()));
      }
      rel.validate();
    }
    std::vector<char> seen(num_nodes(), 0);
    for (const auto* part : {&split.train, &split.val, &split.test}) {
      for (NodeId v : *part) {
        if (v >= num_nodes()) {
          throw ValidationError("split index " + std::to_string(v) + " out of range");
        }
        if (seen[v]) throw ValidationError("node " + std::to_string(v) + " in several splits");
        seen[v] = 1;
      }
    }
  }

  friend bool operator==(const MultiRelationalGraph& a, const MultiRelationalGraph& b) {
    return a.features == b.features && a.labels == b.labels && a.num_classes == b.num_classes &&
           a.relations == b.relations && a.split == b.split;
  }
};

/// Largest neighbour-list length of one relation (k_r); 0 when empty.
inline std::size_t max_degree(const RelationAdjacency& rel) {
  std::size_t best = 0;
  for (NodeId v = 0; v < rel.num_nodes(); ++v) best = std::max(best, rel.degree(v));
  return best;
}

inline std::size_t max_degree(const MultiRelationalGraph& g, std::size_t relation) {
  if (relation >= g.num_relations()) {
    throw ValidationError("relation index " + std::to_string(relation) + " out of range");
  }
  return max_degree(g.relations[relation]);
}

/// Index of the smallest class count; ties go to the highest index, so
/// balanced binary labels make class 1 the minority (positive) class.
inline int minority_of(std::span<const std::size_t> counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] <= counts[best]) best = c;
  }
  return static_cast<int>(best);
}

/// Index of the largest class count; ties go to the lowest index.
inline int majority_of(std::span<const std::size_t> counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

/// Label-stratified split. Each class is shuffled independently and cut at
/// the given ratios; the remainder goes to test.
inline Split stratified_split(std::span<const int> labels, int num_classes, double train_ratio,
                              double val_ratio, std::uint64_t seed) {
  if (train_ratio < 0 || val_ratio < 0 || train_ratio + val_ratio > 1.0) {
    throw ValidationError("split ratios must be non-negative and sum to at most 1");
  }
  Rng rng(seed);
  Split split;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<NodeId> members;
    for (std::size_t v = 0; v < labels.size(); ++v) {
      if (labels[v] == c) members.push_back(static_cast<NodeId>(v));
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_ratio));
    const auto n_val =
        std::min(members.size() - n_train, static_cast<std::size_t>(std::llround(n * val_ratio)));
    split.train.insert(split.train.end(), members.begin(), members.begin() + n_train);
    split.val.insert(split.val.end(), members.begin() + n_train,
                     members.begin() + n_train + n_val);
    split.test.insert(split.test.end(), members.begin() + n_train + n_val, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

struct RelationStats {
  std::string name;
  std::size_t edge_count = 0;
  // Absent when the relation has no edges.
  std::optional<double> avg_feature_similarity;
  std::optional<double> avg_label_similarity;
};

/// Per-relation edge count, mean feature similarity 1/(1+||x_u - x_v||) and
/// same-label edge fraction, followed by an "ALL" record over the union of
/// undirected edges.
inline std::vector<RelationStats> empirical_relation_stats(const MultiRelationalGraph& g) {
  auto summarize = [&](std::string name, const std::vector<Edge>& edges) {
    RelationStats st;
    st.name = std::move(name);
    st.edge_count = edges.size();
    if (edges.empty()) return st;
    double feat = 0.0;
    std::size_t same = 0;
    for (const auto& [u, v] : edges) {
      feat += 1.0 / (1.0 + (g.features.row(u) - g.features.row(v)).norm());
      if (g.labels[u] == g.labels[v]) ++same;
    }
    st.avg_feature_similarity = feat / static_cast<double>(edges.size());
    st.avg_label_similarity = static_cast<double>(same) / static_cast<double>(edges.size());
    return st;
  };

  std::vector<RelationStats> out;
  std::vector<Edge> all;
  for (const auto& rel : g.relations) {
    auto edges = rel.undirected_edges();
    out.push_back(summarize(rel.name(), edges));
    all.insert(all.end(), edges.begin(), edges.end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  out.push_back(summarize("ALL", all));
  return out;
}

}  // namespace mrgnn
