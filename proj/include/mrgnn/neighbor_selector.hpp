#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/graph.hpp"

namespace mrgnn {

/// Filtering threshold p for every (layer, relation). All start at 0.5.
class ThresholdVector {
 public:
  ThresholdVector() = default;
  ThresholdVector(std::size_t layers, std::size_t relations, double initial = 0.5)
      : layers_(layers), relations_(relations), values_(layers * relations, initial) {
    check(initial);
  }

  std::size_t layers() const { return layers_; }
  std::size_t relations() const { return relations_; }

  double at(std::size_t layer, std::size_t relation) const { return values_.at(index(layer, relation)); }

  void set(std::size_t layer, std::size_t relation, double p) {
    check(p);
    values_.at(index(layer, relation)) = p;
  }

  std::span<const double> layer(std::size_t l) const {
    return std::span<const double>(values_).subspan(l * relations_, relations_);
  }

  friend bool operator==(const ThresholdVector&, const ThresholdVector&) = default;

 private:
  std::size_t index(std::size_t l, std::size_t r) const {
    if (l >= layers_ || r >= relations_) throw ValidationError("threshold index out of range");
    return l * relations_ + r;
  }
  static void check(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("threshold " + std::to_string(p) + " outside [0,1]");
  }

  std::size_t layers_ = 0;
  std::size_t relations_ = 0;
  std::vector<double> values_;
};

/// ceil(p * k) neighbours, at least one when p > 0 and k > 0. A relative
/// slack of 1e-12 absorbs representation error in p (0.3 * 10 keeps 3).
inline std::size_t retained_count(std::size_t k, double p) {
  if (k == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return k;
  const double raw = std::ceil(p * static_cast<double>(k) * (1.0 - 1e-12));
  return std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, k);
}

/// Retained neighbour lists for a set of centre nodes under one relation.
/// Each list is in ascending neighbour order; `edge_positions` points into
/// the relation's CSR index array.
struct RetainedSlice {
  std::vector<NodeId> centers;
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> neighbors;
  std::vector<std::size_t> edge_positions;

  std::size_t size() const { return centers.size(); }
  std::size_t num_retained() const { return neighbors.size(); }
  std::span<const NodeId> neighbors_of(std::size_t i) const {
    return {neighbors.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  std::span<const std::size_t> positions_of(std::size_t i) const {
    return {edge_positions.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

/// Keeps, for every centre, the ceil(p * k) neighbours with the highest
/// similarity; ties go to the smaller neighbour id. `edge_scores` is indexed
/// by CSR position and must hold a finite score for every edge of every centre.
inline RetainedSlice top_p_sample(const RelationAdjacency& adj, std::span<const NodeId> centers,
                                  double p, std::span<const double> edge_scores) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("top-p threshold outside [0,1]");
  if (edge_scores.size() != adj.num_directed_edges()) {
    throw ConsistencyError("relation '" + adj.name() + "': " + std::to_string(edge_scores.size()) +
                           " scores for " + std::to_string(adj.num_directed_edges()) + " edges");
  }
  RetainedSlice out;
  out.centers.assign(centers.begin(), centers.end());
  out.offsets.reserve(centers.size() + 1);
  std::vector<std::size_t> pos;
  for (NodeId v : centers) {
    const std::size_t k = adj.degree(v);
    const std::size_t base = adj.offset(v);
    for (std::size_t i = 0; i < k; ++i) {
      if (!std::isfinite(edge_scores[base + i])) {
        throw ConsistencyError("relation '" + adj.name() + "': no score for edge (" + std::to_string(v) +
                               ", " + std::to_string(adj.indices()[base + i]) + ")");
      }
    }
    const std::size_t keep = retained_count(k, p);
    pos.resize(k);
    std::iota(pos.begin(), pos.end(), base);
    if (keep < k) {
      // CSR lists are sorted, so position order is neighbour-id order.
      auto better = [&](std::size_t a, std::size_t b) {
        if (edge_scores[a] != edge_scores[b]) return edge_scores[a] > edge_scores[b];
        return a < b;
      };
      std::nth_element(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(keep), pos.end(), better);
      pos.resize(keep);
      std::sort(pos.begin(), pos.end());
    }
    for (std::size_t e : pos) {
      out.neighbors.push_back(adj.indices()[e]);
      out.edge_positions.push_back(e);
    }
    out.offsets.push_back(out.neighbors.size());
  }
  return out;
}

/// Running sum of distances over retained directed edges.
struct RetainedDistanceSum {
  double sum = 0.0;
  std::size_t count = 0;

  void add(const RetainedSlice& slice, std::span<const double> edge_distances) {
    for (std::size_t e : slice.edge_positions) sum += edge_distances[e];
    count += slice.num_retained();
  }
  std::optional<double> mean() const {
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  }
};

/// Mean distance over retained edges; nullopt when nothing was retained.
inline std::optional<double> retained_average_distance(const RetainedSlice& slice,
                                                       std::span<const double> edge_distances) {
  RetainedDistanceSum acc;
  acc.add(slice, edge_distances);
  return acc.mean();
}

}  // namespace mrgnn
