#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mrgnn/aggregation.hpp"
#include "mrgnn/errors.hpp"
#include "mrgnn/graph.hpp"
#include "mrgnn/neighbor_selector.hpp"
#include "mrgnn/similarity.hpp"
#include "mrgnn/tensor.hpp"

namespace mrgnn {

struct ModelShape {
  Eigen::Index input_dim = 0;
  Eigen::Index embedding_dim = 64;
  std::size_t layers = 1;
  std::size_t relations = 0;
  Eigen::Index classes = 2;
  InterAggregation variant = InterAggregation::threshold;
};

/// Every trainable tensor: GNN projections, relation parameters, the
/// classifier and the per-layer label predictors.
struct Model {
  GnnParameters gnn;
  SimilarityParams sim;

  static Model random(const ModelShape& shape, Rng& rng) {
    if (shape.layers == 0) throw ConfigError("at least one layer is required");
    if (shape.input_dim <= 0 || shape.embedding_dim <= 0) throw ConfigError("layer widths must be positive");
    std::vector<Eigen::Index> dims{shape.input_dim};
    for (std::size_t l = 0; l < shape.layers; ++l) dims.push_back(shape.embedding_dim);
    Model m;
    m.gnn = GnnParameters::random(dims, shape.relations, shape.classes, shape.variant, rng);
    m.sim = SimilarityParams::random(std::span<const Eigen::Index>(dims).first(shape.layers), shape.classes, rng);
    return m;
  }

  std::size_t num_layers() const { return gnn.layers.size(); }
  std::size_t num_relations() const {
    return gnn.layers.empty() ? 0 : static_cast<std::size_t>(gnn.layers.front().relation_params.size());
  }

  /// Calls f(param, grad) for every tensor in a fixed order. Relation
  /// parameters are included only for the variants that learn them.
  template <class F>
  void for_each_parameter(F&& f) {
    for (auto& l : gnn.layers) {
      f(l.weight, l.grad_weight);
      f(l.bias, l.grad_bias);
      if (learns_relation_params()) f(l.relation_params, l.grad_relation_params);
    }
    f(gnn.classifier.weight, gnn.classifier.grad_weight);
    f(gnn.classifier.bias, gnn.classifier.grad_bias);
    for (auto& l : sim.layers) {
      f(l.weight, l.grad_weight);
      f(l.bias, l.grad_bias);
    }
  }

  template <class F>
  void for_each_parameter(F&& f) const {
    const_cast<Model*>(this)->for_each_parameter([&](const auto& p, const auto& g) { f(p, g); });
  }

  bool learns_relation_params() const {
    return gnn.variant == InterAggregation::attention || gnn.variant == InterAggregation::weight;
  }

  void zero_grad() {
    gnn.zero_grad();
    sim.zero_grad();
  }

  /// sqrt of the sum of squares over all trainable entries.
  double parameter_norm() const {
    double sq = 0.0;
    for_each_parameter([&](const auto& p, const auto&) { sq += p.squaredNorm(); });
    return std::sqrt(sq);
  }

  bool all_finite() const {
    bool ok = true;
    for_each_parameter([&](const auto& p, const auto&) { ok = ok && p.allFinite(); });
    return ok;
  }

  void sgd_step(double learning_rate) {
    for_each_parameter([&](auto& p, const auto& g) { p -= learning_rate * g; });
  }
};

/// Node sets touched by an L-layer forward pass. Level L holds the batch;
/// level l-1 holds level l followed by every raw neighbour not yet present
/// (ascending id). Batch rows are therefore rows 0..B-1 at every level.
struct Frontier {
  std::vector<std::vector<NodeId>> nodes;
  std::vector<std::vector<std::int32_t>> row_of;  // node id -> row, -1 if absent

  static Frontier build(std::span<const RelationAdjacency> relations, std::size_t num_nodes,
                        std::span<const NodeId> batch, std::size_t layers) {
    Frontier f;
    f.nodes.resize(layers + 1);
    f.row_of.resize(layers + 1);
    auto& top = f.nodes[layers];
    auto& top_rows = f.row_of[layers];
    top_rows.assign(num_nodes, -1);
    for (NodeId v : batch) {
      if (v >= num_nodes) throw ValidationError("batch node " + std::to_string(v) + " out of range");
      if (top_rows[v] >= 0) throw ValidationError("batch node " + std::to_string(v) + " listed twice");
      top_rows[v] = static_cast<std::int32_t>(top.size());
      top.push_back(v);
    }
    for (std::size_t l = layers; l-- > 0;) {
      f.nodes[l] = f.nodes[l + 1];
      f.row_of[l] = f.row_of[l + 1];
      std::vector<NodeId> added;
      for (NodeId v : f.nodes[l + 1]) {
        for (const auto& rel : relations) {
          for (NodeId u : rel.neighbors(v)) {
            if (f.row_of[l][u] == -1) {
              f.row_of[l][u] = -2;  // mark; rows assigned after sorting
              added.push_back(u);
            }
          }
        }
      }
      std::sort(added.begin(), added.end());
      for (NodeId u : added) {
        f.row_of[l][u] = static_cast<std::int32_t>(f.nodes[l].size());
        f.nodes[l].push_back(u);
      }
    }
    return f;
  }
};

/// Everything layer l's backward needs, plus the filtering observations.
struct LayerCache {
  std::vector<RetainedSlice> slices;  // per relation
  std::vector<IntraResult> intra;
  std::vector<Matrix> relation_out;
  InterResult inter;
  std::vector<RetainedDistanceSum> retained;  // per relation
};

struct ForwardOptions {
  // Reuse these retained sets instead of filtering ([layer][relation]).
  const std::vector<std::vector<RetainedSlice>>* fixed_retained = nullptr;
};

struct ForwardResult {
  Frontier frontier;
  std::vector<Matrix> h;  // h[0] = input rows of level 0, h[L] = batch embeddings
  std::vector<LayerCache> layers;
  Matrix logits;

  std::size_t batch_size() const { return frontier.nodes.back().size(); }
  std::vector<std::vector<RetainedSlice>> retained_sets() const {
    std::vector<std::vector<RetainedSlice>> out;
    for (const auto& l : layers) out.push_back(l.slices);
    return out;
  }
};

/// Forward pass for `batch`: per layer, score every frontier node once,
/// rank each centre's edges by similarity, keep the top-p share, then
/// aggregate within and across relations.
inline ForwardResult forward(const Model& model, std::span<const RelationAdjacency> relations,
                             const Matrix& features, const ThresholdVector& thresholds,
                             std::span<const NodeId> batch, const ForwardOptions& opts = {}) {
  const std::size_t L = model.num_layers();
  const std::size_t R = relations.size();
  if (R != model.num_relations()) throw ShapeError("model and graph disagree on the relation count");
  if (thresholds.layers() != L || thresholds.relations() != R) throw ShapeError("threshold vector shape mismatch");
  const auto n = static_cast<std::size_t>(features.rows());

  ForwardResult res;
  res.frontier = Frontier::build(relations, n, batch, L);
  const auto& level0 = res.frontier.nodes[0];
  res.h.resize(L + 1);
  res.h[0].resize(static_cast<Eigen::Index>(level0.size()), features.cols());
  for (std::size_t i = 0; i < level0.size(); ++i) res.h[0].row(static_cast<Eigen::Index>(i)) = features.row(level0[i]);

  std::vector<double> sims, dists;
  res.layers.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    auto& cache = res.layers[l];
    const Matrix& prev = res.h[l];
    const auto& centers = res.frontier.nodes[l + 1];
    const auto& row_of = res.frontier.row_of[l];
    const Matrix act = activated_scores(model.sim, l, prev);

    cache.slices.resize(R);
    cache.retained.resize(R);
    for (std::size_t r = 0; r < R; ++r) {
      const auto& adj = relations[r];
      sims.assign(adj.num_directed_edges(), std::numeric_limits<double>::quiet_NaN());
      dists.assign(adj.num_directed_edges(), std::numeric_limits<double>::quiet_NaN());
      for (std::size_t i = 0; i < centers.size(); ++i) {
        const std::size_t base = adj.offset(centers[i]);
        const auto nb = adj.neighbors(centers[i]);
        for (std::size_t k = 0; k < nb.size(); ++k) {
          const double d = activated_distance(act.row(static_cast<Eigen::Index>(i)), act.row(row_of[nb[k]]));
          dists[base + k] = d;
          sims[base + k] = 1.0 - d;
        }
      }
      if (opts.fixed_retained != nullptr) {
        cache.slices[r] = opts.fixed_retained->at(l).at(r);
        if (cache.slices[r].centers != centers) throw ConsistencyError("fixed retained set has different centres");
      } else {
        cache.slices[r] = top_p_sample(adj, centers, thresholds.at(l, r), sims);
      }
      cache.retained[r].add(cache.slices[r], dists);
      cache.intra.push_back(intra_relation_aggregate(cache.slices[r], prev, row_of));
      cache.relation_out.push_back(cache.intra.back().out);
    }
    const Matrix self = prev.topRows(static_cast<Eigen::Index>(centers.size()));
    cache.inter = inter_relation_aggregate(model.gnn.layers[l], model.gnn.variant, self, cache.relation_out,
                                           thresholds.layer(l));
    res.h[l + 1] = cache.inter.out;
  }
  res.logits = res.h[L] * model.gnn.classifier.weight;
  res.logits.rowwise() += model.gnn.classifier.bias.transpose();
  return res;
}

struct LossWeights {
  double lambda_sim = 2.0;
  double lambda_reg = 0.001;
};

struct LossBreakdown {
  double gnn = 0.0;
  std::vector<double> sim_per_layer;
  double sim = 0.0;  // sum over layers
  double reg = 0.0;  // parameter norm, before weighting
  double total = 0.0;
  // d total / d (relation combination weight), per layer, thresholds held fixed.
  std::vector<Vector> relation_weight_grads;

  bool finite() const { return std::isfinite(gnn) && std::isfinite(sim) && std::isfinite(reg) && std::isfinite(total); }
};

/// Classification loss plus weighted similarity losses plus the weighted
/// parameter norm.
inline double total_loss(double gnn_loss, std::span<const double> sim_losses, double parameter_norm,
                         const LossWeights& w) {
  double sim = 0.0;
  for (double s : sim_losses) sim += s;
  return gnn_loss + w.lambda_sim * sim + w.lambda_reg * parameter_norm;
}

/// Reverse pass over a cached forward. Accumulates into the model's gradient
/// buffers and returns the loss terms. `labels` is indexed by node id.
inline LossBreakdown backward(Model& model, const ForwardResult& fwd, std::span<const int> labels,
                              const LossWeights& w) {
  const std::size_t L = model.num_layers();
  const auto& batch = fwd.frontier.nodes[L];
  const auto B = static_cast<Eigen::Index>(batch.size());
  if (B == 0) throw ValidationError("backward over an empty batch");
  std::vector<int> batch_labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch_labels[i] = labels[batch[i]];
  std::vector<Eigen::Index> batch_rows(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch_rows[i] = static_cast<Eigen::Index>(i);

  LossBreakdown out;
  std::vector<Matrix> dh(L + 1);
  for (std::size_t l = 1; l <= L; ++l) dh[l] = Matrix::Zero(fwd.h[l].rows(), fwd.h[l].cols());

  // Classification cross-entropy, mean over the batch.
  auto& cls = model.gnn.classifier;
  Matrix dlogits(B, fwd.logits.cols());
  double ce = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const double lse = log_sum_exp(fwd.logits.row(i));
    const int y = batch_labels[static_cast<std::size_t>(i)];
    ce += lse - fwd.logits(i, y);
    dlogits.row(i) = (fwd.logits.row(i).array() - lse).exp().matrix();
    dlogits(i, y) -= 1.0;
  }
  out.gnn = ce / static_cast<double>(B);
  dlogits /= static_cast<double>(B);
  cls.grad_weight.noalias() += fwd.h[L].transpose() * dlogits;
  cls.grad_bias += dlogits.colwise().sum().transpose();
  dh[L].noalias() += dlogits * cls.weight.transpose();

  // Similarity losses on each layer's input embeddings of the batch nodes.
  for (std::size_t l = 0; l < L; ++l) {
    const double s = similarity_loss_and_grad(model.sim, l, fwd.h[l], batch_labels, batch_rows, w.lambda_sim,
                                              l > 0 ? &dh[l] : nullptr);
    out.sim_per_layer.push_back(s);
    out.sim += s;
  }

  out.relation_weight_grads.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    const auto& cache = fwd.layers[l];
    auto g = inter_relation_backward(model.gnn.layers[l], model.gnn.variant, cache.inter, cache.relation_out,
                                     dh[l + 1]);
    out.relation_weight_grads[l] = g.weights;
    if (l == 0) continue;  // raw features are not trained
    dh[l].topRows(g.self.rows()) += g.self;
    for (std::size_t r = 0; r < cache.slices.size(); ++r) {
      intra_relation_backward(cache.slices[r], cache.intra[r], g.relations[r], fwd.frontier.row_of[l], dh[l]);
    }
  }

  out.reg = model.parameter_norm();
  if (out.reg > 0.0 && w.lambda_reg != 0.0) {
    const double scale = w.lambda_reg / out.reg;
    model.for_each_parameter([&](const auto& p, auto& g) { g += scale * p; });
  }
  out.total = total_loss(out.gnn, out.sim_per_layer, out.reg, w);
  return out;
}

/// Loss terms without touching `model`'s gradient buffers.
inline LossBreakdown evaluate_loss(const Model& model, const ForwardResult& fwd, std::span<const int> labels,
                                   const LossWeights& w) {
  Model scratch = model;
  return backward(scratch, fwd, labels, w);
}

/// Final-layer embeddings for `nodes`, in the given order.
inline Matrix embed(const Model& model, std::span<const RelationAdjacency> relations, const Matrix& features,
                    const ThresholdVector& thresholds, std::span<const NodeId> nodes) {
  return forward(model, relations, features, thresholds, nodes).h.back();
}

/// Class probabilities from final embeddings.
inline Matrix classify(const Model& model, const Matrix& embeddings) {
  Matrix logits = embeddings * model.gnn.classifier.weight;
  logits.rowwise() += model.gnn.classifier.bias.transpose();
  return softmax_rows(logits);
}

}  // namespace mrgnn
