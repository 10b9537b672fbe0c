#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/neighbor_selector.hpp"
#include "mrgnn/tensor.hpp"

namespace mrgnn {

/// How per-relation neighbourhood embeddings are combined into one vector.
enum class InterAggregation {
  threshold,  // weights are the filtering thresholds p_r
  attention,  // softmax over a learned score per relation
  weight,     // a learned scalar per relation
  mean,       // 1/R each
};

/// Projection of one layer: h_v = ReLU([h_v_prev, m_v] W + b).
struct GnnLayer {
  Matrix weight;  // 2*d_in x d_out
  Vector bias;
  Vector relation_params;  // attention scores or relation weights
  Matrix grad_weight;
  Vector grad_bias;
  Vector grad_relation_params;

  Eigen::Index input_dim() const { return weight.rows() / 2; }
  Eigen::Index output_dim() const { return weight.cols(); }

  void zero_grad() {
    grad_weight.setZero();
    grad_bias.setZero();
    grad_relation_params.setZero();
  }
};

/// Final affine map from the last embedding to class logits.
struct Classifier {
  Matrix weight;  // d_L x C
  Vector bias;
  Matrix grad_weight;
  Vector grad_bias;

  void zero_grad() {
    grad_weight.setZero();
    grad_bias.setZero();
  }
};

struct GnnParameters {
  InterAggregation variant = InterAggregation::threshold;
  std::vector<GnnLayer> layers;
  Classifier classifier;

  /// Glorot-initialised parameters; `dims` lists d_0 (input) .. d_L.
  static GnnParameters random(std::span<const Eigen::Index> dims, std::size_t relations, Eigen::Index classes,
                              InterAggregation variant, Rng& rng) {
    if (dims.size() < 2) throw ValidationError("at least one GNN layer is required");
    GnnParameters p;
    p.variant = variant;
    const auto R = static_cast<Eigen::Index>(relations);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      GnnLayer layer;
      layer.weight = glorot_uniform(2 * dims[l], dims[l + 1], rng);
      layer.bias = Vector::Zero(dims[l + 1]);
      layer.relation_params =
          variant == InterAggregation::weight ? Vector::Constant(R, R > 0 ? 1.0 / static_cast<double>(R) : 0.0)
                                              : Vector::Zero(R);
      layer.grad_weight = Matrix::Zero(layer.weight.rows(), layer.weight.cols());
      layer.grad_bias = Vector::Zero(layer.bias.size());
      layer.grad_relation_params = Vector::Zero(R);
      p.layers.push_back(std::move(layer));
    }
    p.classifier.weight = glorot_uniform(dims.back(), classes, rng);
    p.classifier.bias = Vector::Zero(classes);
    p.classifier.grad_weight = Matrix::Zero(dims.back(), classes);
    p.classifier.grad_bias = Vector::Zero(classes);
    return p;
  }

  void zero_grad() {
    for (auto& l : layers) l.zero_grad();
    classifier.zero_grad();
  }
};

/// Combination weight of each relation for `layer`.
inline Vector relation_weights(const GnnLayer& layer, InterAggregation variant, std::span<const double> thresholds) {
  const auto R = layer.relation_params.size();
  Vector w(R);
  switch (variant) {
    case InterAggregation::threshold:
      if (static_cast<Eigen::Index>(thresholds.size()) != R) throw ShapeError("one threshold per relation required");
      for (Eigen::Index r = 0; r < R; ++r) w[r] = thresholds[static_cast<std::size_t>(r)];
      break;
    case InterAggregation::attention: {
      const double mx = R > 0 ? layer.relation_params.maxCoeff() : 0.0;
      w = (layer.relation_params.array() - mx).exp();
      w /= w.sum();
      break;
    }
    case InterAggregation::weight: w = layer.relation_params; break;
    case InterAggregation::mean: w.setConstant(R > 0 ? 1.0 / static_cast<double>(R) : 0.0); break;
  }
  return w;
}

/// Output of the per-relation mean aggregation, with its pre-activation.
struct IntraResult {
  Matrix pre;  // mean of retained neighbour embeddings
  Matrix out;  // ReLU(pre)
};

/// Row i is ReLU(mean of prev rows over the retained neighbours of centre i);
/// zero when nothing was retained. `row_of` maps node ids to rows of `prev`.
inline IntraResult intra_relation_aggregate(const RetainedSlice& slice, const Matrix& prev,
                                            std::span<const std::int32_t> row_of) {
  IntraResult res;
  res.pre = Matrix::Zero(static_cast<Eigen::Index>(slice.size()), prev.cols());
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const auto nb = slice.neighbors_of(i);
    if (nb.empty()) continue;
    auto row = res.pre.row(static_cast<Eigen::Index>(i));
    for (NodeId u : nb) {
      const auto r = row_of[u];
      if (r < 0) throw ConsistencyError("neighbour " + std::to_string(u) + " missing from the previous layer");
      row += prev.row(r);
    }
    row /= static_cast<double>(nb.size());
  }
  res.out = res.pre.cwiseMax(0.0);
  return res;
}

/// Pass-through state of the inter-relation step needed by its backward.
struct InterResult {
  Vector weights;   // per relation
  Matrix combined;  // m
  Matrix concat;    // [self, m]
  Matrix pre;
  Matrix out;
};

/// m_v = sum_r w_r h_{v,r}; h_v = ReLU([self_v, m_v] W + b).
inline InterResult inter_relation_aggregate(const GnnLayer& layer, InterAggregation variant, const Matrix& self,
                                            std::span<const Matrix> relation_embeddings,
                                            std::span<const double> thresholds) {
  const auto d_in = layer.input_dim();
  require_cols(self, d_in, "inter_relation_aggregate(self)");
  InterResult res;
  res.weights = relation_weights(layer, variant, thresholds);
  if (static_cast<Eigen::Index>(relation_embeddings.size()) != res.weights.size()) {
    throw ShapeError("one relation embedding per relation required");
  }
  res.combined = Matrix::Zero(self.rows(), d_in);
  for (std::size_t r = 0; r < relation_embeddings.size(); ++r) {
    require_cols(relation_embeddings[r], d_in, "inter_relation_aggregate(relation)");
    if (relation_embeddings[r].rows() != self.rows()) throw ShapeError("relation embedding row count differs");
    res.combined += res.weights[static_cast<Eigen::Index>(r)] * relation_embeddings[r];
  }
  res.concat.resize(self.rows(), 2 * d_in);
  res.concat.leftCols(d_in) = self;
  res.concat.rightCols(d_in) = res.combined;
  res.pre = res.concat * layer.weight;
  res.pre.rowwise() += layer.bias.transpose();
  res.out = res.pre.cwiseMax(0.0);
  return res;
}

/// Gradients flowing out of the inter-relation step.
struct InterGrad {
  Matrix self;                       // d loss / d self rows
  std::vector<Matrix> relations;     // d loss / d h_{.,r}
  Vector weights;                    // d loss / d w_r
};

/// Backward of inter_relation_aggregate. Accumulates into the layer's
/// projection and relation-parameter gradients.
inline InterGrad inter_relation_backward(GnnLayer& layer, InterAggregation variant, const InterResult& fwd,
                                         std::span<const Matrix> relation_embeddings, const Matrix& grad_out) {
  const auto d_in = layer.input_dim();
  Matrix dpre = grad_out.cwiseProduct((fwd.pre.array() > 0.0).cast<double>().matrix());
  layer.grad_weight.noalias() += fwd.concat.transpose() * dpre;
  layer.grad_bias += dpre.colwise().sum().transpose();
  Matrix dconcat = dpre * layer.weight.transpose();

  InterGrad g;
  g.self = dconcat.leftCols(d_in);
  const Matrix dm = dconcat.rightCols(d_in);
  const auto R = fwd.weights.size();
  g.weights = Vector::Zero(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    g.weights[r] = dm.cwiseProduct(relation_embeddings[static_cast<std::size_t>(r)]).sum();
    g.relations.push_back(fwd.weights[r] * dm);
  }
  if (variant == InterAggregation::weight) {
    layer.grad_relation_params += g.weights;
  } else if (variant == InterAggregation::attention) {
    const double inner = fwd.weights.dot(g.weights);
    layer.grad_relation_params += fwd.weights.cwiseProduct((g.weights.array() - inner).matrix());
  }
  return g;
}

/// Backward of intra_relation_aggregate: scatters into `grad_prev`.
inline void intra_relation_backward(const RetainedSlice& slice, const IntraResult& fwd, const Matrix& grad_out,
                                    std::span<const std::int32_t> row_of, Matrix& grad_prev) {
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const auto nb = slice.neighbors_of(i);
    if (nb.empty()) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const RowVector d = grad_out.row(ii).cwiseProduct((fwd.pre.row(ii).array() > 0.0).cast<double>().matrix()) /
                        static_cast<double>(nb.size());
    for (NodeId u : nb) grad_prev.row(row_of[u]) += d;
  }
}

}  // namespace mrgnn
