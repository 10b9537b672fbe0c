#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/tensor.hpp"

namespace mrgnn {

/// Label predictor of one layer: a single affine map from the layer's input
/// embedding width to class scores.
struct SimilarityLayer {
  Matrix weight;  // d_in x C
  Vector bias;    // C
  Matrix grad_weight;
  Vector grad_bias;

  SimilarityLayer() = default;
  SimilarityLayer(Eigen::Index input_dim, Eigen::Index num_classes)
      : weight(Matrix::Zero(input_dim, num_classes)),
        bias(Vector::Zero(num_classes)),
        grad_weight(Matrix::Zero(input_dim, num_classes)),
        grad_bias(Vector::Zero(num_classes)) {}

  Eigen::Index input_dim() const { return weight.rows(); }
  Eigen::Index num_classes() const { return weight.cols(); }

  void zero_grad() {
    grad_weight.setZero();
    grad_bias.setZero();
  }
};

/// One label predictor per GNN layer. Layers are indexed from 0; layer l
/// consumes the embeddings produced by layer l-1 (the raw features for l = 0).
struct SimilarityParams {
  std::vector<SimilarityLayer> layers;

  SimilarityParams() = default;
  SimilarityParams(std::span<const Eigen::Index> input_dims, Eigen::Index num_classes) {
    for (auto d : input_dims) layers.emplace_back(d, num_classes);
  }

  static SimilarityParams random(std::span<const Eigen::Index> input_dims, Eigen::Index num_classes,
                                 Rng& rng) {
    SimilarityParams p(input_dims, num_classes);
    for (auto& layer : p.layers) layer.weight = glorot_uniform(layer.input_dim(), num_classes, rng);
    return p;
  }

  void zero_grad() {
    for (auto& l : layers) l.zero_grad();
  }
};

/// Raw (pre-activation) class scores, one row per embedding row.
inline Matrix fcn_scores(const SimilarityParams& params, std::size_t layer, const Matrix& embeddings) {
  const auto& p = params.layers.at(layer);
  require_cols(embeddings, p.input_dim(), "fcn_scores");
  Matrix out = embeddings * p.weight;
  out.rowwise() += p.bias.transpose();
  return out;
}

/// tanh of the class scores; the representation compared by the distance.
inline Matrix activated_scores(const SimilarityParams& params, std::size_t layer,
                               const Matrix& embeddings) {
  return fcn_scores(params, layer, embeddings).array().tanh().matrix();
}

/// l1 distance between two rows of activated scores.
inline double activated_distance(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
  return (a - b).cwiseAbs().sum();
}

inline double node_distance(const SimilarityParams& params, std::size_t layer,
                            const Eigen::Ref<const RowVector>& h_a, const Eigen::Ref<const RowVector>& h_b) {
  Matrix both(2, h_a.size());
  if (h_b.size() != h_a.size()) throw ShapeError("node_distance: embedding widths differ");
  both.row(0) = h_a;
  both.row(1) = h_b;
  const Matrix act = activated_scores(params, layer, both);
  return activated_distance(act.row(0), act.row(1));
}

inline double node_similarity(const SimilarityParams& params, std::size_t layer,
                              const Eigen::Ref<const RowVector>& h_a, const Eigen::Ref<const RowVector>& h_b) {
  return 1.0 - node_distance(params, layer, h_a, h_b);
}

/// Mean cross-entropy of softmax(scores) over `rows`, with gradients scaled
/// by `weight` accumulated into the layer's buffers. When `grad_embeddings`
/// is given, d(weight * loss)/d(embeddings) is added to it as well.
inline double similarity_loss_and_grad(SimilarityParams& params, std::size_t layer,
                                       const Matrix& embeddings, std::span<const int> row_labels,
                                       std::span<const Eigen::Index> rows, double weight = 1.0,
                                       Matrix* grad_embeddings = nullptr) {
  auto& p = params.layers.at(layer);
  require_cols(embeddings, p.input_dim(), "similarity_loss_and_grad");
  if (rows.empty()) throw ValidationError("similarity loss over an empty node subset");
  if (row_labels.size() != rows.size()) throw ShapeError("one label per selected row required");

  const auto m = static_cast<Eigen::Index>(rows.size());
  Matrix x(m, embeddings.cols());
  for (Eigen::Index i = 0; i < m; ++i) x.row(i) = embeddings.row(rows[static_cast<std::size_t>(i)]);
  Matrix logits = x * p.weight;
  logits.rowwise() += p.bias.transpose();

  double loss = 0.0;
  Matrix dlogits(m, logits.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const int y = row_labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw ValidationError("label outside class range");
    const double lse = log_sum_exp(logits.row(i));
    loss += lse - logits(i, y);
    dlogits.row(i) = (logits.row(i).array() - lse).exp().matrix();
    dlogits(i, y) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(m);
  dlogits *= weight * inv;
  p.grad_weight.noalias() += x.transpose() * dlogits;
  p.grad_bias += dlogits.colwise().sum().transpose();
  if (grad_embeddings != nullptr) {
    Matrix dx = dlogits * p.weight.transpose();
    for (Eigen::Index i = 0; i < m; ++i) grad_embeddings->row(rows[static_cast<std::size_t>(i)]) += dx.row(i);
  }
  return loss * inv;
}

}  // namespace mrgnn
