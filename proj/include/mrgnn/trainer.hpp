#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrgnn/aggregation.hpp"
#include "mrgnn/errors.hpp"
#include "mrgnn/graph.hpp"
#include "mrgnn/metrics.hpp"
#include "mrgnn/model.hpp"
#include "mrgnn/neighbor_selector.hpp"
#include "mrgnn/policies.hpp"
#include "mrgnn/rsrl.hpp"

namespace mrgnn {

enum class TrainingMode { transductive, inductive };

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 256;
  double learning_rate = 0.01;
  double lambda_sim = 2.0;
  double lambda_reg = 0.001;
  // Majority-class nodes kept per minority-class node in a batch.
  double undersample_ratio = 1.0;
  std::size_t alpha = 10;
  double tau = 1.0;
  std::size_t deep_switching_number = 3;
  bool backtracking = true;
  bool recursive = true;
  // false: every threshold is fixed at 1 and the RL forest is never stepped.
  bool filtering = true;
  PolicyKind policy = PolicyKind::actor_critic;
  ActionSpace action_space = ActionSpace::discrete;
  PolicyConfig rl;
  InterAggregation variant = InterAggregation::threshold;
  std::size_t layers = 1;
  Eigen::Index embedding_size = 64;
  TrainingMode mode = TrainingMode::transductive;
  std::uint64_t seed = 0;
  // Class treated as positive by recall/precision/AUC; minority of the
  // training split when unset.
  std::optional<int> positive_class;
  std::size_t kmeans_restarts = 10;
  // Record wall-clock time per epoch. Off by default so traces are
  // reproducible byte for byte.
  bool timing = false;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (lambda_sim < 0.0 || lambda_reg < 0.0) throw ConfigError("loss weights must be non-negative");
    if (!(undersample_ratio > 0.0)) throw ConfigError("undersample_ratio must be positive");
    if (alpha < 2) throw ConfigError("alpha must be at least 2");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (deep_switching_number == 0) throw ConfigError("deep_switching_number must be positive");
    if (layers == 0) throw ConfigError("layers must be at least 1");
    if (embedding_size <= 0) throw ConfigError("embedding_size must be positive");
    if (!(rl.learning_rate > 0.0)) throw ConfigError("rl learning rate must be positive");
    if (rl.gamma < 0.0 || rl.gamma > 1.0) throw ConfigError("rl gamma must lie in [0, 1]");
    if (action_space == ActionSpace::continuous && policy != PolicyKind::actor_critic) {
      throw ConfigError("the continuous action space needs the actor-critic policy");
    }
    if (kmeans_restarts == 0) throw ConfigError("kmeans_restarts must be positive");
  }
};

/// Class with the fewest members among `nodes` (see minority_of).
inline int minority_class(std::span<const int> labels, int num_classes, std::span<const NodeId> nodes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (NodeId v : nodes) ++counts[static_cast<std::size_t>(labels[v])];
  return minority_of(counts);
}

/// Keeps every positive node and floor(ratio * #positives) randomly chosen
/// others. A batch without positives is returned whole. Order follows the
/// input batch.
inline std::vector<NodeId> undersample_batch(std::span<const NodeId> batch, std::span<const int> labels,
                                             int positive_class, double ratio, Rng& rng) {
  std::vector<NodeId> pos, neg;
  for (NodeId v : batch) (labels[v] == positive_class ? pos : neg).push_back(v);
  if (pos.empty()) return {batch.begin(), batch.end()};
  const auto keep_neg = std::min(neg.size(), static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pos.size()))));
  std::vector<char> chosen(neg.size(), 0);
  std::vector<std::size_t> idx(neg.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < keep_neg; ++i) chosen[idx[i]] = 1;
  std::vector<NodeId> out;
  std::size_t j = 0;
  for (NodeId v : batch) {
    if (labels[v] == positive_class) {
      out.push_back(v);
    } else if (chosen[j++]) {
      out.push_back(v);
    }
  }
  return out;
}

/// What happened in one epoch.
struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::vector<TreeStep> trees;
  // Means over the epoch's batches.
  double train_gnn_loss = 0.0;
  double train_sim_loss = 0.0;
  double train_total_loss = 0.0;
  // On the validation split with the parameters at the end of the epoch.
  std::optional<double> val_gnn_loss;
  std::optional<double> val_sim_loss;
  std::optional<double> val_total_loss;
  std::optional<double> val_auc;
  bool aborted = false;
  std::vector<std::string> warnings;
  double wall_ms = 0.0;
};

/// Model, RL forest and thresholds of one training run.
struct TrainState {
  Model model;
  std::unique_ptr<RLForest> forest;
  ThresholdVector thresholds;
  std::size_t epoch = 0;
  int positive_class = 0;
  Rng rng;
};

inline TreeOptions tree_options(const TrainConfig& cfg) {
  TreeOptions o;
  o.alpha = cfg.alpha;
  o.deep_switching_number = cfg.deep_switching_number;
  o.backtracking = cfg.backtracking;
  o.recursive = cfg.recursive;
  o.tau = cfg.tau;
  o.action_space = cfg.action_space;
  return o;
}

/// Relations used for message passing while training.
inline std::vector<RelationAdjacency> training_relations(const MultiRelationalGraph& g, TrainingMode mode) {
  if (mode == TrainingMode::transductive) return g.relations;
  std::vector<bool> keep(g.num_nodes(), false);
  for (NodeId v : g.split.train) keep[v] = true;
  std::vector<RelationAdjacency> out;
  for (const auto& rel : g.relations) out.push_back(rel.restricted_to(keep));
  return out;
}

inline TrainState init_state(const MultiRelationalGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  g.validate();
  if (g.split.train.empty()) throw ValidationError("training split is empty");
  TrainState st;
  st.rng.seed(cfg.seed);
  ModelShape shape;
  shape.input_dim = g.features.cols();
  shape.embedding_dim = cfg.embedding_size;
  shape.layers = cfg.layers;
  shape.relations = g.num_relations();
  shape.classes = g.num_classes;
  shape.variant = cfg.variant;
  st.model = Model::random(shape, st.rng);
  st.positive_class = cfg.positive_class.value_or(minority_class(g.labels, g.num_classes, g.split.train));
  if (st.positive_class < 0 || st.positive_class >= g.num_classes) throw ConfigError("positive_class out of range");

  const auto rels = training_relations(g, cfg.mode);
  std::vector<std::size_t> degrees;
  for (const auto& r : rels) degrees.push_back(max_degree(r));
  const std::uint64_t policy_seed = cfg.seed ^ 0x5851f42d4c957f2dULL;
  const PolicyFactory factory = [&](std::size_t l, std::size_t r) {
    return make_policy(cfg.policy, cfg.action_space, cfg.rl, policy_seed + 1000 * l + r);
  };
  st.forest = std::make_unique<RLForest>(cfg.layers, degrees, tree_options(cfg), factory);
  st.thresholds = cfg.filtering ? st.forest->thresholds() : ThresholdVector(cfg.layers, g.num_relations(), 1.0);
  return st;
}

namespace detail {

inline std::optional<double> positive_auc(const Matrix& probs, std::span<const NodeId> nodes,
                                          std::span<const int> labels, int positive_class) {
  std::vector<double> scores(nodes.size());
  auto pos = std::make_unique<bool[]>(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    scores[i] = probs(static_cast<Eigen::Index>(i), positive_class);
    pos[i] = labels[nodes[i]] == positive_class;
  }
  return auc(scores, std::span<const bool>(pos.get(), nodes.size()));
}

}  // namespace detail

/// One pass over the shuffled training nodes followed by one RL-forest step.
/// A non-finite loss restores the parameters held at the start of the epoch.
inline EpochRecord train_epoch(TrainState& st, const MultiRelationalGraph& g,
                               std::span<const RelationAdjacency> train_rels, const TrainConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  EpochRecord rec;
  rec.epoch = st.epoch + 1;
  const std::size_t L = cfg.layers;
  const std::size_t R = g.num_relations();
  const LossWeights weights{cfg.lambda_sim, cfg.lambda_reg};

  const Model snapshot = st.model;
  std::vector<NodeId> order = g.split.train;
  std::shuffle(order.begin(), order.end(), st.rng);

  std::vector<RetainedDistanceSum> retained(L * R);
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const auto end = std::min(order.size(), start + cfg.batch_size);
    const std::span<const NodeId> chunk(order.data() + start, end - start);
    const auto batch = undersample_batch(chunk, g.labels, st.positive_class, cfg.undersample_ratio, st.rng);

    auto fwd = forward(st.model, train_rels, g.features, st.thresholds, batch);
    st.model.zero_grad();
    const auto loss = backward(st.model, fwd, g.labels, weights);
    bool finite = loss.finite();
    st.model.for_each_parameter([&](const auto&, const auto& grad) { finite = finite && grad.allFinite(); });
    if (!finite) {
      st.model = snapshot;
      rec.aborted = true;
      rec.warnings.push_back("non-finite loss in batch " + std::to_string(batches + 1) +
                             "; parameters restored to the start of the epoch");
      break;
    }
    st.model.sgd_step(cfg.learning_rate);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t r = 0; r < R; ++r) {
        const auto& s = fwd.layers[l].retained[r];
        retained[l * R + r].sum += s.sum;
        retained[l * R + r].count += s.count;
      }
    }
    rec.train_gnn_loss += loss.gnn;
    rec.train_sim_loss += loss.sim;
    rec.train_total_loss += loss.total;
    ++batches;
  }
  if (batches > 0) {
    rec.train_gnn_loss /= static_cast<double>(batches);
    rec.train_sim_loss /= static_cast<double>(batches);
    rec.train_total_loss /= static_cast<double>(batches);
  }

  if (!g.split.val.empty()) {
    auto fwd = forward(st.model, g.relations, g.features, st.thresholds, g.split.val);
    const auto vl = evaluate_loss(st.model, fwd, g.labels, weights);
    rec.val_gnn_loss = vl.gnn;
    rec.val_sim_loss = vl.sim;
    rec.val_total_loss = vl.total;
    rec.val_auc = detail::positive_auc(softmax_rows(fwd.logits), g.split.val, g.labels, st.positive_class);
  }

  if (cfg.filtering && !rec.aborted) {
    std::vector<TreeInput> inputs(L * R);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (const auto d = retained[i].mean()) inputs[i] = TreeInput{*d, 1.0 - *d};
    }
    rec.trees = st.forest->epoch(inputs, rec.val_auc.value_or(0.5));
    st.thresholds = st.forest->thresholds();
    for (auto& t : rec.trees) {
      for (auto& w : t.warnings) {
        rec.warnings.push_back("tree (" + std::to_string(t.layer) + ", " + std::to_string(t.relation) + "): " + w);
      }
    }
  } else {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t r = 0; r < R; ++r) {
        TreeStep s;
        s.layer = l;
        s.relation = r;
        s.threshold = st.thresholds.at(l, r);
        s.depth = st.forest->tree(l, r).depth();
        s.converged = st.forest->tree(l, r).converged();
        s.skipped = true;
        rec.trees.push_back(std::move(s));
      }
    }
  }
  ++st.epoch;
  if (cfg.timing) rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return rec;
}

/// Embeddings and class probabilities for `nodes` with the full adjacency.
struct Inference {
  std::vector<NodeId> nodes;
  Matrix embeddings;
  Matrix probabilities;
};

inline Inference infer(const TrainState& st, const MultiRelationalGraph& g, std::span<const NodeId> nodes) {
  Inference out;
  out.nodes.assign(nodes.begin(), nodes.end());
  out.embeddings = embed(st.model, g.relations, g.features, st.thresholds, nodes);
  out.probabilities = classify(st.model, out.embeddings);
  return out;
}

/// Metrics for `nodes` whose rows in `embeddings`/`probabilities` follow the
/// same order. Predictions are the argmax class; clustering uses k = C.
inline EvalReport evaluate(const Matrix& embeddings, const Matrix& probabilities, std::span<const NodeId> nodes,
                           std::span<const int> labels, int num_classes, int positive_class,
                           std::size_t kmeans_restarts, std::uint64_t seed) {
  if (static_cast<std::size_t>(embeddings.rows()) != nodes.size() ||
      static_cast<std::size_t>(probabilities.rows()) != nodes.size()) {
    throw ValidationError("evaluation rows do not match the node list");
  }
  if (probabilities.cols() != num_classes) throw ValidationError("probability width differs from the class count");
  for (NodeId v : nodes) {
    if (v >= labels.size()) throw ValidationError("evaluation node " + std::to_string(v) + " out of range");
  }
  EvalReport rep;
  rep.num_nodes = nodes.size();
  if (nodes.empty()) return rep;
  std::vector<int> pred(nodes.size()), truth(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Eigen::Index arg = 0;
    probabilities.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    pred[i] = static_cast<int>(arg);
    truth[i] = labels[nodes[i]];
  }
  rep.auc = detail::positive_auc(probabilities, nodes, labels, positive_class);
  rep.counts = confusion(pred, truth, positive_class);
  rep.recall = recall(rep.counts);
  rep.precision = precision(rep.counts);
  rep.f1 = f1(rep.counts);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(num_classes), nodes.size());
  const auto km = kmeans(embeddings, k, kmeans_restarts, seed);
  std::vector<int> clusters(km.assignment.begin(), km.assignment.end());
  rep.nmi = nmi(clusters, truth);
  rep.ari = ari(clusters, truth);
  return rep;
}

/// Result of a full training run.
struct FitResult {
  TrainState state;
  std::vector<EpochRecord> epochs;
  Inference final;  // every node, full adjacency, final parameters
  EvalReport test_report;

  bool aborted() const { return !epochs.empty() && epochs.back().aborted; }
  std::size_t completed_epochs() const { return epochs.size() - (aborted() ? 1 : 0); }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains for cfg.epochs epochs (fewer if an epoch aborts), then embeds every node with the full
/// adjacency and evaluates the test split.
inline FitResult fit(const MultiRelationalGraph& g, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  FitResult res{init_state(g, cfg), {}, {}, {}};
  const auto rels = training_relations(g, cfg.mode);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    res.epochs.push_back(train_epoch(res.state, g, rels, cfg));
    if (on_epoch) on_epoch(res.epochs.back());
    // Parameters were rolled back to the last good epoch; stop there.
    if (res.epochs.back().aborted) break;
  }
  std::vector<NodeId> all(g.num_nodes());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<NodeId>(v);
  res.final = infer(res.state, g, all);
  Matrix z(static_cast<Eigen::Index>(g.split.test.size()), res.final.embeddings.cols());
  Matrix p(static_cast<Eigen::Index>(g.split.test.size()), res.final.probabilities.cols());
  for (std::size_t i = 0; i < g.split.test.size(); ++i) {
    z.row(static_cast<Eigen::Index>(i)) = res.final.embeddings.row(g.split.test[i]);
    p.row(static_cast<Eigen::Index>(i)) = res.final.probabilities.row(g.split.test[i]);
  }
  res.test_report = evaluate(z, p, g.split.test, g.labels, g.num_classes, res.state.positive_class,
                             cfg.kmeans_restarts, cfg.seed);
  return res;
}

}  // namespace mrgnn
