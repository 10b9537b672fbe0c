#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/neighbor_selector.hpp"
#include "mrgnn/policies.hpp"

namespace mrgnn {

namespace detail {

// alpha^e as an exact integer; throws when it would exceed `limit`.
inline std::uint64_t checked_pow(std::size_t alpha, std::size_t e, std::uint64_t limit) {
  std::uint64_t p = 1;
  for (std::size_t i = 0; i < e; ++i) {
    if (p > limit / alpha) throw ConfigError("action grid alpha^depth is too large");
    p *= alpha;
  }
  return p;
}

}  // namespace detail

/// ceil(log_alpha k), computed exactly in integers; 1 for k <= 1.
inline std::size_t tree_depth(std::size_t k, std::size_t alpha) {
  if (alpha < 2) throw ValidationError("alpha must be at least 2");
  if (k <= 1) return 1;
  std::size_t d = 0;
  for (std::uint64_t p = 1; p < k; p *= alpha) ++d;
  return d;
}

/// Action spacing at depth d: alpha^-d.
inline double tree_width(std::size_t depth, std::size_t alpha) {
  if (alpha < 2) throw ValidationError("alpha must be at least 2");
  return 1.0 / static_cast<double>(detail::checked_pow(alpha, depth, std::uint64_t{1} << 53));
}

/// Depth-switching test over the actions taken at the current depth.
/// Discrete: the last n actions are identical. Continuous: the last n-1
/// consecutive differences are each below `width`. Both need n actions.
inline bool termination_fired(std::span<const double> history, ActionSpace space, double width,
                              std::size_t n) {
  if (n == 0) throw ValidationError("deep switching number must be positive");
  if (history.size() < n) return false;
  const auto tail = history.subspan(history.size() - n);
  for (std::size_t i = 1; i < tail.size(); ++i) {
    if (space == ActionSpace::discrete) {
      if (tail[i] != tail[i - 1]) return false;
    } else if (!(std::abs(tail[i] - tail[i - 1]) < width)) {
      return false;
    }
  }
  return true;
}

struct TreeOptions {
  std::size_t alpha = 10;
  std::size_t deep_switching_number = 3;
  bool backtracking = true;
  // false: a single depth searching the full alpha^D grid at once.
  bool recursive = true;
  // Reward scale.
  double tau = 1.0;
  ActionSpace action_space = ActionSpace::discrete;
};

struct Observation {
  double state = 1.0;
  double reward = 0.0;
  // True when no edge was retained and the previous values were reused.
  bool repeated = false;
};

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Per-relation recursive threshold search. Depth d (1-based) explores an
/// interval of width alpha^-(d-1) centred on the threshold settled at depth
/// d-1, with action spacing alpha^-d; depth 1 spans [0, 1].
class RLTree {
 public:
  RLTree(std::size_t layer, std::size_t relation, std::size_t max_degree, TreeOptions options,
         std::unique_ptr<Policy> policy)
      : layer_(layer), relation_(relation), opts_(options), policy_(std::move(policy)) {
    if (!policy_) throw ValidationError("RL tree needs a policy");
    if (policy_->action_space() != opts_.action_space) {
      throw ConfigError("policy action space does not match the tree's action space");
    }
    if (opts_.deep_switching_number == 0) throw ConfigError("deep_switching_number must be positive");
    full_depth_ = tree_depth(max_degree, opts_.alpha);
    if (opts_.recursive) {
      max_depth_ = full_depth_;
    } else {
      max_depth_ = 1;
      flat_actions_ = detail::checked_pow(opts_.alpha, full_depth_, 10'000'000);
    }
    policy_->reset(num_actions());
  }

  std::size_t layer() const { return layer_; }
  std::size_t relation() const { return relation_; }
  std::size_t depth() const { return depth_; }
  std::size_t max_depth() const { return max_depth_; }
  bool converged() const { return converged_; }
  double threshold() const { return threshold_; }
  double center() const { return center_; }
  const TreeOptions& options() const { return opts_; }
  Policy& policy() { return *policy_; }

  std::size_t num_actions() const {
    return opts_.recursive ? opts_.alpha : static_cast<std::size_t>(flat_actions_);
  }

  /// Spacing between adjacent discrete actions at the current depth.
  double action_spacing() const {
    return opts_.recursive ? tree_width(depth_, opts_.alpha) : tree_width(full_depth_, opts_.alpha);
  }

  /// Width of the current search interval before clipping to [0, 1].
  double span() const { return opts_.recursive ? tree_width(depth_ - 1, opts_.alpha) : 1.0; }

  /// Current search interval, clipped to [0, 1].
  Interval interval() const {
    return {std::max(0.0, center_ - span() / 2.0), std::min(1.0, center_ + span() / 2.0)};
  }

  /// Threshold for discrete action i: the midpoint of the i-th cell.
  double discrete_threshold(std::size_t i) const {
    const double low = center_ - span() / 2.0;
    return std::clamp(low + (static_cast<double>(i) + 0.5) * action_spacing(), 0.0, 1.0);
  }

  /// Threshold for a continuous output in [-1, 1], mapped affinely onto the
  /// unclipped interval.
  double continuous_threshold(double value) const {
    const double low = center_ - span() / 2.0;
    return std::clamp(low + (value + 1.0) / 2.0 * span(), 0.0, 1.0);
  }

  /// The discrete action set at the current depth.
  std::vector<double> action_space() const {
    std::vector<double> out(num_actions());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = discrete_threshold(i);
    return out;
  }

  /// State and reward from this epoch's retained edges. With nothing
  /// retained the previous observation is repeated (s = 1, g = 0 at first).
  Observation observe(std::optional<double> avg_distance, std::optional<double> avg_similarity) {
    if (avg_distance && avg_similarity) {
      last_obs_ = Observation{*avg_distance, opts_.tau * *avg_similarity, false};
    } else {
      last_obs_.repeated = true;
    }
    return last_obs_;
  }

  /// Learns from the previous transition (skipped on a depth's first epoch)
  /// and emits the next threshold.
  double step(const Observation& obs) {
    if (converged_) throw StateError("step on a converged RL tree");
    if (has_prev_) policy_->update(prev_state_, obs.state, prev_action_, obs.reward);
    const PolicyAction a = policy_->predict(obs.state);
    double p = 0.0;
    bool ok = true;
    if (opts_.action_space == ActionSpace::discrete) {
      ok = a.index < num_actions();
      if (ok) p = discrete_threshold(a.index);
    } else {
      ok = std::isfinite(a.value);
      if (ok) p = continuous_threshold(std::clamp(a.value, -1.0, 1.0));
    }
    if (!ok) {
      p = std::clamp(center_, 0.0, 1.0);
      warnings_.push_back("policy produced an invalid action; using interval midpoint");
    }
    for (auto& w : policy_->drain_warnings()) warnings_.push_back(std::move(w));
    if (ok && opts_.action_space == ActionSpace::discrete) explored_.emplace(depth_, a.index);

    history_.push_back(p);
    while (history_.size() > opts_.deep_switching_number) history_.pop_front();
    prev_state_ = obs.state;
    prev_action_ = a;
    has_prev_ = true;
    ++epochs_at_depth_;
    threshold_ = p;
    return p;
  }

  bool check_termination() const {
    const std::vector<double> h(history_.begin(), history_.end());
    return termination_fired(h, opts_.action_space, action_spacing(), opts_.deep_switching_number);
  }

  /// Closes the current depth. The settled threshold is compared with the
  /// best (threshold, score) seen by this tree; with backtracking the next
  /// interval is centred on the better one. At the last depth the tree is
  /// frozen on that threshold instead.
  void descend(double white_box_score) {
    if (converged_) throw StateError("descend on a converged RL tree");
    if (!check_termination()) throw StateError("descend called before the termination condition fired");
    const double settled = threshold_;
    double next_center = settled;
    last_backtracked_ = false;
    if (!best_ || white_box_score >= best_->second) {
      best_ = {settled, white_box_score};
    } else if (opts_.backtracking) {
      next_center = best_->first;
      last_backtracked_ = true;
    }
    threshold_ = next_center;
    center_ = next_center;
    if (depth_ >= max_depth_) {
      converged_ = true;
      return;
    }
    ++depth_;
    policy_->reset(num_actions());
    history_.clear();
    has_prev_ = false;
    epochs_at_depth_ = 0;
  }

  bool last_backtracked() const { return last_backtracked_; }
  std::vector<double> history() const { return {history_.begin(), history_.end()}; }
  std::size_t epochs_at_depth() const { return epochs_at_depth_; }
  std::optional<std::pair<double, double>> best() const { return best_; }
  /// Distinct discrete actions emitted over the tree's lifetime.
  std::size_t explored_actions() const { return explored_.size(); }
  std::vector<std::string> drain_warnings() { return std::exchange(warnings_, {}); }

  /// Seeds the best-so-far record.
  void record_score(double threshold, double score) {
    if (!best_ || score >= best_->second) best_ = {threshold, score};
  }

 private:
  std::size_t layer_;
  std::size_t relation_;
  TreeOptions opts_;
  std::unique_ptr<Policy> policy_;
  std::size_t full_depth_ = 1;
  std::size_t max_depth_ = 1;
  std::uint64_t flat_actions_ = 0;
  std::size_t depth_ = 1;
  double center_ = 0.5;
  double threshold_ = 0.5;
  bool converged_ = false;

  Observation last_obs_{1.0, 0.0, true};
  bool has_prev_ = false;
  double prev_state_ = 0.0;
  PolicyAction prev_action_;
  std::deque<double> history_;
  std::size_t epochs_at_depth_ = 0;
  std::optional<std::pair<double, double>> best_;
  bool last_backtracked_ = false;
  std::set<std::pair<std::size_t, std::size_t>> explored_;
  std::vector<std::string> warnings_;
};

/// Mean distance and similarity over one (layer, relation)'s retained edges
/// in an epoch; both absent when nothing was retained.
struct TreeInput {
  std::optional<double> avg_distance;
  std::optional<double> avg_similarity;
};

/// What one tree did in one epoch.
struct TreeStep {
  std::size_t layer = 0;
  std::size_t relation = 0;
  std::size_t depth = 1;
  double threshold = 0.5;
  double state = 0.0;
  double reward = 0.0;
  bool terminated = false;
  bool backtracked = false;
  bool converged = false;
  bool skipped = false;
  std::vector<std::string> warnings;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(std::size_t layer, std::size_t relation)>;

/// One RL tree per (layer, relation).
class RLForest {
 public:
  RLForest(std::size_t layers, std::span<const std::size_t> max_degrees, const TreeOptions& options,
           const PolicyFactory& factory)
      : layers_(layers), relations_(max_degrees.size()) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t r = 0; r < relations_; ++r) {
        trees_.emplace_back(l, r, max_degrees[r], options, factory(l, r));
      }
    }
  }

  std::size_t layers() const { return layers_; }
  std::size_t relations() const { return relations_; }
  RLTree& tree(std::size_t l, std::size_t r) { return trees_.at(l * relations_ + r); }
  const RLTree& tree(std::size_t l, std::size_t r) const { return trees_.at(l * relations_ + r); }

  bool all_converged() const {
    return std::all_of(trees_.begin(), trees_.end(), [](const RLTree& t) { return t.converged(); });
  }

  ThresholdVector thresholds() const {
    ThresholdVector tv(layers_, relations_);
    for (const auto& t : trees_) tv.set(t.layer(), t.relation(), t.threshold());
    return tv;
  }

  /// One RSRL step for every non-converged tree. `inputs` is layer-major;
  /// `white_box_score` is used only by trees that switch depth this epoch.
  std::vector<TreeStep> epoch(std::span<const TreeInput> inputs, double white_box_score) {
    if (inputs.size() != trees_.size()) throw ShapeError("one observation per RL tree required");
    std::vector<TreeStep> steps;
    steps.reserve(trees_.size());
    for (std::size_t i = 0; i < trees_.size(); ++i) {
      auto& t = trees_[i];
      TreeStep s;
      s.layer = t.layer();
      s.relation = t.relation();
      if (t.converged()) {
        s.depth = t.depth();
        s.threshold = t.threshold();
        s.converged = true;
        s.skipped = true;
        steps.push_back(std::move(s));
        continue;
      }
      const auto obs = t.observe(inputs[i].avg_distance, inputs[i].avg_similarity);
      s.state = obs.state;
      s.reward = obs.reward;
      s.depth = t.depth();
      t.step(obs);
      s.threshold = t.threshold();
      if (t.check_termination()) {
        s.terminated = true;
        t.descend(white_box_score);
        s.backtracked = t.last_backtracked();
        s.threshold = t.threshold();
      }
      s.converged = t.converged();
      s.warnings = t.drain_warnings();
      steps.push_back(std::move(s));
    }
    return steps;
  }

 private:
  std::size_t layers_;
  std::size_t relations_;
  std::vector<RLTree> trees_;
};

}  // namespace mrgnn
