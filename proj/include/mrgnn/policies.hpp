#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mrgnn/errors.hpp"
#include "mrgnn/tensor.hpp"

namespace mrgnn {

enum class ActionSpace { discrete, continuous };

enum class PolicyKind { actor_critic, q_learning, bmab };

/// A policy output. Discrete policies fill `index`; continuous ones fill
/// `value` in [-1, 1] and the pre-squash sample `raw`.
struct PolicyAction {
  std::size_t index = 0;
  double value = 0.0;
  double raw = 0.0;
};

struct PolicyConfig {
  double learning_rate = 0.001;
  double gamma = 0.95;
  // Q-learning exploration.
  double epsilon = 1.0;
  double epsilon_decay = 0.95;
  double epsilon_min = 0.01;
  std::size_t state_bins = 20;
  // Continuous actor: initial log standard deviation.
  double initial_log_std = 0.0;
  // Every parameter is clipped to [-param_clip, param_clip] after an update.
  double param_clip = 1e3;
};

/// Iterative function of one RL module: predicts an action from the scalar
/// state and learns from single transitions.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual ActionSpace action_space() const = 0;
  /// Fresh parameters for a new search depth with `num_actions` discrete
  /// actions (ignored by continuous policies).
  virtual void reset(std::size_t num_actions) = 0;
  virtual PolicyAction predict(double state) = 0;
  virtual void update(double prev_state, double state, const PolicyAction& prev_action, double reward) = 0;

  /// Training mode samples; evaluation mode acts greedily.
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  std::vector<std::string> drain_warnings() { return std::exchange(warnings_, {}); }

 protected:
  void warn(std::string msg) { warnings_.push_back(std::move(msg)); }

  bool training_ = true;

 private:
  std::vector<std::string> warnings_;
};

namespace detail {

using Features = Eigen::Vector3d;

inline Features state_features(double s) { return {s, s * s, 1.0}; }

template <class Derived>
void clip_params(Eigen::MatrixBase<Derived>& m, double bound) {
  m = m.cwiseMax(-bound).cwiseMin(bound);
}

}  // namespace detail

/// Softmax actor and linear critic over the features (s, s^2, 1), trained
/// by one-step actor-critic.
class DiscreteActorCritic final : public Policy {
 public:
  DiscreteActorCritic(PolicyConfig cfg, std::uint64_t seed, std::size_t num_actions = 1)
      : cfg_(cfg), rng_(seed) {
    reset(num_actions);
  }

  ActionSpace action_space() const override { return ActionSpace::discrete; }

  void reset(std::size_t num_actions) override {
    actor_ = Matrix::Zero(static_cast<Eigen::Index>(std::max<std::size_t>(1, num_actions)), 3);
    critic_.setZero();
  }

  std::size_t num_actions() const { return static_cast<std::size_t>(actor_.rows()); }

  Vector probabilities(double s) const {
    Vector logits = actor_ * detail::state_features(s);
    logits.array() -= logits.maxCoeff();
    Vector e = logits.array().exp();
    return e / e.sum();
  }

  double value(double s) const { return critic_.dot(detail::state_features(s)); }

  PolicyAction predict(double s) override {
    const Vector probs = probabilities(s);
    PolicyAction a;
    if (!training_) {
      Eigen::Index best = 0;
      probs.maxCoeff(&best);
      a.index = static_cast<std::size_t>(best);
      return a;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng_), acc = 0.0;
    a.index = static_cast<std::size_t>(probs.size() - 1);
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (x < acc) {
        a.index = static_cast<std::size_t>(i);
        break;
      }
    }
    return a;
  }

  void update(double prev_state, double state, const PolicyAction& prev_action, double reward) override {
    const double delta = reward + cfg_.gamma * value(state) - value(prev_state);
    if (!std::isfinite(delta)) {
      warn("actor-critic: non-finite TD error, update skipped");
      return;
    }
    const auto phi = detail::state_features(prev_state);
    const Vector probs = probabilities(prev_state);
    const double step = cfg_.learning_rate * delta;
    critic_ += step * phi;
    for (Eigen::Index j = 0; j < actor_.rows(); ++j) {
      const double indicator = static_cast<std::size_t>(j) == prev_action.index ? 1.0 : 0.0;
      actor_.row(j) += step * (indicator - probs[j]) * phi.transpose();
    }
    detail::clip_params(actor_, cfg_.param_clip);
    detail::clip_params(critic_, cfg_.param_clip);
  }

  Matrix& actor() { return actor_; }
  const Matrix& actor() const { return actor_; }
  detail::Features& critic() { return critic_; }
  const detail::Features& critic() const { return critic_; }

 private:
  PolicyConfig cfg_;
  Rng rng_;
  Matrix actor_;
  detail::Features critic_ = detail::Features::Zero();
};

/// Gaussian actor squashed by tanh, with a linear critic. Log-std is
/// clamped to [-5, 2].
class ContinuousActorCritic final : public Policy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  ContinuousActorCritic(PolicyConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) { reset(0); }

  ActionSpace action_space() const override { return ActionSpace::continuous; }

  void reset(std::size_t) override {
    mean_w_.setZero();
    log_std_w_ = detail::Features(0.0, 0.0, cfg_.initial_log_std);
    critic_.setZero();
  }

  double mean(double s) const { return mean_w_.dot(detail::state_features(s)); }
  double raw_log_std(double s) const { return log_std_w_.dot(detail::state_features(s)); }
  double log_std(double s) const { return std::clamp(raw_log_std(s), kMinLogStd, kMaxLogStd); }
  double value(double s) const { return critic_.dot(detail::state_features(s)); }

  PolicyAction predict(double s) override {
    PolicyAction a;
    a.raw = mean(s);
    if (training_) {
      std::normal_distribution<double> n(0.0, 1.0);
      a.raw += std::exp(log_std(s)) * n(rng_);
    }
    a.value = std::tanh(a.raw);
    return a;
  }

  void update(double prev_state, double state, const PolicyAction& prev_action, double reward) override {
    const double delta = reward + cfg_.gamma * value(state) - value(prev_state);
    if (!std::isfinite(delta) || !std::isfinite(prev_action.raw)) {
      warn("continuous actor-critic: non-finite TD error, update skipped");
      return;
    }
    const auto phi = detail::state_features(prev_state);
    const double mu = mean(prev_state);
    const double raw_ls = raw_log_std(prev_state);
    const double ls = std::clamp(raw_ls, kMinLogStd, kMaxLogStd);
    const double var = std::exp(2.0 * ls);
    const double z = prev_action.raw - mu;
    const double step = cfg_.learning_rate * delta;
    critic_ += step * phi;
    mean_w_ += step * (z / var) * phi;
    if (raw_ls > kMinLogStd && raw_ls < kMaxLogStd) log_std_w_ += step * (z * z / var - 1.0) * phi;
    detail::clip_params(mean_w_, cfg_.param_clip);
    detail::clip_params(log_std_w_, cfg_.param_clip);
    detail::clip_params(critic_, cfg_.param_clip);
  }

  detail::Features& mean_weights() { return mean_w_; }
  detail::Features& log_std_weights() { return log_std_w_; }

 private:
  PolicyConfig cfg_;
  Rng rng_;
  detail::Features mean_w_ = detail::Features::Zero();
  detail::Features log_std_w_ = detail::Features::Zero();
  detail::Features critic_ = detail::Features::Zero();
};

/// Tabular Q-learning over a binned scalar state with epsilon-greedy
/// exploration. The binning range [0, s_max] grows with observed states.
class QLearner final : public Policy {
 public:
  QLearner(PolicyConfig cfg, std::uint64_t seed, std::size_t num_actions = 1)
      : cfg_(cfg), rng_(seed) {
    if (cfg_.state_bins == 0) throw ValidationError("Q-learner needs at least one state bin");
    reset(num_actions);
  }

  ActionSpace action_space() const override { return ActionSpace::discrete; }

  void reset(std::size_t num_actions) override {
    q_ = Matrix::Zero(static_cast<Eigen::Index>(cfg_.state_bins),
                      static_cast<Eigen::Index>(std::max<std::size_t>(1, num_actions)));
    epsilon_ = std::clamp(cfg_.epsilon, cfg_.epsilon_min, 1.0);
    s_max_ = 1.0;
  }

  std::size_t bin(double s) const {
    if (!(s > 0.0)) return 0;
    const auto b = static_cast<std::size_t>(s / s_max_ * static_cast<double>(cfg_.state_bins));
    return std::min(b, cfg_.state_bins - 1);
  }

  std::size_t greedy(double s) const {
    Eigen::Index best = 0;
    q_.row(static_cast<Eigen::Index>(bin(s))).maxCoeff(&best);
    return static_cast<std::size_t>(best);
  }

  PolicyAction predict(double s) override {
    PolicyAction a;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (training_ && u(rng_) < epsilon_) {
      std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(q_.cols()) - 1);
      a.index = pick(rng_);
    } else {
      a.index = greedy(s);
    }
    return a;
  }

  void update(double prev_state, double state, const PolicyAction& prev_action, double reward) override {
    if (!std::isfinite(prev_state) || !std::isfinite(state) || !std::isfinite(reward)) {
      warn("q-learning: non-finite transition, update skipped");
      return;
    }
    s_max_ = std::max({s_max_, prev_state, state});
    const auto b = static_cast<Eigen::Index>(bin(prev_state));
    const auto b_next = static_cast<Eigen::Index>(bin(state));
    const auto a = static_cast<Eigen::Index>(prev_action.index);
    const double target = reward + cfg_.gamma * q_.row(b_next).maxCoeff();
    q_(b, a) += cfg_.learning_rate * (target - q_(b, a));
    q_(b, a) = std::clamp(q_(b, a), -cfg_.param_clip, cfg_.param_clip);
    epsilon_ = std::max(cfg_.epsilon_min, epsilon_ * cfg_.epsilon_decay);
  }

  double epsilon() const { return epsilon_; }
  void set_epsilon(double e) { epsilon_ = e; }
  const Matrix& table() const { return q_; }

 private:
  PolicyConfig cfg_;
  Rng rng_;
  Matrix q_;
  double epsilon_ = 1.0;
  double s_max_ = 1.0;
};

/// Fixed hill-climbing strategy over the discrete action grid. Starts at
/// the middle action and steps one grid cell per update: keeps direction
/// while the reward does not drop, otherwise turns back. Once two drops in
/// opposite directions return to the same cell, that cell is held.
class Bmab final : public Policy {
 public:
  explicit Bmab(std::size_t num_actions = 1) { reset(num_actions); }

  ActionSpace action_space() const override { return ActionSpace::discrete; }

  void reset(std::size_t num_actions) override {
    num_actions_ = std::max<std::size_t>(1, num_actions);
    current_ = (num_actions_ - 1) / 2;
    direction_ = +1;
    last_reward_.reset();
    last_return_.reset();
    locked_ = false;
  }

  PolicyAction predict(double) override { return PolicyAction{current_, 0.0, 0.0}; }

  void update(double, double, const PolicyAction& prev_action, double reward) override {
    const auto a = static_cast<long long>(std::min(prev_action.index, num_actions_ - 1));
    long long next = a;
    if (!locked_) {
      if (!last_reward_ || reward >= *last_reward_) {
        next = a + direction_;
      } else {
        direction_ = -direction_;
        next = a + direction_;
        const auto back = static_cast<std::size_t>(std::clamp<long long>(next, 0, static_cast<long long>(num_actions_) - 1));
        if (last_return_ && *last_return_ == back) locked_ = true;
        last_return_ = back;
      }
    }
    last_reward_ = reward;
    current_ = static_cast<std::size_t>(std::clamp<long long>(next, 0, static_cast<long long>(num_actions_) - 1));
  }

  int direction() const { return direction_; }
  bool locked() const { return locked_; }

 private:
  std::size_t num_actions_ = 1;
  std::size_t current_ = 0;
  int direction_ = +1;
  std::optional<double> last_reward_;
  std::optional<std::size_t> last_return_;
  bool locked_ = false;
};

inline std::unique_ptr<Policy> make_policy(PolicyKind kind, ActionSpace space, const PolicyConfig& cfg,
                                           std::uint64_t seed) {
  if (space == ActionSpace::continuous) {
    if (kind != PolicyKind::actor_critic) {
      throw ConfigError("continuous action space requires the actor-critic policy");
    }
    return std::make_unique<ContinuousActorCritic>(cfg, seed);
  }
  switch (kind) {
    case PolicyKind::actor_critic: return std::make_unique<DiscreteActorCritic>(cfg, seed);
    case PolicyKind::q_learning: return std::make_unique<QLearner>(cfg, seed);
    case PolicyKind::bmab: return std::make_unique<Bmab>();
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace mrgnn
