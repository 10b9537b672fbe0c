#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "mrgnn/policies.hpp"

namespace mrgnn::testing {

/// Emits actions from a script (the last entry repeats) and counts calls.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<std::size_t> script, std::size_t* predicts = nullptr,
                          std::size_t* updates = nullptr)
      : script_(std::move(script)), predicts_(predicts), updates_(updates) {}

  ActionSpace action_space() const override { return ActionSpace::discrete; }
  void reset(std::size_t) override { pos_ = 0; }
  PolicyAction predict(double) override {
    if (predicts_) ++*predicts_;
    const auto i = std::min(pos_++, script_.size() - 1);
    return PolicyAction{script_[i], 0.0, 0.0};
  }
  void update(double, double, const PolicyAction&, double) override {
    if (updates_) ++*updates_;
  }

 private:
  std::vector<std::size_t> script_;
  std::size_t pos_ = 0;
  std::size_t* predicts_;
  std::size_t* updates_;
};

/// Greedy bandit for stationary landscapes: tries each action once in index
/// order, then always plays the best one seen.
class GreedySweep final : public Policy {
 public:
  ActionSpace action_space() const override { return ActionSpace::discrete; }
  void reset(std::size_t n) override {
    values_.assign(n, -std::numeric_limits<double>::infinity());
    next_ = 0;
  }
  PolicyAction predict(double) override {
    if (next_ < values_.size()) return PolicyAction{next_++, 0.0, 0.0};
    std::size_t best = 0;
    for (std::size_t i = 1; i < values_.size(); ++i) {
      if (values_[i] > values_[best]) best = i;
    }
    return PolicyAction{best, 0.0, 0.0};
  }
  void update(double, double, const PolicyAction& a, double reward) override { values_[a.index] = reward; }

 private:
  std::vector<double> values_;
  std::size_t next_ = 0;
};

}  // namespace mrgnn::testing
