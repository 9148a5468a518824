#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "hdice/core.hpp"

namespace hdice::env {

class ActionSpace {
 public:
  static ActionSpace discrete(Eigen::Index n) {
    if (n < 1) throw ContractError("discrete action space needs at least one action");
    ActionSpace s;
    s.discrete_ = true;
    s.n_ = n;
    return s;
  }

  static ActionSpace continuous(Eigen::Index dim, double low, double high) {
    if (dim < 1 || !(low < high)) throw ContractError("invalid continuous action space");
    ActionSpace s;
    s.discrete_ = false;
    s.n_ = dim;
    s.low_ = low;
    s.high_ = high;
    return s;
  }

  bool is_discrete() const { return discrete_; }
  /// Number of actions (discrete) or action dimension (continuous).
  Eigen::Index size() const { return n_; }
  /// Columns of an action batch: discrete actions are stored as one index column.
  Eigen::Index width() const { return discrete_ ? 1 : n_; }
  double low() const { return low_; }
  double high() const { return high_; }

  bool operator==(const ActionSpace&) const = default;

 private:
  ActionSpace() = default;
  bool discrete_ = true;
  Eigen::Index n_ = 1;
  double low_ = 0.0;
  double high_ = 0.0;
};

struct ReturnRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct EnvContract {
  Eigen::Index observation_dim = 0;
  ActionSpace action_space = ActionSpace::discrete(1);
  int max_steps = 1;
  std::optional<ReturnRange> return_range;

  void validate() const {
    if (observation_dim < 1) throw ContractError("observation_dim must be positive");
    if (max_steps < 1) throw ContractError("max_steps must be at least 1");
    if (return_range && !(return_range->lo < return_range->hi))
      throw ContractError("declared return range must satisfy lo < hi");
  }
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool terminated = false;  // goal reached
  bool truncated = false;   // step limit hit
  bool done() const { return terminated || truncated; }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvContract& contract() const = 0;
  /// Starts a new episode; the seed drives any randomness until the next reset.
  virtual Vector reset(std::uint64_t seed) = 0;
  /// Discrete actions are passed as a one-element vector holding the index.
  virtual StepResult step(const Vector& action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual std::string id() const = 0;
};

/// Environment ids: "gridworld-v1", "gridworld-v2", "gridworld-file:<path>",
/// "pointmass", "chain", each optionally suffixed with "+delayed".
std::unique_ptr<Environment> make_environment(const std::string& id);

}  // namespace hdice::env
