#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hdice/action_head.hpp"
#include "hdice/nn/mlp.hpp"
#include "hdice/rollout.hpp"

namespace hdice {

/// Policy network: a ReLU trunk with an actor head and, for vanilla PPO only,
/// a separate value head on the same trunk. Continuous policies carry a
/// state-independent log-std vector.
class ActorCritic final : public ActingPolicy {
 public:
  using Net = nn::Mlp<double>;

  struct Pass {
    Net::Cache trunk;
    Net::Cache actor;
    Net::Cache value;
    Matrix head;
    Vector values;  // empty without a value head
  };

  ActorCritic(Eigen::Index observation_dim, env::ActionSpace space, const std::vector<Eigen::Index>& hidden,
              bool with_value_head, std::uint64_t seed);
  ActorCritic(env::ActionSpace space, Net trunk, Net actor, std::optional<Net> value, RowVector log_std);

  const env::ActionSpace& action_space() const { return space_; }
  Eigen::Index observation_dim() const { return trunk_.input_dim(); }
  bool has_value_head() const { return value_.has_value(); }
  const Net& trunk() const { return trunk_; }
  const Net& actor() const { return actor_; }
  const std::optional<Net>& value() const { return value_; }
  RowVector log_std() const { return log_std_.row(0); }

  /// Order: trunk, actor head, log-std (continuous), value head.
  std::vector<Matrix*> parameters();

  Pass forward(const Matrix& observations) const;
  /// Gradients in parameters() order. `d_log_std` and `d_values` may be null.
  std::vector<Matrix> backward(const Pass& pass, const Matrix& d_head, const RowVector* d_log_std,
                               const Vector* d_values) const;

  Vector log_probs(const Matrix& observations, const Matrix& actions) const;
  Vector values(const Matrix& observations) const;
  /// Action probabilities for one observation (discrete spaces).
  RowVector probabilities(const Vector& observation) const;

  std::pair<Vector, double> act(const Vector& observation, Rng& rng) const override;

 private:
  env::ActionSpace space_;
  Net trunk_;
  Net actor_;
  std::optional<Net> value_;
  Matrix log_std_;  // 1 x dim; 1 x 0 for discrete spaces
};

}  // namespace hdice
