#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hdice/env/environment.hpp"

namespace hdice {

/// Anything that can pick an action for one observation and report its log-probability.
class ActingPolicy {
 public:
  virtual ~ActingPolicy() = default;
  virtual std::pair<Vector, double> act(const Vector& observation, Rng& rng) const = 0;
};

struct Trajectory {
  Matrix observations;  // one row per step (the state the action was taken in)
  Matrix actions;
  Vector log_probs;
  Vector rewards;
  bool terminated = false;
  bool truncated = false;

  Eigen::Index length() const { return rewards.size(); }
};

/// Steps of many trajectories stored back to back.
struct RolloutBatch {
  Matrix observations;
  Matrix actions;
  Vector log_probs;
  Vector rewards;
  Vector returns_to_go;       // z_t, filled by compute_returns
  Vector trajectory_returns;  // Z(tau) = z_0 per trajectory
  Vector episode_rewards;     // undiscounted reward sum per trajectory
  std::vector<Eigen::Index> offsets{0};  // trajectory i spans [offsets[i], offsets[i+1])
  std::vector<bool> terminated;
  std::vector<bool> truncated;

  Eigen::Index size() const { return rewards.size(); }
  std::size_t trajectory_count() const { return offsets.size() - 1; }
  /// Z(tau) of each step's trajectory.
  Vector step_trajectory_returns() const;
  /// 1 at the last step of every trajectory.
  Vector dones() const;
};

struct Budget {
  enum class Kind { Episodes, Steps };
  Kind kind = Kind::Episodes;
  long amount = 1;

  static Budget episodes(long n) { return {Kind::Episodes, n}; }
  static Budget steps(long n) { return {Kind::Steps, n}; }
};

RolloutBatch make_batch(std::span<const Trajectory> trajectories);

/// Plays one episode; the policy and the environment draw from streams derived from `seed`.
Trajectory run_episode(env::Environment& env, const ActingPolicy& policy, std::uint64_t seed);

/// Collects whole episodes until the budget is met. Episode i is seeded with
/// base_seed + i, so the batch does not depend on execution order.
RolloutBatch collect(const env::Environment& prototype, const ActingPolicy& policy, Budget budget,
                     std::uint64_t base_seed);

/// Backward recursion z_t = r_t + gamma z_{t+1} within each trajectory; truncation is treated as terminal.
void compute_returns(RolloutBatch& batch, double gamma);

RolloutBatch concat(std::span<const RolloutBatch> batches);

}  // namespace hdice
