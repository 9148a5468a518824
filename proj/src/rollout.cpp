#include "hdice/rollout.hpp"

namespace hdice {

Vector RolloutBatch::step_trajectory_returns() const {
  Vector out(size());
  for (std::size_t i = 0; i < trajectory_count(); ++i)
    out.segment(offsets[i], offsets[i + 1] - offsets[i]).setConstant(trajectory_returns(static_cast<Eigen::Index>(i)));
  return out;
}

Vector RolloutBatch::dones() const {
  Vector d = Vector::Zero(size());
  for (std::size_t i = 0; i < trajectory_count(); ++i)
    if (offsets[i + 1] > offsets[i]) d(offsets[i + 1] - 1) = 1.0;
  return d;
}

RolloutBatch make_batch(std::span<const Trajectory> trajectories) {
  RolloutBatch b;
  Eigen::Index total = 0;
  for (const auto& t : trajectories) total += t.length();
  if (trajectories.empty()) return b;
  const auto obs_dim = trajectories.front().observations.cols();
  const auto act_dim = trajectories.front().actions.cols();
  b.observations.resize(total, obs_dim);
  b.actions.resize(total, act_dim);
  b.log_probs.resize(total);
  b.rewards.resize(total);
  b.returns_to_go = Vector::Zero(total);
  b.trajectory_returns = Vector::Zero(static_cast<Eigen::Index>(trajectories.size()));
  b.episode_rewards.resize(static_cast<Eigen::Index>(trajectories.size()));
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    const auto n = t.length();
    require_dims(t.observations.rows() == n && t.actions.rows() == n && t.log_probs.size() == n,
                 "trajectory fields have unequal lengths");
    require_dims(t.observations.cols() == obs_dim && t.actions.cols() == act_dim,
                 "trajectories disagree on observation/action width");
    b.observations.middleRows(at, n) = t.observations;
    b.actions.middleRows(at, n) = t.actions;
    b.log_probs.segment(at, n) = t.log_probs;
    b.rewards.segment(at, n) = t.rewards;
    b.episode_rewards(static_cast<Eigen::Index>(i)) = t.rewards.sum();
    at += n;
    b.offsets.push_back(at);
    b.terminated.push_back(t.terminated);
    b.truncated.push_back(t.truncated);
  }
  return b;
}

Trajectory run_episode(env::Environment& env, const ActingPolicy& policy, std::uint64_t seed) {
  const auto& contract = env.contract();
  Rng rng(mix_seed(seed, 0));
  Vector obs = env.reset(mix_seed(seed, 1));
  std::vector<Vector> observations, actions;
  std::vector<double> log_probs, rewards;
  Trajectory traj;
  for (int step = 0; step < contract.max_steps; ++step) {
    auto [action, log_prob] = policy.act(obs, rng);
    const env::StepResult r = env.step(action);
    observations.push_back(std::move(obs));
    actions.push_back(std::move(action));
    log_probs.push_back(log_prob);
    rewards.push_back(r.reward);
    obs = r.observation;
    if (r.done()) {
      traj.terminated = r.terminated;
      traj.truncated = r.truncated;
      break;
    }
  }
  if (!traj.terminated && !traj.truncated) throw ContractError("environment ran past its max_steps");
  const auto n = static_cast<Eigen::Index>(rewards.size());
  traj.observations.resize(n, contract.observation_dim);
  traj.actions.resize(n, contract.action_space.width());
  traj.log_probs.resize(n);
  traj.rewards.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    traj.observations.row(t) = observations[static_cast<std::size_t>(t)].transpose();
    traj.actions.row(t) = actions[static_cast<std::size_t>(t)].transpose();
    traj.log_probs(t) = log_probs[static_cast<std::size_t>(t)];
    traj.rewards(t) = rewards[static_cast<std::size_t>(t)];
  }
  return traj;
}

RolloutBatch collect(const env::Environment& prototype, const ActingPolicy& policy, Budget budget,
                     std::uint64_t base_seed) {
  if (budget.amount < 1) throw ContractError("rollout budget must be positive");
  auto env = prototype.clone();
  std::vector<Trajectory> trajectories;
  long steps = 0;
  for (std::uint64_t i = 0;; ++i) {
    if (budget.kind == Budget::Kind::Episodes && static_cast<long>(trajectories.size()) >= budget.amount) break;
    if (budget.kind == Budget::Kind::Steps && steps >= budget.amount) break;
    trajectories.push_back(run_episode(*env, policy, base_seed + i));
    steps += trajectories.back().length();
  }
  return make_batch(trajectories);
}

void compute_returns(RolloutBatch& batch, double gamma) {
  batch.returns_to_go.resize(batch.size());
  batch.trajectory_returns.resize(static_cast<Eigen::Index>(batch.trajectory_count()));
  for (std::size_t i = 0; i < batch.trajectory_count(); ++i) {
    double z = 0.0;
    for (Eigen::Index t = batch.offsets[i + 1]; t-- > batch.offsets[i];) {
      z = batch.rewards(t) + gamma * z;
      batch.returns_to_go(t) = z;
    }
    batch.trajectory_returns(static_cast<Eigen::Index>(i)) = z;
  }
}

RolloutBatch concat(std::span<const RolloutBatch> batches) {
  RolloutBatch out;
  Eigen::Index steps = 0, trajs = 0;
  for (const auto& b : batches) {
    steps += b.size();
    trajs += static_cast<Eigen::Index>(b.trajectory_count());
  }
  if (batches.empty()) return out;
  const auto& first = batches.front();
  out.observations.resize(steps, first.observations.cols());
  out.actions.resize(steps, first.actions.cols());
  out.log_probs.resize(steps);
  out.rewards.resize(steps);
  out.returns_to_go.resize(steps);
  out.trajectory_returns.resize(trajs);
  out.episode_rewards.resize(trajs);
  Eigen::Index at = 0, tat = 0;
  for (const auto& b : batches) {
    require_dims(b.observations.cols() == first.observations.cols() && b.actions.cols() == first.actions.cols(),
                 "cannot concatenate batches of different widths");
    const auto n = b.size();
    const auto k = static_cast<Eigen::Index>(b.trajectory_count());
    out.observations.middleRows(at, n) = b.observations;
    out.actions.middleRows(at, n) = b.actions;
    out.log_probs.segment(at, n) = b.log_probs;
    out.rewards.segment(at, n) = b.rewards;
    out.returns_to_go.segment(at, n) = b.returns_to_go;
    out.trajectory_returns.segment(tat, k) = b.trajectory_returns;
    out.episode_rewards.segment(tat, k) = b.episode_rewards;
    for (std::size_t i = 1; i < b.offsets.size(); ++i) out.offsets.push_back(at + b.offsets[i]);
    out.terminated.insert(out.terminated.end(), b.terminated.begin(), b.terminated.end());
    out.truncated.insert(out.truncated.end(), b.truncated.begin(), b.truncated.end());
    at += n;
    tat += k;
  }
  return out;
}

}  // namespace hdice
