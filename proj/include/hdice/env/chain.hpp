#pragma once

#include <cstddef>
#include <vector>

#include "hdice/env/environment.hpp"

namespace hdice::env {

/// Small finite-horizon tabular MDP whose trajectories can be enumerated.
/// Rewards are a deterministic function of (state, action).
struct ChainMdpSpec {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transitions;  // [s][a][s'] flattened
  std::vector<double> rewards;      // [s][a] flattened
  std::vector<double> initial;      // [s]
  int horizon = 1;
  double gamma = 1.0;

  double transition(int s, int a, int next) const {
    return transitions[(static_cast<std::size_t>(s) * n_actions + a) * n_states + next];
  }
  double reward(int s, int a) const { return rewards[static_cast<std::size_t>(s) * n_actions + a]; }

  void validate() const;
  ReturnRange return_range() const;
};

inline constexpr std::size_t kMaxEnumeratedPaths = 100000;

struct EnumeratedPath {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  double probability = 0.0;
  double discounted_return = 0.0;
};

/// All positive-probability trajectories of length `horizon` under a tabular
/// policy (rows = states, columns = actions). Throws SizeError past `cap` paths.
std::vector<EnumeratedPath> chain_enumerate(const ChainMdpSpec& spec, const Matrix& policy,
                                            std::size_t cap = kMaxEnumeratedPaths);

/// Random instance with sparse transitions (at most two successors per pair)
/// and rewards drawn from a small set so return supports stay finite.
ChainMdpSpec random_chain(Rng& rng, int n_states, int n_actions, int horizon, double gamma);

/// Random instance where every action at a state reaches the same set of
/// returns: rewards depend on the state only and every transition row has
/// full support. The hindsight probabilities are then positive wherever the
/// policy is, while still differing from the policy.
ChainMdpSpec random_positive_chain(Rng& rng, int n_states, int n_actions, int horizon, double gamma);

/// Random tabular policy whose probabilities are bounded away from zero.
Matrix random_policy(Rng& rng, int n_states, int n_actions, double min_prob = 0.1);

/// The fixed instance behind the "chain" environment id.
ChainMdpSpec default_chain();

class ChainEnv final : public Environment {
 public:
  explicit ChainEnv(ChainMdpSpec spec);

  const EnvContract& contract() const override { return contract_; }
  Vector reset(std::uint64_t seed) override;
  StepResult step(const Vector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ChainEnv>(*this); }
  std::string id() const override { return "chain"; }

  const ChainMdpSpec& spec() const { return spec_; }
  int state() const { return state_; }

 private:
  Vector observe() const;

  ChainMdpSpec spec_;
  EnvContract contract_;
  Rng rng_;
  int state_ = 0;
  int steps_ = 0;
  bool finished_ = true;
};

}  // namespace hdice::env
