#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hdice/env/chain.hpp"
#include "hdice/env/delayed.hpp"
#include "hdice/env/gridworld.hpp"
#include "hdice/env/pointmass.hpp"

namespace hdice::env {

// ---------------------------------------------------------------------------
// Delayed rewards

DelayedRewardEnv::DelayedRewardEnv(std::unique_ptr<Environment> inner) : inner_(std::move(inner)) {
  if (!inner_) throw ContractError("delayed wrapper needs an environment");
}

DelayedRewardEnv::DelayedRewardEnv(const DelayedRewardEnv& other)
    : inner_(other.inner_->clone()), accrued_(other.accrued_) {}

Vector DelayedRewardEnv::reset(std::uint64_t seed) {
  accrued_ = 0.0;
  return inner_->reset(seed);
}

StepResult DelayedRewardEnv::step(const Vector& action) {
  StepResult r = inner_->step(action);
  accrued_ += r.reward;
  r.reward = r.done() ? accrued_ : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Point mass

PointMassEnv::PointMassEnv() {
  contract_.observation_dim = 1;
  contract_.action_space = ActionSpace::continuous(1, -1.0, 1.0);
  contract_.max_steps = kHorizon;
  // Worst per-step reward is -(1 + 0.8).
  contract_.return_range = ReturnRange{-(1.0 + kTarget) * kHorizon, 0.0};
  contract_.validate();
}

Vector PointMassEnv::reset(std::uint64_t /*seed*/) {
  x_ = 0.0;
  steps_ = 0;
  finished_ = false;
  return Vector::Constant(1, x_);
}

StepResult PointMassEnv::step(const Vector& action) {
  if (finished_) throw ContractError("cannot step a finished point-mass episode");
  require_dims(action.size() == 1, "point-mass action must be one-dimensional");
  ensure_finite(action, "point-mass action");
  const double a = std::clamp(action(0), -1.0, 1.0);
  x_ = std::clamp(x_ + kGain * a, -1.0, 1.0);
  ++steps_;
  StepResult r;
  r.observation = Vector::Constant(1, x_);
  r.reward = -std::abs(x_ - kTarget);
  r.truncated = steps_ >= kHorizon;
  finished_ = r.done();
  return r;
}

// ---------------------------------------------------------------------------
// Chain MDP

void ChainMdpSpec::validate() const {
  if (n_states < 1 || n_states > 6) throw ContractError("chain MDP needs 1..6 states");
  if (n_actions < 1 || n_actions > 3) throw ContractError("chain MDP needs 1..3 actions");
  if (horizon < 1 || horizon > 5) throw ContractError("chain MDP horizon must be 1..5");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("chain MDP gamma must lie in [0, 1]");
  const auto sa = static_cast<std::size_t>(n_states) * n_actions;
  if (transitions.size() != sa * n_states || rewards.size() != sa || initial.size() != static_cast<std::size_t>(n_states))
    throw DimensionError("chain MDP table sizes do not match state/action counts");
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int t = 0; t < n_states; ++t) {
        if (transition(s, a, t) < 0.0) throw ContractError("negative transition probability");
        sum += transition(s, a, t);
      }
      if (std::abs(sum - 1.0) > 1e-12) throw ContractError("transition rows must sum to 1");
    }
  double isum = 0.0;
  for (double p : initial) {
    if (p < 0.0) throw ContractError("negative initial probability");
    isum += p;
  }
  if (std::abs(isum - 1.0) > 1e-12) throw ContractError("initial distribution must sum to 1");
  for (double r : rewards) ensure_finite(r, "chain reward");
}

ReturnRange ChainMdpSpec::return_range() const {
  const auto [lo_it, hi_it] = std::minmax_element(rewards.begin(), rewards.end());
  ReturnRange r{std::min(0.0, *lo_it * horizon), std::max(0.0, *hi_it * horizon)};
  if (!(r.lo < r.hi)) r.hi = r.lo + 1.0;
  return r;
}

std::vector<EnumeratedPath> chain_enumerate(const ChainMdpSpec& spec, const Matrix& policy, std::size_t cap) {
  spec.validate();
  require_dims(policy.rows() == spec.n_states && policy.cols() == spec.n_actions, "policy table shape mismatch");
  for (int s = 0; s < spec.n_states; ++s) {
    if ((policy.row(s).array() < 0.0).any() || std::abs(policy.row(s).sum() - 1.0) > 1e-12)
      throw ContractError("policy rows must be distributions");
  }

  std::vector<EnumeratedPath> out;
  EnumeratedPath cur;
  // Depth-first over (state, action, next state) choices with positive probability.
  auto recurse = [&](auto&& self, int s, double prob) -> void {
    const int t = static_cast<int>(cur.actions.size());
    for (int a = 0; a < spec.n_actions; ++a) {
      const double pa = policy(s, a);
      if (pa <= 0.0) continue;
      cur.actions.push_back(a);
      cur.rewards.push_back(spec.reward(s, a));
      if (t + 1 == spec.horizon) {
        if (out.size() >= cap) throw SizeError("chain enumeration exceeds " + std::to_string(cap) + " paths");
        EnumeratedPath p = cur;
        p.probability = prob * pa;
        double g = 0.0;
        for (std::size_t k = p.rewards.size(); k-- > 0;) g = p.rewards[k] + spec.gamma * g;
        p.discounted_return = g;
        out.push_back(std::move(p));
      } else {
        for (int n = 0; n < spec.n_states; ++n) {
          const double pn = spec.transition(s, a, n);
          if (pn <= 0.0) continue;
          cur.states.push_back(n);
          self(self, n, prob * pa * pn);
          cur.states.pop_back();
        }
      }
      cur.actions.pop_back();
      cur.rewards.pop_back();
    }
  };
  for (int s0 = 0; s0 < spec.n_states; ++s0) {
    if (spec.initial[static_cast<std::size_t>(s0)] <= 0.0) continue;
    cur = {};
    cur.states.push_back(s0);
    recurse(recurse, s0, spec.initial[static_cast<std::size_t>(s0)]);
  }
  return out;
}

ChainMdpSpec random_chain(Rng& rng, int n_states, int n_actions, int horizon, double gamma) {
  static constexpr double kRewards[] = {-1.0, 0.0, 1.0, 2.0};
  ChainMdpSpec spec;
  spec.n_states = n_states;
  spec.n_actions = n_actions;
  spec.horizon = horizon;
  spec.gamma = gamma;
  spec.transitions.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  spec.rewards.resize(static_cast<std::size_t>(n_states) * n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      const auto base = (static_cast<std::size_t>(s) * n_actions + a) * n_states;
      const int first = static_cast<int>(rng.index(static_cast<std::size_t>(n_states)));
      const int second = static_cast<int>(rng.index(static_cast<std::size_t>(n_states)));
      const double p = 0.2 + 0.6 * rng.uniform();
      spec.transitions[base + first] += p;
      spec.transitions[base + second] += 1.0 - p;
      spec.rewards[static_cast<std::size_t>(s) * n_actions + a] = kRewards[rng.index(4)];
    }
  spec.initial.assign(static_cast<std::size_t>(n_states), 0.0);
  if (n_states > 1) {
    const double p = 0.3 + 0.4 * rng.uniform();
    spec.initial[0] = p;
    spec.initial[1] = 1.0 - p;
  } else {
    spec.initial[0] = 1.0;
  }
  spec.validate();
  return spec;
}

ChainMdpSpec random_positive_chain(Rng& rng, int n_states, int n_actions, int horizon, double gamma) {
  static constexpr double kRewards[] = {-1.0, 0.0, 1.0, 2.0};
  ChainMdpSpec spec;
  spec.n_states = n_states;
  spec.n_actions = n_actions;
  spec.horizon = horizon;
  spec.gamma = gamma;
  spec.transitions.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
  spec.rewards.resize(static_cast<std::size_t>(n_states) * n_actions);
  for (int s = 0; s < n_states; ++s) {
    const double r = kRewards[rng.index(4)];
    for (int a = 0; a < n_actions; ++a) {
      const auto base = (static_cast<std::size_t>(s) * n_actions + a) * n_states;
      double total = 0.0;
      for (int n = 0; n < n_states; ++n) total += spec.transitions[base + n] = 0.1 + rng.uniform();
      for (int n = 0; n < n_states; ++n) spec.transitions[base + n] /= total;
      spec.rewards[static_cast<std::size_t>(s) * n_actions + a] = r;
    }
  }
  spec.initial.assign(static_cast<std::size_t>(n_states), 1.0 / n_states);
  spec.validate();
  return spec;
}

Matrix random_policy(Rng& rng, int n_states, int n_actions, double min_prob) {
  if (min_prob * n_actions > 1.0) throw ContractError("min_prob too large for the action count");
  Matrix pi(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    Vector w(n_actions);
    for (int a = 0; a < n_actions; ++a) w(a) = 0.05 + rng.uniform();
    w /= w.sum();
    pi.row(s) = (min_prob + (1.0 - min_prob * n_actions) * w.array()).transpose();
    pi.row(s) /= pi.row(s).sum();
  }
  return pi;
}

ChainMdpSpec default_chain() {
  // Three states, two actions: action 1 pays now but drifts toward the costly state 2.
  ChainMdpSpec spec;
  spec.n_states = 3;
  spec.n_actions = 2;
  spec.horizon = 5;
  spec.gamma = 0.9;
  spec.transitions = {
      // s0
      0.8, 0.2, 0.0,  //
      0.0, 0.5, 0.5,  //
      // s1
      0.6, 0.4, 0.0,  //
      0.0, 0.3, 0.7,  //
      // s2
      0.5, 0.0, 0.5,  //
      0.0, 0.0, 1.0,
  };
  spec.rewards = {0.0, 1.0, 0.0, 2.0, -1.0, 0.0};
  spec.initial = {1.0, 0.0, 0.0};
  spec.validate();
  return spec;
}

ChainEnv::ChainEnv(ChainMdpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  contract_.observation_dim = spec_.n_states;
  contract_.action_space = ActionSpace::discrete(spec_.n_actions);
  contract_.max_steps = spec_.horizon;
  contract_.return_range = spec_.return_range();
  contract_.validate();
}

Vector ChainEnv::observe() const {
  Vector obs = Vector::Zero(spec_.n_states);
  obs(state_) = 1.0;
  return obs;
}

namespace {
int draw(Rng& rng, const double* probs, int n) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < n; ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last;
}
}  // namespace

Vector ChainEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  state_ = draw(rng_, spec_.initial.data(), spec_.n_states);
  steps_ = 0;
  finished_ = false;
  return observe();
}

StepResult ChainEnv::step(const Vector& action) {
  if (finished_) throw ContractError("cannot step a finished chain episode");
  require_dims(action.size() == 1, "chain action must be a single index");
  const int a = static_cast<int>(action(0));
  if (a < 0 || a >= spec_.n_actions || action(0) != a) throw ContractError("chain action out of range");
  StepResult r;
  r.reward = spec_.reward(state_, a);
  const auto base = (static_cast<std::size_t>(state_) * spec_.n_actions + a) * spec_.n_states;
  state_ = draw(rng_, spec_.transitions.data() + base, spec_.n_states);
  ++steps_;
  r.truncated = steps_ >= spec_.horizon;
  finished_ = r.truncated;
  r.observation = observe();
  return r;
}

// ---------------------------------------------------------------------------
// Factory

std::unique_ptr<Environment> make_environment(const std::string& id) {
  std::string base = id;
  bool delayed = false;
  constexpr std::string_view kSuffix = "+delayed";
  if (base.size() > kSuffix.size() && base.compare(base.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
    delayed = true;
    base.resize(base.size() - kSuffix.size());
  }
  std::unique_ptr<Environment> env;
  if (base == "gridworld-v1") {
    env = std::make_unique<GridWorldEnv>(gridworld_v1(), base);
  } else if (base == "gridworld-v2") {
    env = std::make_unique<GridWorldEnv>(gridworld_v2(), base);
  } else if (base.rfind("gridworld-file:", 0) == 0) {
    const std::string path = base.substr(15);
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open grid map '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    env = std::make_unique<GridWorldEnv>(parse_grid_map(ss.str()), base);
  } else if (base == "pointmass") {
    env = std::make_unique<PointMassEnv>();
  } else if (base == "chain") {
    env = std::make_unique<ChainEnv>(default_chain());
  } else {
    throw ContractError("unknown environment id '" + id + "'");
  }
  return delayed ? delay_rewards(std::move(env)) : std::move(env);
}

}  // namespace hdice::env
