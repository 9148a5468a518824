#pragma once

#include <memory>

#include "hdice/env/environment.hpp"

namespace hdice::env {

/// Emits zero reward on every non-final step and the undiscounted sum of all
/// inner rewards on the step that ends the episode.
class DelayedRewardEnv final : public Environment {
 public:
  explicit DelayedRewardEnv(std::unique_ptr<Environment> inner);
  DelayedRewardEnv(const DelayedRewardEnv& other);

  const EnvContract& contract() const override { return inner_->contract(); }
  Vector reset(std::uint64_t seed) override;
  StepResult step(const Vector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<DelayedRewardEnv>(*this); }
  std::string id() const override { return inner_->id() + "+delayed"; }

  const Environment& inner() const { return *inner_; }

 private:
  std::unique_ptr<Environment> inner_;
  double accrued_ = 0.0;
};

inline std::unique_ptr<Environment> delay_rewards(std::unique_ptr<Environment> env) {
  return std::make_unique<DelayedRewardEnv>(std::move(env));
}

}  // namespace hdice::env
