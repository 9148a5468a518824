#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hdice/dice.hpp"

namespace hdice::harness {

enum class Method { Ppo, PpoHca, PpoHcaClip, HDice };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);
Estimator estimator_for(Method m);
inline bool uses_hindsight(Method m) { return m != Method::Ppo; }

struct RunConfig {
  std::string env = "gridworld-v1+delayed";
  Method method = Method::HDice;
  std::uint64_t seed = 0;
  long iterations = 100;
  long eval_every = 1;
  int eval_episodes = 10;
  Budget budget = Budget::episodes(50);
  std::vector<Eigen::Index> policy_hidden{64, 64};
  PpoConfig ppo;
  bool log_wall_time = false;
  std::string out_dir = "runs";
  std::string run_name;  // empty: derived from method and seed

  // Auxiliary models; meaningful only for the hindsight methods.
  AuxTrainConfig hindsight;
  int aux_schedule = 1;
  ConditionOn condition_on = ConditionOn::ReturnToGo;
  double ratio_cap = kRatioCap;

  // H-DICE only.
  AuxTrainConfig return_model;
  AuxTrainConfig dice;
  bool normalize_return_targets = true;
  double dice_c = 1.0;
  PsiSampler::Kind psi = PsiSampler::Kind::Uniform;
  std::optional<double> psi_lo;  // default: the environment's declared return range
  std::optional<double> psi_hi;

  std::string name() const;
  void validate() const;
};

/// Defaults for an environment id and method, per the published hyperparameter tables.
RunConfig default_config(const std::string& env, Method method);

/// Parses `key = value` lines (# starts a comment).
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

/// Resolves a configuration: env and method are read first, the matching
/// defaults are loaded, then every entry is applied in order. Keys that do not
/// apply to the method are rejected.
RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& entries);
RunConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides);

/// Every key that applies to the method, in a fixed order, with values that
/// parse back to the same bits.
std::string echo_config(const RunConfig& config);

/// Keys accepted for a method.
std::vector<std::string> config_keys(Method method);

/// Shortest decimal text that reads back to exactly `x`.
std::string format_double(double x);

}  // namespace hdice::harness
