#pragma once

#include <string>
#include <vector>

#include "hdice/harness/experiment.hpp"

namespace hdice::harness {

/// JSON snapshot of the trained models (weights, normalizers, psi).
std::string snapshot_json(const RunConfig& config, const Models& models);

struct Snapshot {
  std::string env;
  Method method = Method::HDice;
  Models models;
};

Snapshot load_snapshot(const std::string& json_text);
Snapshot read_snapshot(const std::string& path);

struct ProbeRow {
  int action = 0;
  std::string action_name;
  double z = 0.0;
  double pi = 0.0;      // pi(a|s)
  double h = 0.0;       // h(a|s,z)
  double direct = 0.0;  // pi / h
  double hdice = 0.0;   // phi * chi (constant psi) or phi (psi = chi)
  double phi = 0.0;
  double chi = 0.0;
};

/// One row per (action, return) pair, actions outermost.
std::vector<ProbeRow> probe_state(const Snapshot& snapshot, const Vector& observation, const std::vector<int>& actions,
                                  const std::vector<double>& returns);

/// Accepts {"observation": [...]} or, for grid worlds, {"cell": [row, col], "remaining": [1, 0, ...]}
/// (remaining defaults to all diamonds present).
Vector parse_probe_state(const std::string& json_text, const std::string& env_id);

/// Action tokens: indices, or up/down/left/right for grid worlds.
std::vector<int> parse_probe_actions(const std::string& csv, const env::ActionSpace& space);

std::string format_probe_table(const std::vector<ProbeRow>& rows);

}  // namespace hdice::harness
