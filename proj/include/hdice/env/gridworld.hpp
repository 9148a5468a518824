#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hdice/env/environment.hpp"

namespace hdice::env {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

enum class GridAction : int { Up = 0, Down = 1, Left = 2, Right = 3 };

std::string_view to_string(GridAction a);
/// Accepts "Up"/"Down"/"Left"/"Right" (any case) or an index 0..3.
GridAction parse_grid_action(std::string_view text);

struct GridSpec {
  int width = 0;
  int height = 0;
  Cell start;
  Cell goal;
  std::vector<Cell> diamonds;  // row-major order
  std::vector<Cell> fires;     // row-major order
  int max_steps = 50;
  double step_reward = -1.0;
  double diamond_reward = 20.0;
  double fire_reward = -100.0;

  bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  bool is_fire(Cell c) const;
  /// Index into `diamonds`, or -1.
  int diamond_index(Cell c) const;
  void validate() const;
  /// Safe superset of achievable returns.
  ReturnRange return_range() const;
};

struct GridState {
  Cell position;
  std::uint64_t remaining_diamonds = 0;  // bit i set = diamonds[i] not yet collected
  int steps_taken = 0;
  double accrued_reward = 0.0;
  bool finished = false;
};

/// Parses a rectangular map of S, G, D, F and '.' glyphs. Lines starting with
/// '#' are comments; an optional `max_steps=N` line may precede the grid.
GridSpec parse_grid_map(std::string_view text, int default_max_steps = 50);

GridSpec gridworld_v1();
GridSpec gridworld_v2();
std::string_view gridworld_v1_map();
std::string_view gridworld_v2_map();

GridState grid_reset(const GridSpec& spec);
std::pair<GridState, StepResult> grid_step(const GridSpec& spec, const GridState& state, GridAction action);
Vector grid_observe(const GridSpec& spec, const GridState& state);

class GridWorldEnv final : public Environment {
 public:
  GridWorldEnv(GridSpec spec, std::string id);

  const EnvContract& contract() const override { return contract_; }
  Vector reset(std::uint64_t seed) override;
  StepResult step(const Vector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<GridWorldEnv>(*this); }
  std::string id() const override { return id_; }

  const GridSpec& spec() const { return spec_; }
  const GridState& state() const { return state_; }

 private:
  GridSpec spec_;
  GridState state_;
  EnvContract contract_;
  std::string id_;
};

}  // namespace hdice::env
