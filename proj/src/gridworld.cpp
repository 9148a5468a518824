#include "hdice/env/gridworld.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace hdice::env {

namespace {

// Approximations of the published layouts: diamonds sit next to fires so the
// path that collects them is also the one that risks the penalties. v1 is
// small enough that a uniform policy sometimes finishes with a positive return;
// its best route only moves right and down, and every leftward step off that
// route lands in fire.
constexpr std::string_view kGridworldV1 =
    "max_steps=50\n"
    "SDDF\n"
    ".FDD\n"
    "F..G\n";

constexpr std::string_view kGridworldV2 =
    "max_steps=100\n"
    "S...F.....\n"
    ".F.D..F.D.\n"
    "..FDF...F.\n"
    "...D..D...\n"
    ".F...FDF..\n"
    "...F......\n"
    ".D.F..F.D.\n"
    "..D...FDF.\n"
    ".F...F...G\n";

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

ParseError parse_error(int line, int col, const std::string& msg) {
  return ParseError("grid map line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
}

}  // namespace

std::string_view to_string(GridAction a) {
  switch (a) {
    case GridAction::Up:
      return "Up";
    case GridAction::Down:
      return "Down";
    case GridAction::Left:
      return "Left";
    case GridAction::Right:
      return "Right";
  }
  return "?";
}

GridAction parse_grid_action(std::string_view text) {
  const auto t = lower(text);
  if (t == "up") return GridAction::Up;
  if (t == "down") return GridAction::Down;
  if (t == "left") return GridAction::Left;
  if (t == "right") return GridAction::Right;
  int idx = -1;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), idx);
  if (ec == std::errc() && p == text.data() + text.size() && idx >= 0 && idx < 4) return static_cast<GridAction>(idx);
  throw ParseError("unknown grid action '" + std::string(text) + "'");
}

bool GridSpec::is_fire(Cell c) const { return std::find(fires.begin(), fires.end(), c) != fires.end(); }

int GridSpec::diamond_index(Cell c) const {
  auto it = std::find(diamonds.begin(), diamonds.end(), c);
  return it == diamonds.end() ? -1 : static_cast<int>(it - diamonds.begin());
}

void GridSpec::validate() const {
  if (width < 1 || height < 1) throw ContractError("grid must be non-empty");
  if (max_steps < 1) throw ContractError("grid max_steps must be at least 1");
  if (!in_bounds(start) || !in_bounds(goal)) throw ContractError("start/goal out of bounds");
  if (diamonds.size() > 64) throw ContractError("at most 64 diamonds are supported");
  for (const auto& d : diamonds) {
    if (!in_bounds(d)) throw ContractError("diamond out of bounds");
    if (is_fire(d)) throw ContractError("a cell cannot hold both a diamond and a fire");
  }
  for (const auto& f : fires)
    if (!in_bounds(f)) throw ContractError("fire out of bounds");
  if (is_fire(start)) throw ContractError("start cell cannot be a fire");
}

ReturnRange GridSpec::return_range() const {
  const double lo = (fire_reward + step_reward) * max_steps;
  double hi = diamond_reward * static_cast<double>(diamonds.size());
  if (!(lo < hi)) hi = lo + 1.0;
  return {lo, hi};
}

GridSpec parse_grid_map(std::string_view text, int default_max_steps) {
  GridSpec spec;
  spec.max_steps = default_max_steps;
  bool have_start = false, have_goal = false;
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  int first_grid_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.rfind("max_steps=", 0) == 0) {
      if (!rows.empty()) throw parse_error(line_no, 1, "max_steps must precede the grid");
      const auto value = std::string_view(line).substr(10);
      int n = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc() || p != value.data() + value.size() || n < 1)
        throw parse_error(line_no, 11, "invalid max_steps value");
      spec.max_steps = n;
      continue;
    }
    if (rows.empty()) first_grid_line = line_no;
    if (!rows.empty() && line.size() != rows.front().size())
      throw parse_error(line_no, static_cast<int>(std::min(line.size(), rows.front().size())) + 1,
                        "ragged row: expected " + std::to_string(rows.front().size()) + " cells, got " +
                            std::to_string(line.size()));
    const int r = static_cast<int>(rows.size());
    for (std::size_t c = 0; c < line.size(); ++c) {
      const Cell cell{r, static_cast<int>(c)};
      switch (line[c]) {
        case '.':
          break;
        case 'S':
          if (have_start) throw parse_error(line_no, static_cast<int>(c) + 1, "duplicate start S");
          spec.start = cell;
          have_start = true;
          break;
        case 'G':
          if (have_goal) throw parse_error(line_no, static_cast<int>(c) + 1, "duplicate goal G");
          spec.goal = cell;
          have_goal = true;
          break;
        case 'D':
          spec.diamonds.push_back(cell);
          break;
        case 'F':
          spec.fires.push_back(cell);
          break;
        default:
          throw parse_error(line_no, static_cast<int>(c) + 1, std::string("unknown glyph '") + line[c] + "'");
      }
    }
    rows.push_back(line);
  }
  if (rows.empty()) throw parse_error(line_no + 1, 1, "empty grid");
  if (!have_start) throw parse_error(first_grid_line, 1, "missing start S");
  if (!have_goal) throw parse_error(first_grid_line, 1, "missing goal G");
  spec.height = static_cast<int>(rows.size());
  spec.width = static_cast<int>(rows.front().size());
  spec.validate();
  return spec;
}

std::string_view gridworld_v1_map() { return kGridworldV1; }
std::string_view gridworld_v2_map() { return kGridworldV2; }
GridSpec gridworld_v1() { return parse_grid_map(kGridworldV1); }
GridSpec gridworld_v2() { return parse_grid_map(kGridworldV2); }

GridState grid_reset(const GridSpec& spec) {
  GridState s;
  s.position = spec.start;
  const auto n = spec.diamonds.size();
  s.remaining_diamonds = n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
  return s;
}

std::pair<GridState, StepResult> grid_step(const GridSpec& spec, const GridState& state, GridAction action) {
  if (state.finished) throw ContractError("cannot step a finished grid episode");
  GridState next = state;
  Cell dest = state.position;
  switch (action) {
    case GridAction::Up:
      dest.row -= 1;
      break;
    case GridAction::Down:
      dest.row += 1;
      break;
    case GridAction::Left:
      dest.col -= 1;
      break;
    case GridAction::Right:
      dest.col += 1;
      break;
  }
  dest.row = std::clamp(dest.row, 0, spec.height - 1);
  dest.col = std::clamp(dest.col, 0, spec.width - 1);
  next.position = dest;

  double reward = spec.step_reward;
  const int d = spec.diamond_index(dest);
  if (d >= 0 && (next.remaining_diamonds >> d) & 1U) {
    reward += spec.diamond_reward;
    next.remaining_diamonds &= ~(std::uint64_t{1} << d);
  }
  if (spec.is_fire(dest)) reward += spec.fire_reward;

  next.steps_taken += 1;
  next.accrued_reward += reward;
  StepResult result;
  result.reward = reward;
  result.terminated = dest == spec.goal;
  result.truncated = !result.terminated && next.steps_taken >= spec.max_steps;
  next.finished = result.done();
  result.observation = grid_observe(spec, next);
  return {next, result};
}

Vector grid_observe(const GridSpec& spec, const GridState& state) {
  Vector obs(2 + static_cast<Eigen::Index>(spec.diamonds.size()));
  obs(0) = static_cast<double>(state.position.col) / spec.width;
  obs(1) = static_cast<double>(state.position.row) / spec.height;
  for (std::size_t i = 0; i < spec.diamonds.size(); ++i)
    obs(2 + static_cast<Eigen::Index>(i)) = ((state.remaining_diamonds >> i) & 1U) ? 1.0 : 0.0;
  return obs;
}

GridWorldEnv::GridWorldEnv(GridSpec spec, std::string id) : spec_(std::move(spec)), id_(std::move(id)) {
  spec_.validate();
  contract_.observation_dim = 2 + static_cast<Eigen::Index>(spec_.diamonds.size());
  contract_.action_space = ActionSpace::discrete(4);
  contract_.max_steps = spec_.max_steps;
  contract_.return_range = spec_.return_range();
  contract_.validate();
  state_ = grid_reset(spec_);
}

Vector GridWorldEnv::reset(std::uint64_t /*seed*/) {
  state_ = grid_reset(spec_);
  return grid_observe(spec_, state_);
}

StepResult GridWorldEnv::step(const Vector& action) {
  require_dims(action.size() == 1, "grid action must be a single index");
  const double a = action(0);
  if (!(a >= 0.0 && a <= 3.0) || a != std::floor(a)) throw ContractError("grid action index out of range");
  auto [next, result] = grid_step(spec_, state_, static_cast<GridAction>(static_cast<int>(a)));
  state_ = next;
  return result;
}

}  // namespace hdice::env
