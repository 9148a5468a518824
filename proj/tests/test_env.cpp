#include <doctest.h>

#include <numeric>

#include "hdice/env/chain.hpp"
#include "hdice/env/delayed.hpp"
#include "hdice/env/gridworld.hpp"
#include "hdice/env/pointmass.hpp"

using namespace hdice;
using namespace hdice::env;

namespace {

Vector act(int a) { return Vector::Constant(1, static_cast<double>(a)); }

// Steps the raw grid from the start and returns the per-step rewards.
std::vector<double> run_actions(const GridSpec& spec, const std::vector<GridAction>& actions) {
  GridState s = grid_reset(spec);
  std::vector<double> rewards;
  for (auto a : actions) {
    auto [next, r] = grid_step(spec, s, a);
    rewards.push_back(r.reward);
    s = next;
    if (r.done()) break;
  }
  return rewards;
}

}  // namespace

TEST_CASE("parse_grid_map examples") {
  SUBCASE("small map") {
    const GridSpec spec = parse_grid_map("S.D\n..F\n..G");
    CHECK(spec.width == 3);
    CHECK(spec.height == 3);
    REQUIRE(spec.diamonds.size() == 1);
    CHECK(spec.diamonds[0] == Cell{0, 2});
    REQUIRE(spec.fires.size() == 1);
    CHECK(spec.fires[0] == Cell{1, 2});
    CHECK(spec.start == Cell{0, 0});
    CHECK(spec.goal == Cell{2, 2});
  }
  SUBCASE("bundled presets") {
    CHECK(gridworld_v1().max_steps == 50);
    CHECK(gridworld_v2().max_steps == 100);
  }
  SUBCASE("errors carry line and column") {
    CHECK_THROWS_AS(parse_grid_map("S..\n..."), ParseError);
    CHECK_THROWS_AS(parse_grid_map("..G\n..."), ParseError);
    CHECK_THROWS_AS(parse_grid_map("S.G\n.."), ParseError);
    CHECK_THROWS_AS(parse_grid_map("S.G\nSG."), ParseError);
    try {
      parse_grid_map("S.G\n.X.");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2, column 2") != std::string::npos);
    }
  }
  SUBCASE("fire on the start is rejected") {
    GridSpec spec = parse_grid_map("S.G");
    spec.fires.push_back(spec.start);
    CHECK_THROWS_AS(spec.validate(), ContractError);
  }
}

TEST_CASE("grid_step examples") {
  const GridSpec spec = parse_grid_map("SDF\n...\n..G");
  SUBCASE("diamond pays once") {
    auto [s1, r1] = grid_step(spec, grid_reset(spec), GridAction::Right);
    CHECK(r1.reward == 19.0);
    CHECK(s1.remaining_diamonds == 0);
    auto [s2, r2] = grid_step(spec, s1, GridAction::Left);
    auto [s3, r3] = grid_step(spec, s2, GridAction::Right);
    CHECK(r3.reward == -1.0);
  }
  SUBCASE("fire persists") {
    const auto rewards = run_actions(spec, {GridAction::Right, GridAction::Right, GridAction::Left,
                                            GridAction::Right});
    CHECK(rewards == std::vector<double>{19.0, -101.0, -1.0, -101.0});
  }
  SUBCASE("border clamps in place") {
    auto [s, r] = grid_step(spec, grid_reset(spec), GridAction::Left);
    CHECK(s.position == spec.start);
    CHECK(r.reward == -1.0);
  }
  SUBCASE("goal terminates and pays the step cost") {
    const auto rewards =
        run_actions(spec, {GridAction::Down, GridAction::Down, GridAction::Right, GridAction::Right});
    CHECK(rewards.back() == -1.0);
    GridState s = grid_reset(spec);
    StepResult last;
    for (auto a : {GridAction::Down, GridAction::Down, GridAction::Right, GridAction::Right})
      std::tie(s, last) = grid_step(spec, s, a);
    CHECK(last.terminated);
    CHECK_FALSE(last.truncated);
    CHECK_THROWS_AS(grid_step(spec, s, GridAction::Up), ContractError);
  }
  SUBCASE("goal on the final allowed step is termination, not truncation") {
    GridSpec tight = parse_grid_map("SG");
    tight.max_steps = 1;
    auto [s, r] = grid_step(tight, grid_reset(tight), GridAction::Right);
    CHECK(r.terminated);
    CHECK_FALSE(r.truncated);
  }
}

TEST_CASE("grid_observe examples") {
  const GridSpec spec = parse_grid_map("SD.\nD.D\n..G");
  const GridState s0 = grid_reset(spec);
  const Vector o0 = grid_observe(spec, s0);
  REQUIRE(o0.size() == 5);
  CHECK(o0(0) == 0.0);
  CHECK(o0(1) == 0.0);
  CHECK(o0.tail(3) == Vector::Ones(3));
  auto [s1, r1] = grid_step(spec, s0, GridAction::Right);
  const Vector o1 = grid_observe(spec, s1);
  CHECK(o1(0) == doctest::Approx(1.0 / 3.0));
  CHECK(o1(2) == 0.0);
  CHECK(o1(3) == 1.0);
  CHECK(GridWorldEnv(spec, "g").contract().observation_dim == 5);
}

TEST_CASE("delayed rewards") {
  SUBCASE("summation example") {
    // -1, 19, -101, -1 at the goal.
    const GridSpec spec = parse_grid_map("SDFG");
    auto env = delay_rewards(std::make_unique<GridWorldEnv>(spec, "g"));
    env->reset(0);
    std::vector<double> rewards;
    for (int a : {2, 3, 3, 3}) rewards.push_back(env->step(act(a)).reward);
    CHECK(rewards == std::vector<double>{0.0, 0.0, 0.0, -84.0});
  }
  SUBCASE("dense mode reproduces the raw stream") {
    const GridSpec spec = gridworld_v1();
    GridWorldEnv env(spec, "g");
    env.reset(0);
    Rng rng(4);
    GridState s = grid_reset(spec);
    for (int t = 0; t < spec.max_steps; ++t) {
      const int a = static_cast<int>(rng.index(4));
      const auto r = env.step(act(a));
      auto [next, raw] = grid_step(spec, s, static_cast<GridAction>(a));
      CHECK(r.reward == raw.reward);
      s = next;
      if (r.done()) break;
    }
  }
  SUBCASE("a fire-heavy trajectory ends in one large negative reward") {
    const GridSpec spec = parse_grid_map("SF.D\n...G");
    auto env = delay_rewards(std::make_unique<GridWorldEnv>(spec, "g"));
    env->reset(0);
    std::vector<double> rewards;
    // Into the fire three times, then the diamond, then the goal.
    for (int a : {3, 2, 3, 2, 3, 3, 3, 1}) rewards.push_back(env->step(act(a)).reward);
    CHECK(std::all_of(rewards.begin(), rewards.end() - 1, [](double r) { return r == 0.0; }));
    CHECK(rewards.back() == 3 * -100.0 + 20.0 - 8.0);
  }
  SUBCASE("return range passes through") {
    auto inner = std::make_unique<GridWorldEnv>(gridworld_v1(), "g");
    const auto range = *inner->contract().return_range;
    auto env = delay_rewards(std::move(inner));
    CHECK(env->contract().return_range->lo == range.lo);
    CHECK(env->contract().return_range->hi == range.hi);
  }
}

TEST_CASE("delayed return identity, episode length and diamond monotonicity on random episodes") {
  for (const auto& spec : {gridworld_v1(), gridworld_v2()}) {
    GridWorldEnv dense(spec, "g");
    DelayedRewardEnv delayed(std::make_unique<GridWorldEnv>(spec, "g"));
    Rng rng(17);
    for (int ep = 0; ep < 300; ++ep) {
      dense.reset(0);
      delayed.reset(0);
      double dense_sum = 0.0, delayed_sum = 0.0, diamond_total = 0.0;
      std::uint64_t prev_mask = dense.state().remaining_diamonds;
      int steps = 0;
      for (;;) {
        const int a = static_cast<int>(rng.index(4));
        const auto rd = dense.step(act(a));
        const auto rl = delayed.step(act(a));
        ++steps;
        dense_sum += rd.reward;
        delayed_sum += rl.reward;
        const std::uint64_t mask = dense.state().remaining_diamonds;
        CHECK((mask & ~prev_mask) == 0);
        if (mask != prev_mask) diamond_total += spec.diamond_reward;
        prev_mask = mask;
        if (!rl.done()) CHECK(rl.reward == 0.0);
        if (rd.done()) {
          CHECK(rl.done());
          break;
        }
      }
      CHECK(delayed_sum == dense_sum);
      CHECK(steps <= spec.max_steps);
      CHECK(diamond_total <= spec.diamond_reward * static_cast<double>(spec.diamonds.size()));
      const auto range = spec.return_range();
      CHECK(dense_sum >= range.lo);
      CHECK(dense_sum <= range.hi);
    }
  }
}

TEST_CASE("random walks never leave the grid") {
  const GridSpec spec = gridworld_v2();
  Rng rng(123);
  for (int ep = 0; ep < 10000; ++ep) {
    GridState s = grid_reset(spec);
    while (!s.finished) {
      auto [next, r] = grid_step(spec, s, static_cast<GridAction>(rng.index(4)));
      REQUIRE(spec.in_bounds(next.position));
      s = next;
    }
  }
}

TEST_CASE("grid actions parse by name or index") {
  CHECK(parse_grid_action("left") == GridAction::Left);
  CHECK(parse_grid_action("Right") == GridAction::Right);
  CHECK(parse_grid_action("0") == GridAction::Up);
  CHECK_THROWS_AS(parse_grid_action("north"), ParseError);
  CHECK_THROWS_AS(parse_grid_action("4"), ParseError);
}

TEST_CASE("environment factory") {
  CHECK(make_environment("gridworld-v1")->contract().max_steps == 50);
  CHECK(make_environment("gridworld-v2+delayed")->id() == "gridworld-v2+delayed");
  CHECK(make_environment("pointmass")->contract().action_space.is_discrete() == false);
  CHECK(make_environment("chain")->contract().action_space.is_discrete());
  CHECK_THROWS_AS(make_environment("lunarlander"), ContractError);
  CHECK_THROWS_AS(make_environment("gridworld-file:/nonexistent/map.txt"), ContractError);
}

TEST_CASE("point mass") {
  PointMassEnv env;
  env.reset(0);
  auto r = env.step(Vector::Constant(1, 1.0));
  CHECK(env.position() == doctest::Approx(0.1));
  CHECK(r.reward == doctest::Approx(-0.7));
  env.reset(0);
  double total = 0.0;
  int steps = 0;
  for (;;) {
    const auto s = env.step(Vector::Constant(1, 5.0));  // clipped to the action bound
    total += s.reward;
    ++steps;
    if (s.done()) break;
  }
  CHECK(steps == PointMassEnv::kHorizon);
  CHECK(env.position() <= 1.0);
  const auto range = *env.contract().return_range;
  CHECK(total >= range.lo);
  CHECK(total <= range.hi);
}

TEST_CASE("chain_enumerate examples") {
  auto deterministic = [](int horizon) {
    ChainMdpSpec spec;
    spec.n_states = 2;
    spec.n_actions = 2;
    spec.horizon = horizon;
    spec.gamma = 0.5;
    spec.initial = {1.0, 0.0};
    // Action 0 stays, action 1 switches state.
    spec.transitions = {1, 0, 0, 1, 0, 1, 1, 0};
    spec.rewards = {1.0, 2.0, 3.0, 4.0};
    return spec;
  };
  SUBCASE("deterministic policy gives one path") {
    Matrix pi(2, 2);
    pi << 0, 1, 1, 0;
    const auto paths = chain_enumerate(deterministic(3), pi);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].probability == 1.0);
    CHECK(paths[0].states == std::vector<int>{0, 1, 1});
    // rewards 2, 3, 3 discounted by 0.5
    CHECK(paths[0].discounted_return == doctest::Approx(2.0 + 0.5 * 3.0 + 0.25 * 3.0));
  }
  SUBCASE("uniform policy over two steps gives four equal paths") {
    const auto paths = chain_enumerate(deterministic(2), Matrix::Constant(2, 2, 0.5));
    REQUIRE(paths.size() == 4);
    for (const auto& p : paths) CHECK(p.probability == doctest::Approx(0.25));
  }
  SUBCASE("probabilities sum to one on random instances") {
    Rng rng(9);
    for (int t = 0; t < 25; ++t) {
      const auto spec = random_chain(rng, 2 + t % 5, 1 + t % 3, 1 + t % 5, 0.9);
      const auto paths = chain_enumerate(spec, random_policy(rng, spec.n_states, spec.n_actions));
      double total = 0.0;
      for (const auto& p : paths) total += p.probability;
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }
  SUBCASE("cap is enforced") {
    CHECK_THROWS_AS(chain_enumerate(deterministic(4), Matrix::Constant(2, 2, 0.5), 3), SizeError);
  }
  SUBCASE("invalid tables are rejected") {
    auto spec = deterministic(2);
    spec.transitions[0] = 0.9;
    CHECK_THROWS_AS(spec.validate(), ContractError);
    CHECK_THROWS_AS(chain_enumerate(deterministic(2), Matrix::Constant(2, 2, 0.4)), ContractError);
  }
}

TEST_CASE("chain environment follows the table dynamics") {
  ChainMdpSpec spec = default_chain();
  ChainEnv env(spec);
  Vector obs = env.reset(5);
  CHECK(obs.sum() == 1.0);
  int steps = 0;
  for (;;) {
    const auto r = env.step(act(0));
    ++steps;
    if (r.done()) break;
  }
  CHECK(steps == spec.horizon);
  CHECK_THROWS_AS(env.step(act(0)), ContractError);
}
