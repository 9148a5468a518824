#include <doctest.h>

#include "hdice/env/environment.hpp"
#include "hdice/policy.hpp"
#include "hdice/rollout.hpp"

using namespace hdice;

namespace {

RolloutBatch batch_from_rewards(const std::vector<std::vector<double>>& episodes) {
  std::vector<Trajectory> trajs;
  for (const auto& rewards : episodes) {
    Trajectory t;
    const auto n = static_cast<Eigen::Index>(rewards.size());
    t.observations = Matrix::Zero(n, 1);
    t.actions = Matrix::Zero(n, 1);
    t.log_probs = Vector::Zero(n);
    t.rewards = Eigen::Map<const Vector>(rewards.data(), n);
    t.terminated = true;
    trajs.push_back(std::move(t));
  }
  return make_batch(trajs);
}

}  // namespace

TEST_CASE("compute_returns examples") {
  SUBCASE("undiscounted delayed reward") {
    RolloutBatch b = batch_from_rewards({{0, 0, -84}});
    compute_returns(b, 1.0);
    CHECK(b.returns_to_go == Vector::Constant(3, -84.0));
    CHECK(b.trajectory_returns(0) == -84.0);
  }
  SUBCASE("discounted delayed reward") {
    RolloutBatch b = batch_from_rewards({{0, 0, -84}});
    compute_returns(b, 0.99);
    CHECK(b.returns_to_go(0) == doctest::Approx(-84 * 0.99 * 0.99));
    CHECK(b.returns_to_go(1) == doctest::Approx(-84 * 0.99));
    CHECK(b.returns_to_go(2) == -84.0);
    CHECK(b.returns_to_go(0) == doctest::Approx(-82.33).epsilon(1e-4));
  }
  SUBCASE("single step") {
    RolloutBatch b = batch_from_rewards({{3.5}});
    compute_returns(b, 0.9);
    CHECK(b.returns_to_go(0) == 3.5);
    CHECK(b.trajectory_returns(0) == 3.5);
  }
  SUBCASE("zero discount") {
    RolloutBatch b = batch_from_rewards({{1, -2, 3}, {4, 5}});
    compute_returns(b, 0.0);
    CHECK(b.returns_to_go == b.rewards);
  }
}

TEST_CASE("recursion identity holds exactly at interior steps") {
  Rng rng(31);
  std::vector<std::vector<double>> eps;
  for (int e = 0; e < 20; ++e) {
    std::vector<double> r(1 + rng.index(12));
    for (auto& x : r) x = rng.uniform(-5, 5);
    eps.push_back(r);
  }
  RolloutBatch b = batch_from_rewards(eps);
  const double gamma = 0.97;
  compute_returns(b, gamma);
  for (std::size_t i = 0; i < b.trajectory_count(); ++i) {
    const auto lo = b.offsets[i], hi = b.offsets[i + 1];
    CHECK(b.returns_to_go(hi - 1) == b.rewards(hi - 1));
    for (auto t = lo; t + 1 < hi; ++t) CHECK(b.returns_to_go(t) == b.rewards(t) + gamma * b.returns_to_go(t + 1));
    CHECK(b.trajectory_returns(static_cast<Eigen::Index>(i)) == b.returns_to_go(lo));
  }
}

TEST_CASE("concatenation preserves per-trajectory returns") {
  RolloutBatch a = batch_from_rewards({{1, 2}, {3}});
  RolloutBatch b = batch_from_rewards({{-1, -1, -1}});
  compute_returns(a, 0.5);
  compute_returns(b, 0.5);
  const std::vector<RolloutBatch> parts{a, b};
  const RolloutBatch c = concat(parts);
  REQUIRE(c.trajectory_count() == 3);
  CHECK(c.size() == 6);
  CHECK(c.trajectory_returns(0) == a.trajectory_returns(0));
  CHECK(c.trajectory_returns(1) == a.trajectory_returns(1));
  CHECK(c.trajectory_returns(2) == b.trajectory_returns(0));
  CHECK(c.returns_to_go.tail(3) == b.returns_to_go);
  CHECK(c.offsets == std::vector<Eigen::Index>{0, 2, 3, 6});
  RolloutBatch c2 = c;
  compute_returns(c2, 0.5);
  CHECK(c2.returns_to_go == c.returns_to_go);
}

TEST_CASE("collect honours the budget") {
  SUBCASE("episode budget on the grid") {
    const auto env = env::make_environment("gridworld-v1+delayed");
    ActorCritic policy(env->contract().observation_dim, env->contract().action_space, {64, 64}, false, 1);
    const RolloutBatch b = collect(*env, policy, Budget::episodes(50), 7);
    CHECK(b.trajectory_count() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(b.offsets[i + 1] - b.offsets[i] <= 50);
      CHECK(b.terminated[i] != b.truncated[i]);
    }
    CHECK(b.observations.rows() == b.size());
    CHECK(b.actions.rows() == b.size());
    CHECK(b.log_probs.size() == b.size());
  }
  SUBCASE("step budget on the point mass completes the last episode") {
    const auto env = env::make_environment("pointmass");
    ActorCritic policy(env->contract().observation_dim, env->contract().action_space, {64, 64}, false, 1);
    const RolloutBatch b = collect(*env, policy, Budget::steps(6144), 7);
    CHECK(b.size() >= 6144);
    CHECK(b.size() - (b.offsets[b.trajectory_count() - 1]) <= 30);
    CHECK(b.size() % 30 == 0);
  }
}

TEST_CASE("collect is deterministic given the seed") {
  const auto env = env::make_environment("gridworld-v2+delayed");
  ActorCritic policy(env->contract().observation_dim, env->contract().action_space, {64, 64}, false, 3);
  const RolloutBatch a = collect(*env, policy, Budget::episodes(10), 99);
  const RolloutBatch b = collect(*env, policy, Budget::episodes(10), 99);
  const RolloutBatch c = collect(*env, policy, Budget::episodes(10), 100);
  CHECK(a.actions == b.actions);
  CHECK(a.rewards == b.rewards);
  CHECK(a.log_probs == b.log_probs);
  CHECK(a.offsets == b.offsets);
  CHECK_FALSE((a.offsets == c.offsets && a.actions == c.actions));
}

TEST_CASE("recorded log-probabilities match the policy") {
  const auto env = env::make_environment("gridworld-v1");
  ActorCritic policy(env->contract().observation_dim, env->contract().action_space, {64, 64}, false, 5);
  const RolloutBatch b = collect(*env, policy, Budget::episodes(5), 1);
  CHECK((policy.log_probs(b.observations, b.actions) - b.log_probs).cwiseAbs().maxCoeff() < 1e-12);
}
