#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "instasim/dynamics.hpp"
#include "instasim/synthetic.hpp"

using namespace instasim;
using dynamics::Action;
using dynamics::AgentState;
using geometry::AnchorPose;
using geometry::Vec2;

namespace {

AgentState make_agent(double x, double y, double heading, double speed, double length = 4.0,
                      double width = 2.0) {
  AgentState s;
  s.pose = {{x, y}, heading};
  s.features.length = length;
  s.features.width = width;
  s.features.speed = speed;
  return s;
}

// Straight two-lane road along +x with one route per lane.
scene::Scenario straight_road(int n_agents) {
  scene::Scenario s;
  for (int lane = 0; lane < 2; ++lane) {
    const std::vector<Vec2> chain{{-50.0, 4.0 * lane}, {250.0, 4.0 * lane}};
    scene::Route route;
    for (auto& p : scene::split_map_element(chain, scene::kMaxPolylineLength)) {
      route.polyline_ids.push_back(static_cast<int>(s.polylines.size()));
      s.polylines.push_back(std::move(p));
    }
    s.routes.push_back(route);
  }
  for (int i = 0; i < n_agents; ++i) {
    scene::AgentSpec a;
    a.pose = {{15.0 * i, 0.0}, 0.0};
    a.features.length = 4.0;
    s.agents.push_back(a);
  }
  return s;
}

}  // namespace

TEST_CASE("bicycle_step basic motion") {
  const AgentState rest = make_agent(3.0, -2.0, 0.7, 0.0);
  CHECK(dynamics::bicycle_step(rest, {}, 0.2) == rest);

  const AgentState moving = make_agent(0.0, 0.0, std::numbers::pi / 3, 10.0);
  const AgentState next = dynamics::bicycle_step(moving, {}, 0.2);
  CHECK((next.pose.position - moving.pose.position).norm() == doctest::Approx(2.0));
  CHECK(next.pose.position.x == doctest::Approx(1.0));
  CHECK(next.pose.position.y == doctest::Approx(std::sqrt(3.0)));
  CHECK(next.pose.heading == doctest::Approx(moving.pose.heading));
  CHECK(next.speed() == doctest::Approx(10.0));

  const AgentState braking = dynamics::bicycle_step(make_agent(0, 0, 0, 1.0), {-8.0, 0.0}, 0.2);
  CHECK(braking.speed() == 0.0);

  // Out-of-range commands are clamped on execution.
  const AgentState a = dynamics::bicycle_step(moving, {100.0, 3.0}, 0.2);
  const AgentState b = dynamics::bicycle_step(moving, {5.0, 0.55}, 0.2);
  CHECK(a == b);
}

TEST_CASE("constant steer traces the closed-form turning radius") {
  // length 5 gives wheelbase 3.
  AgentState s = make_agent(0.0, 0.0, 0.0, 5.0, 5.0, 2.0);
  const double delta = 0.1;
  const double expected = 3.0 / std::tan(delta);
  const double dt = 0.001;
  const double beta = std::atan(0.5 * std::tan(delta));
  const double omega = 5.0 * std::cos(beta) * std::tan(delta) / 3.0;
  const int steps = static_cast<int>(std::ceil(2.0 * std::numbers::pi / omega / dt));
  std::vector<Vec2> pts;
  for (int k = 0; k < steps; ++k) {
    s = dynamics::bicycle_step(s, {0.0, delta}, dt);
    pts.push_back(s.pose.position);
  }
  Vec2 centre;
  for (const Vec2& p : pts) centre = centre + p;
  centre = centre * (1.0 / static_cast<double>(pts.size()));
  double mean_r = 0.0;
  for (const Vec2& p : pts) mean_r += (p - centre).norm();
  mean_r /= static_cast<double>(pts.size());
  CHECK(std::abs(mean_r - expected) / expected < 0.02);
}

TEST_CASE("zero action keeps speed constant") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int k = 0; k < 20; ++k) {
    AgentState s = make_agent(u(rng), u(rng), u(rng) - 10.0, u(rng));
    const double v = s.speed();
    for (int t = 0; t < 30; ++t) s = dynamics::bicycle_step(s, {}, 0.2);
    CHECK(s.speed() == v);
  }
}

TEST_CASE("check_collision") {
  std::vector<AgentState> far{make_agent(0, 0, 0, 0), make_agent(100, 0, 0, 0)};
  CHECK(dynamics::check_collision(far).empty());
  std::vector<AgentState> same{make_agent(1, 2, 0.3, 0), make_agent(1, 2, 0.3, 0)};
  CHECK(dynamics::check_collision(same).size() == 1);
  std::vector<AgentState> apart{make_agent(0, 0, 0, 0), make_agent(4.01, 0, 0, 0)};
  CHECK(dynamics::check_collision(apart).empty());
  std::vector<AgentState> close{make_agent(0, 0, 0, 0), make_agent(3.99, 0, 0, 0)};
  const auto pairs = dynamics::check_collision(close);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::pair<int, int>{0, 1});
  close[1].alive = false;
  CHECK(dynamics::check_collision(close).empty());
}

TEST_CASE("check_off_track corridor boundary") {
  const scene::Scenario s = straight_road(1);
  const auto routes = scene::build_route_geometries(s);
  CHECK_FALSE(dynamics::check_off_track(make_agent(10, 0, 0, 0), routes[0]));
  CHECK(dynamics::check_off_track(make_agent(10, 2.5, 0, 0), routes[0]));
  CHECK_FALSE(dynamics::check_off_track(make_agent(10, 2.0, 0, 0), routes[0]));
  CHECK(dynamics::check_off_track(make_agent(10, -2.5, 0, 0), s.routes[0], s.polylines));
}

TEST_CASE("simulation_step events") {
  scene::Scenario s = straight_road(2);
  std::vector<AgentState> rest = dynamics::initial_states(s);
  const std::vector<Action> zero(2);
  CHECK(dynamics::simulation_step(s, rest, zero).events.empty());
  CHECK_THROWS_AS(dynamics::simulation_step(s, rest, std::vector<Action>(1)), std::invalid_argument);

  // Head on, centres 4 m apart, closing 4 m per step.
  std::vector<AgentState> head_on{make_agent(20.0, 0.0, 0.0, 10.0), make_agent(24.0, 0.0, std::numbers::pi, 10.0)};
  CHECK(dynamics::check_collision(head_on).empty());
  const auto out = dynamics::simulation_step(s, head_on, zero, 3);
  REQUIRE(out.events.size() == 2);
  CHECK(out.events[0].agent_id == 0);
  CHECK(out.events[1].agent_id == 1);
  for (const auto& e : out.events) {
    CHECK(e.cause == dynamics::Termination::kCollision);
    CHECK(e.step == 3);
  }
  CHECK_FALSE(out.states[0].alive);
  CHECK_FALSE(out.states[1].alive);
}

TEST_CASE("hard left steer leaves the corridor when the bicycle model says so") {
  const scene::Scenario s = straight_road(1);
  const dynamics::Simulator sim(s);
  std::vector<AgentState> states = dynamics::initial_states(s);
  states[0].features.speed = 10.0;
  const std::vector<Action> left{{0.0, 0.55}};

  // Oracle: integrate the same model independently until |y| > 2.
  double x = states[0].pose.position.x, y = 0.0, th = 0.0;
  const double L = 0.6 * states[0].features.length;
  const double beta = std::atan(0.5 * std::tan(0.55));
  int expected = -1;
  for (int k = 0; k < 50 && expected < 0; ++k) {
    x += 10.0 * std::cos(th + beta) * 0.2;
    y += 10.0 * std::sin(th + beta) * 0.2;
    th += 10.0 * std::cos(beta) * std::tan(0.55) / L * 0.2;
    if (std::abs(y) > 2.0) expected = k;
  }
  REQUIRE(expected >= 0);

  int got = -1;
  for (int k = 0; k < 50 && got < 0; ++k) {
    auto out = sim.step(states, left, k);
    if (!out.events.empty()) {
      CHECK(out.events[0].cause == dynamics::Termination::kOffTrack);
      got = out.events[0].step;
    }
    states = std::move(out.states);
  }
  CHECK(got == expected);

  // Terminated agents stay frozen.
  const AgentState frozen = states[0];
  for (int k = 0; k < 5; ++k) {
    auto out = sim.step(states, left, 100 + k);
    CHECK(out.events.empty());
    states = std::move(out.states);
  }
  CHECK(states[0] == frozen);
}

TEST_CASE("simulation_step is deterministic and order independent") {
  const scene::Scenario s = synthetic::generate_synthetic_scenario(synthetic::Template::kIntersection, 6, 4);
  std::vector<AgentState> states = dynamics::initial_states(s);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> accel(-8.0, 5.0), steer(-0.55, 0.55);
  std::vector<Action> actions;
  for (std::size_t i = 0; i < states.size(); ++i) actions.push_back({accel(rng), steer(rng)});

  const auto a = dynamics::simulation_step(s, states, actions, 0);
  const auto b = dynamics::simulation_step(s, states, actions, 0);
  CHECK(a.states == b.states);
  CHECK(a.events == b.events);

  std::vector<int> perm(states.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<AgentState> ps;
  std::vector<Action> pa;
  for (int p : perm) {
    ps.push_back(states[static_cast<std::size_t>(p)]);
    pa.push_back(actions[static_cast<std::size_t>(p)]);
  }
  const auto c = dynamics::simulation_step(s, ps, pa, 0);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    CHECK(c.states[k] == a.states[static_cast<std::size_t>(perm[k])]);
  }
  CHECK(c.events.size() == a.events.size());
}

TEST_CASE("agents reaching the route end finish") {
  scene::Scenario s = straight_road(1);
  const dynamics::Simulator sim(s);
  std::vector<AgentState> states = dynamics::initial_states(s);
  states[0].pose.position.x = 249.5;
  states[0].features.speed = 10.0;
  const auto out = sim.step(states, std::vector<Action>(1), 7);
  REQUIRE(out.events.size() == 1);
  CHECK(out.events[0].cause == dynamics::Termination::kFinished);
}
