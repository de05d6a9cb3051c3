#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "instasim/dynamics.hpp"
#include "instasim/scenario_io.hpp"
#include "instasim/scene.hpp"
#include "instasim/synthetic.hpp"

using namespace instasim;
using geometry::AnchorPose;
using geometry::Vec2;

namespace {

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = (b - a).cross(c - a);
  const double d2 = (b - a).cross(d - a);
  const double d3 = (d - c).cross(a - c);
  const double d4 = (d - c).cross(b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

bool chains_cross(const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    for (std::size_t j = 0; j + 1 < q.size(); ++j) {
      if (segments_intersect(p[i], p[i + 1], q[j], q[j + 1])) return true;
    }
  }
  return false;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("instasim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("split_map_element partitions by length") {
  const std::vector<Vec2> straight{{0, 0}, {25, 0}};
  const auto parts = scene::split_map_element(straight, 10.0);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].length() == doctest::Approx(10.0));
  CHECK(parts[1].length() == doctest::Approx(10.0));
  CHECK(parts[2].length() == doctest::Approx(5.0));

  const std::vector<Vec2> short_seg{{0, 0}, {8, 0}};
  CHECK(scene::split_map_element(short_seg, 10.0).size() == 1);

  // L-shape: 10 m east, then 4 m north.
  const std::vector<Vec2> ell{{0, 0}, {10, 0}, {10, 4}};
  const auto l_parts = scene::split_map_element(ell, 10.0);
  REQUIRE(l_parts.size() == 2);
  CHECK(l_parts[0].anchor.position.x == doctest::Approx(5.0));
  CHECK(l_parts[0].anchor.position.y == doctest::Approx(0.0));
  CHECK(l_parts[1].anchor.position.x == doctest::Approx(10.0));
  CHECK(l_parts[1].anchor.position.y == doctest::Approx(2.0));
  CHECK(l_parts[1].anchor.heading == doctest::Approx(std::numbers::pi / 2));

  CHECK_THROWS_AS(scene::split_map_element(std::vector<Vec2>{{0, 0}}, 10.0), std::invalid_argument);
}

TEST_CASE("split_map_element preserves geometry and chaining") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> step(0.5, 7.0);
  std::uniform_real_distribution<double> turn(-0.6, 0.6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> pts{{0, 0}};
    double h = 0.0;
    for (int k = 0; k < 12; ++k) {
      h += turn(rng);
      const double s = step(rng);
      pts.push_back(pts.back() + Vec2{s * std::cos(h), s * std::sin(h)});
    }
    double input_len = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) input_len += (pts[k + 1] - pts[k]).norm();

    const auto parts = scene::split_map_element(pts, 10.0);
    double total = 0.0;
    Vec2 prev_end = pts.front();
    for (const scene::Polyline& p : parts) {
      CHECK(p.length() <= 10.0 + 1e-9);
      total += p.length();
      const auto g = p.global_points();
      CHECK((g.front() - prev_end).norm() < 1e-9);
      for (std::size_t k = 0; k + 1 < p.vectors.size(); ++k) {
        CHECK((p.vectors[k].end - p.vectors[k + 1].start).norm() < 1e-9);
      }
      Vec2 mean;
      for (const Vec2& q : g) mean = mean + q;
      mean = mean * (1.0 / static_cast<double>(g.size()));
      CHECK((mean - p.anchor.position).norm() < 1e-9);
      prev_end = g.back();
    }
    CHECK((prev_end - pts.back()).norm() < 1e-9);
    CHECK(total == doctest::Approx(input_len).epsilon(1e-12));
  }
}

TEST_CASE("polyline anchors follow a rigid transform of the input") {
  const std::vector<Vec2> pts{{0, 0}, {3, 1}, {6, 1.5}, {9, 3}};
  const AnchorPose t{{-40.0, 12.5}, 2.2};
  std::vector<Vec2> moved;
  for (const Vec2& p : pts) moved.push_back(geometry::to_global(p, t));
  const scene::Polyline a = scene::make_polyline(pts, scene::ElementType::kLaneBoundary);
  const scene::Polyline b = scene::make_polyline(moved, scene::ElementType::kLaneBoundary);
  const AnchorPose expect = geometry::apply_rigid_transform(a.anchor, t);
  CHECK((expect.position - b.anchor.position).norm() < 1e-9);
  CHECK(std::abs(geometry::normalize_angle(expect.heading - b.anchor.heading)) < 1e-9);
  for (std::size_t k = 0; k < a.vectors.size(); ++k) {
    CHECK((a.vectors[k].start - b.vectors[k].start).norm() < 1e-9);
    CHECK((a.vectors[k].end - b.vectors[k].end).norm() < 1e-9);
  }
}

TEST_CASE("neighbors_within is inclusive") {
  const AnchorPose target{{0, 0}, 0};
  CHECK(scene::neighbors_within(target, std::vector<AnchorPose>{}, 50.0).empty());
  const std::vector<AnchorPose> same(3, target);
  CHECK(scene::neighbors_within(target, same, 1.0).size() == 3);
  const std::vector<AnchorPose> ring{{{10, 0}, 0}, {{0, 49.9}, 0}, {{-50.1, 0}, 0}};
  CHECK(scene::neighbors_within(target, ring, 50.0) == std::vector<int>{0, 1});
  const std::vector<AnchorPose> edge{{{50.0, 0}, 0}};
  CHECK(scene::neighbors_within(target, edge, 50.0).size() == 1);
}

TEST_CASE("synthetic straight scenario with one agent stays in its corridor") {
  const scene::Scenario s = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 1, 7);
  REQUIRE(s.agents.size() == 1);
  REQUIRE(s.has_expert());
  CHECK(s.dt == doctest::Approx(0.2));
  CHECK(s.horizon == 50);
  const auto routes = scene::build_route_geometries(s);
  for (const scene::ExpertStep& e : s.expert[0]) {
    CHECK(routes[static_cast<std::size_t>(s.agents[0].route_id)].project(e.pose.position).lateral <= 2.0);
  }
  for (const scene::Polyline& p : s.polylines) CHECK(p.length() <= 10.0 + 1e-9);
}

TEST_CASE("synthetic generation is deterministic") {
  for (auto tmpl : {synthetic::Template::kStraight, synthetic::Template::kCurve, synthetic::Template::kIntersection,
                    synthetic::Template::kMerge}) {
    const auto a = synthetic::generate_synthetic_scenario(tmpl, 2, 7);
    const auto b = synthetic::generate_synthetic_scenario(tmpl, 2, 7);
    CHECK(a == b);
    const auto c = synthetic::generate_synthetic_scenario(tmpl, 2, 8);
    CHECK_FALSE(a == c);
  }
  CHECK_THROWS_AS(synthetic::template_from_string("roundabout"), std::invalid_argument);
}

TEST_CASE("intersection template has crossing routes") {
  const scene::Scenario s = synthetic::generate_synthetic_scenario(synthetic::Template::kIntersection, 4, 3);
  REQUIRE(s.routes.size() == 4);
  const auto routes = scene::build_route_geometries(s);
  int crossing = 0;
  for (std::size_t a = 0; a < routes.size(); ++a) {
    for (std::size_t b = a + 1; b < routes.size(); ++b) crossing += chains_cross(routes[a].points(), routes[b].points());
  }
  CHECK(crossing >= 2);
}

TEST_CASE("scripted expert on straight roads never leaves the corridor or collides") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const scene::Scenario s = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 4, seed);
    const auto routes = scene::build_route_geometries(s);
    for (int t = 0; t <= s.horizon; ++t) {
      std::vector<dynamics::AgentState> states = dynamics::initial_states(s);
      for (std::size_t i = 0; i < states.size(); ++i) {
        const scene::ExpertStep& e = s.expert[i][static_cast<std::size_t>(t)];
        states[i].pose = e.pose;
        CHECK(routes[static_cast<std::size_t>(states[i].route_id)].project(e.pose.position).lateral <= 2.0);
      }
      CHECK(dynamics::check_collision(states).empty());
    }
  }
}

TEST_CASE("straight-road expert stays within comfortable braking") {
  const synthetic::ExpertConfig config;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const scene::Scenario s = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 4, seed);
    for (const auto& traj : s.expert) {
      for (const scene::ExpertStep& e : traj) CHECK(e.accel >= -config.comfortable_decel - 1e-9);
    }
  }
}

TEST_CASE("generated scenarios start without overlaps") {
  for (auto tmpl : {synthetic::Template::kStraight, synthetic::Template::kCurve, synthetic::Template::kIntersection,
                    synthetic::Template::kMerge}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = synthetic::generate_synthetic_scenario(tmpl, 8, seed);
      CHECK(dynamics::check_collision(dynamics::initial_states(s)).empty());
    }
  }
}

TEST_CASE("scenario files round trip") {
  const auto dir = temp_dir("scene_io");
  for (auto tmpl : {synthetic::Template::kStraight, synthetic::Template::kIntersection}) {
    const auto s = synthetic::generate_synthetic_scenario(tmpl, 3, 11);
    const auto path = dir / (synthetic::to_string(tmpl) + ".json");
    scene::save_scenario(s, path);
    CHECK(scene::load_scenario(path) == s);
  }

  auto s = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 1, 1);
  s.dt = 0.1;
  scene::save_scenario(s, dir / "dt.json");
  CHECK(scene::load_scenario(dir / "dt.json").dt == doctest::Approx(0.1));

  nlohmann::json j = nlohmann::json::parse(scene::scenario_to_json(s));
  j.erase("routes");
  try {
    scene::scenario_from_json(j.dump());
    FAIL("expected a schema error");
  } catch (const scene::SchemaError& e) {
    CHECK(std::string(e.what()).find("routes") != std::string::npos);
  }
  nlohmann::json k = nlohmann::json::parse(scene::scenario_to_json(s));
  k["agents"][0].erase("width");
  CHECK_THROWS_AS(scene::scenario_from_json(k.dump()), scene::SchemaError);
  CHECK_THROWS_AS(scene::scenario_from_json("{not json"), scene::SchemaError);
}

TEST_CASE("validate rejects broken scenarios") {
  auto s = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 2, 1);
  auto bad = s;
  bad.routes[0].polyline_ids.push_back(100000);
  CHECK_THROWS_AS(scene::validate(bad), std::invalid_argument);
  bad = s;
  bad.agents[1].pose = bad.agents[0].pose;
  CHECK_THROWS_AS(scene::validate(bad), std::invalid_argument);
  bad = s;
  bad.agents[0].features.width = 0.0;
  CHECK_THROWS_AS(scene::validate(bad), std::invalid_argument);
}

TEST_CASE("route geometry projection") {
  const auto s = synthetic::generate_synthetic_scenario(synthetic::Template::kCurve, 1, 2);
  const auto routes = scene::build_route_geometries(s);
  const scene::RouteGeometry& r = routes[0];
  for (double arc : {0.0, 10.0, 50.0, r.length() * 0.5}) {
    const Vec2 p = r.point_at(arc);
    const auto proj = r.project(p);
    CHECK(proj.lateral < 1e-6);
    CHECK(proj.arc_length == doctest::Approx(arc).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("take_agents keeps an evenly spaced subset on the same map") {
  const auto big = synthetic::generate_synthetic_scenario(synthetic::Template::kIntersection, 16, 3);
  const auto four = synthetic::take_agents(big, 4);
  REQUIRE(four.agents.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(four.agents[k] == big.agents[4 * k]);
  CHECK(four.polylines == big.polylines);
  REQUIRE(four.expert.size() == 4);
  CHECK(four.expert[0].size() == static_cast<std::size_t>(big.horizon + 1));
  CHECK(synthetic::take_agents(big, 16).agents == big.agents);
  CHECK_THROWS_AS(synthetic::take_agents(big, 0), std::invalid_argument);
  CHECK_THROWS_AS(synthetic::take_agents(big, 17), std::invalid_argument);
}
