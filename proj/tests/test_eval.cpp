#include <doctest.h>

#include <cmath>
#include <sstream>

#include "instasim/eval.hpp"
#include "instasim/synthetic.hpp"

using namespace instasim;
using dynamics::Termination;
using eval::Trajectory;

TEST_CASE("rmse examples") {
  const Trajectory a{{{0, 0}, {1, 0}, {2, 0}}, {}};
  CHECK(eval::rmse(std::vector<Trajectory>{a}, std::vector<Trajectory>{a}) == 0.0);

  const Trajectory shifted{{{0, 3}, {1, 3}, {2, 3}}, {}};
  CHECK(eval::rmse(std::vector<Trajectory>{shifted}, std::vector<Trajectory>{a}) == doctest::Approx(3.0));

  const Trajectory t2{{{0, 0}, {0, 0}}, {}};
  const Trajectory s2{{{0, 0}, {4, 0}}, {}};
  CHECK(eval::rmse(std::vector<Trajectory>{s2}, std::vector<Trajectory>{t2}) == doctest::Approx(std::sqrt(8.0)));

  // Steps invalid in either trajectory are skipped; agents without overlap drop out.
  const Trajectory masked{{{0, 0}, {100, 0}, {2, 0}}, {1, 0, 1}};
  CHECK(eval::rmse(std::vector<Trajectory>{masked}, std::vector<Trajectory>{a}) == 0.0);
  const Trajectory none{{{5, 5}, {5, 5}, {5, 5}}, {0, 0, 0}};
  CHECK(eval::rmse(std::vector<Trajectory>{shifted, none}, std::vector<Trajectory>{a, a}) == doctest::Approx(3.0));
  CHECK_THROWS_AS(eval::rmse(std::vector<Trajectory>{none}, std::vector<Trajectory>{a}), std::invalid_argument);
}

TEST_CASE("termination rates") {
  CHECK(eval::collision_rate({}, 4) == 0.0);
  const std::vector<dynamics::TerminationEvent> one{{2, Termination::kCollision, 7}};
  CHECK(eval::collision_rate(one, 4) == doctest::Approx(0.25));
  CHECK(eval::offtrack_rate(one, 4) == 0.0);
  const std::vector<dynamics::TerminationEvent> both{{1, Termination::kOffTrack, 3}, {1, Termination::kCollision, 5}};
  CHECK(eval::offtrack_rate(both, 2) == doctest::Approx(0.5));
  CHECK(eval::collision_rate(both, 2) == 0.0);
  const std::vector<dynamics::TerminationEvent> reversed{{1, Termination::kCollision, 5}, {1, Termination::kOffTrack, 3}};
  CHECK(eval::offtrack_rate(reversed, 2) == doctest::Approx(0.5));
}

TEST_CASE("selection score") {
  CHECK(eval::selection_score(10.0, 0.0, 0.0) == doctest::Approx(10.0));
  CHECK(eval::selection_score(10.0, 0.1, 0.1) == doctest::Approx(12.5));
  CHECK(eval::selection_score(1.0, 0.5, 0.5) == doctest::Approx(1000.0));
}

TEST_CASE("constant velocity baseline") {
  scene::Scenario s;
  const std::vector<geometry::Vec2> road{{-10, 0}, {300, 0}};
  scene::Route route;
  for (auto& p : scene::split_map_element(road, 10.0)) {
    route.polyline_ids.push_back(static_cast<int>(s.polylines.size()));
    s.polylines.push_back(std::move(p));
  }
  s.routes.push_back(route);
  s.agents.resize(2);
  s.agents[0].pose = {{0, 0}, 0};
  s.agents[0].features.speed = 0.0;
  s.agents[1].pose = {{50, 0}, 0};
  s.agents[1].features.speed = 10.0;
  const auto trace = eval::cv_baseline(s);
  REQUIRE(trace.positions[0].size() == 51);
  for (const auto& p : trace.positions[0]) CHECK(p == geometry::Vec2{0, 0});
  CHECK(trace.positions[1][50].x == doctest::Approx(150.0));
  CHECK(trace.positions[1][50].y == doctest::Approx(0.0).scale(1.0));
  CHECK(trace.termination_step[1] == -1);

  int offtrack = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto c = synthetic::generate_synthetic_scenario(synthetic::Template::kCurve, 4, seed);
    const auto t = eval::cv_baseline(c);
    for (auto cause : t.cause) offtrack += cause == Termination::kOffTrack;
    total += 4;
  }
  CHECK(offtrack > 0);
  CHECK(offtrack <= total);
}

TEST_CASE("isps formula") {
  const std::vector<int> counts{10, 20};
  CHECK(eval::isps_formula(50, counts, 3.0) == doctest::Approx(500.0));
}

TEST_CASE("isps benchmark bookkeeping") {
  const auto s = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 3, 2);
  rl::BehaviorModel model(rl::ModelConfig{}, 1);
  const std::vector<const scene::Scenario*> envs{&s, &s};
  const auto r = eval::isps_benchmark(model, envs, 5, 3, 1, 1);
  CHECK(r.n_envs == 2);
  CHECK(r.agent_counts == std::vector<int>{3, 3});
  CHECK(r.elapsed > 0.0);
  CHECK(r.isps == doctest::Approx(eval::isps_formula(5, r.agent_counts, r.elapsed)));
  CHECK(r.subsequent_step_latency < r.initial_step_latency);
}

TEST_CASE("scaling report counters") {
  const auto base = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 8, 4);
  nn::ParamStore store;
  std::mt19937_64 rng(3);
  encoder::InstanceEncoder inst(store, "i", encoder::EncoderConfig::small(), rng);
  encoder::AgentCentricEncoder ac(store, "a", encoder::EncoderConfig::small(), rng);
  const std::vector<int> counts{1, 8};
  const auto rows = eval::scaling_report(inst, store, &ac, base, counts, 5, 1);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.instance.polyline_encodings == row.n_polylines);
    CHECK(row.instance.agent_encodings == row.n_agents * 5);
  }
  CHECK(rows[1].agent_centric.polyline_encodings > 4 * rows[0].agent_centric.polyline_encodings);
  std::ostringstream csv;
  eval::write_scaling_csv(csv, rows);
  CHECK(csv.str().find("ac_polyline_encodings") != std::string::npos);
  std::ostringstream ic_only;
  eval::write_scaling_csv(ic_only, rows, false);
  CHECK(ic_only.str().find("ac_") == std::string::npos);
  CHECK(ic_only.str().find("ic_polyline_encodings") != std::string::npos);

  const std::vector<double> x{1, 2, 3}, y{2, 4, 6};
  CHECK(eval::slope(x, y) == doctest::Approx(2.0));
}

TEST_CASE("metrics are independent of agent order in events") {
  const std::vector<dynamics::TerminationEvent> a{{0, Termination::kCollision, 1}, {3, Termination::kOffTrack, 2}};
  const std::vector<dynamics::TerminationEvent> b{a[1], a[0]};
  CHECK(eval::collision_rate(a, 5) == eval::collision_rate(b, 5));
  CHECK(eval::offtrack_rate(a, 5) == eval::offtrack_rate(b, 5));
}

TEST_CASE("metrics split agents by the vru flag") {
  auto s = synthetic::generate_synthetic_scenario(synthetic::Template::kStraight, 4, 8);
  s.agents[1].features.vru = true;
  const std::vector<const scene::Scenario*> ptrs{&s};
  std::vector<rl::SimTrace> traces{eval::cv_baseline(s)};
  // Agent 1 leaves the road at step 3; everyone else tracks the expert exactly.
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t t = 0; t < traces[0].positions[i].size(); ++t) {
      traces[0].positions[i][t] = s.expert[i][t].pose.position;
      traces[0].valid[i][t] = 1;
    }
    traces[0].cause[i] = dynamics::Termination::kNone;
    traces[0].termination_step[i] = -1;
  }
  traces[0].cause[1] = Termination::kOffTrack;
  traces[0].termination_step[1] = 3;
  for (std::size_t t = 3; t < traces[0].valid[1].size(); ++t) traces[0].valid[1][t] = 0;
  const auto m = eval::metrics_from_traces(ptrs, traces);
  CHECK(m.n_agents == 4);
  CHECK(m.vru.n_agents == 1);
  CHECK(m.non_vru.n_agents == 3);
  CHECK(m.vru.offtrack_rate == 1.0);
  CHECK(m.non_vru.offtrack_rate == 0.0);
  CHECK(m.offtrack_rate == doctest::Approx(0.25));
  CHECK(m.rmse == doctest::Approx(0.0));
}
