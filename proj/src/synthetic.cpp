#include "instasim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace instasim::synthetic {

using dynamics::Action;
using dynamics::AgentState;
using geometry::AnchorPose;
using geometry::Vec2;
using scene::ElementType;
using scene::Scenario;

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kSampleSpacing = 5.0;
constexpr double kMaxClosing = 1.0;  // m/s

std::vector<Vec2> sample_line(Vec2 a, Vec2 b, double spacing) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return pts;
}

void append_chain(std::vector<Vec2>& chain, const std::vector<Vec2>& more) {
  for (const Vec2& p : more) {
    if (chain.empty() || (p - chain.back()).norm() > 1e-9) chain.push_back(p);
  }
}

// Offsets a chain to the left of travel by `offset` metres.
std::vector<Vec2> offset_chain(const std::vector<Vec2>& pts, double offset) {
  std::vector<Vec2> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 prev = pts[i == 0 ? 0 : i - 1];
    const Vec2 next = pts[std::min(i + 1, pts.size() - 1)];
    Vec2 dir = next - prev;
    dir = dir * (1.0 / dir.norm());
    out[i] = pts[i] + Vec2{-dir.y, dir.x} * offset;
  }
  return out;
}

// Adds a map element split into <= 10 m polylines; returns their ids.
std::vector<int> add_element(Scenario& s, const std::vector<Vec2>& pts, ElementType type) {
  std::vector<int> ids;
  for (auto& poly : scene::split_map_element(pts, scene::kMaxPolylineLength, type)) {
    ids.push_back(static_cast<int>(s.polylines.size()));
    s.polylines.push_back(std::move(poly));
  }
  return ids;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_hash(std::uint64_t seed, std::uint64_t salt) {
  return static_cast<double>(mix(seed ^ mix(salt)) >> 11) * 0x1.0p-53;
}

struct Lane {
  int route_id = 0;
  double spawn_begin = 0.0;  // arc length range for initial placement
  double spawn_end = 0.0;
};

struct Placement {
  std::mt19937_64 rng;
  double speed_limit;
  ExpertConfig expert;
  Placement(std::uint64_t seed, double limit, const ExpertConfig& e) : rng(seed), speed_limit(limit), expert(e) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

// Places agents on lanes front-to-back. A follower starts no faster than its leader plus
// kMaxClosing and no faster than the expert's equilibrium speed for its gap.
void place_agents(Scenario& s, const std::vector<Lane>& lanes, int n_agents, Placement& rand) {
  const auto routes = scene::build_route_geometries(s);
  std::vector<std::vector<int>> per_lane(lanes.size());
  for (int i = 0; i < n_agents; ++i) per_lane[static_cast<std::size_t>(i) % lanes.size()].push_back(i);

  s.agents.assign(static_cast<std::size_t>(n_agents), {});
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    const Lane& lane = lanes[l];
    const auto& geom = routes[static_cast<std::size_t>(lane.route_id)];
    double arc = lane.spawn_end - rand.uniform(0.0, 6.0);
    double prev_half_length = 0.0;
    double prev_fraction = 1.0;
    bool first = true;
    for (int idx : per_lane[l]) {
      scene::AgentSpec spec;
      spec.features.width = rand.uniform(1.8, 2.0);
      spec.features.length = rand.uniform(4.2, 5.0);
      const double speed_fraction = rand.uniform(0.4, 1.0);
      const double gap_extra = rand.uniform(0.0, 12.0);
      const double lateral = rand.uniform(-0.3, 0.3);
      const double heading_noise = rand.uniform(-0.015, 0.015);
      spec.route_id = lane.route_id;
      double fraction = speed_fraction;
      if (!first) {
        const double gap = 6.0 + gap_extra;
        arc -= prev_half_length + 0.5 * spec.features.length + gap;
        const double cap = std::min(prev_fraction * rand.speed_limit + kMaxClosing, (gap - rand.expert.min_gap) / rand.expert.time_gap);
        fraction = std::min(fraction, cap / rand.speed_limit);
      }
      first = false;
      prev_half_length = 0.5 * spec.features.length;
      prev_fraction = fraction;
      // Fraction of the speed limit; scaled once the limit is known.
      spec.features.speed = fraction;
      const Vec2 base = geom.point_at(arc);
      const double heading = geom.heading_at(arc);
      spec.pose.position = base + Vec2{-std::sin(heading), std::cos(heading)} * lateral;
      spec.pose.heading = geometry::normalize_angle(heading + heading_noise);
      s.agents[static_cast<std::size_t>(idx)] = spec;
    }
    // Shift the whole column forward if it spilled past the spawn window.
    if (arc < lane.spawn_begin) {
      const double shift = lane.spawn_begin - arc;
      for (int idx : per_lane[l]) {
        auto& spec = s.agents[static_cast<std::size_t>(idx)];
        const auto proj = geom.project(spec.pose.position);
        const double lateral = proj.signed_lateral;
        const double heading_offset = spec.pose.heading - proj.heading;
        const double new_arc = proj.arc_length + shift;
        const double heading = geom.heading_at(new_arc);
        spec.pose.position = geom.point_at(new_arc) + Vec2{-std::sin(heading), std::cos(heading)} * lateral;
        spec.pose.heading = geometry::normalize_angle(heading + heading_offset);
      }
    }
  }
}

Scenario build_straight(int n_agents, Placement& rand) {
  Scenario s;
  const int per_lane = (n_agents + 1) / 2;
  const double spawn_len = std::max(60.0, 26.0 * per_lane);
  const double road_length = 20.0 + spawn_len + 200.0;
  const std::vector<Vec2> ref = sample_line({0.0, 0.0}, {road_length, 0.0}, kSampleSpacing);
  std::vector<int> route0 = add_element(s, offset_chain(ref, 0.0), ElementType::kCenterline);
  std::vector<int> route1 = add_element(s, offset_chain(ref, kLaneWidth), ElementType::kCenterline);
  add_element(s, offset_chain(ref, -0.5 * kLaneWidth), ElementType::kRoadEdge);
  add_element(s, offset_chain(ref, 0.5 * kLaneWidth), ElementType::kLaneBoundary);
  add_element(s, offset_chain(ref, 1.5 * kLaneWidth), ElementType::kRoadEdge);
  s.routes.push_back({route0, scene::kDefaultCorridorHalfwidth});
  s.routes.push_back({route1, scene::kDefaultCorridorHalfwidth});
  place_agents(s, {{0, 10.0, 20.0 + spawn_len}, {1, 10.0, 20.0 + spawn_len}}, n_agents, rand);
  return s;
}

Scenario build_curve(int n_agents, Placement& rand) {
  Scenario s;
  const int per_lane = (n_agents + 1) / 2;
  const double spawn_len = std::max(60.0, 26.0 * per_lane);
  const double radius = 60.0;
  std::vector<Vec2> ref;
  append_chain(ref, sample_line({-spawn_len, 0.0}, {60.0, 0.0}, kSampleSpacing));
  const int arc_steps = 40;
  std::vector<Vec2> arc;
  for (int i = 0; i <= arc_steps; ++i) {
    const double phi = 0.5 * std::numbers::pi * i / arc_steps;
    arc.push_back({60.0 + radius * std::sin(phi), radius - radius * std::cos(phi)});
  }
  append_chain(ref, arc);
  append_chain(ref, sample_line({120.0, 60.0}, {120.0, 260.0}, kSampleSpacing));
  std::vector<int> route0 = add_element(s, offset_chain(ref, 0.0), ElementType::kCenterline);
  std::vector<int> route1 = add_element(s, offset_chain(ref, kLaneWidth), ElementType::kCenterline);
  add_element(s, offset_chain(ref, -0.5 * kLaneWidth), ElementType::kRoadEdge);
  add_element(s, offset_chain(ref, 0.5 * kLaneWidth), ElementType::kLaneBoundary);
  add_element(s, offset_chain(ref, 1.5 * kLaneWidth), ElementType::kRoadEdge);
  s.routes.push_back({route0, scene::kDefaultCorridorHalfwidth});
  s.routes.push_back({route1, scene::kDefaultCorridorHalfwidth});
  place_agents(s, {{0, 5.0, spawn_len + 40.0}, {1, 5.0, spawn_len + 40.0}}, n_agents, rand);
  return s;
}

Scenario build_intersection(int n_agents, Placement& rand) {
  Scenario s;
  const int per_lane = (n_agents + 3) / 4;
  const double spawn_len = std::max(88.0, 26.0 * per_lane);
  const double arm = std::max(150.0, spawn_len + 62.0);
  const double half = 0.5 * kLaneWidth;
  // Right-hand traffic, one lane per direction.
  const std::vector<std::pair<Vec2, Vec2>> paths = {
      {{-arm, -half}, {arm, -half}},  // westbound entry, heading east
      {{arm, half}, {-arm, half}},    // heading west
      {{half, -arm}, {half, arm}},    // heading north
      {{-half, arm}, {-half, -arm}},  // heading south
  };
  for (const auto& [a, b] : paths) {
    auto ids = add_element(s, sample_line(a, b, kSampleSpacing), ElementType::kCenterline);
    s.routes.push_back({ids, scene::kDefaultCorridorHalfwidth});
  }
  const double box = kLaneWidth;
  // Road edges and the centre divider per arm, outside the junction box.
  for (int sign : {-1, 1}) {
    const double far = sign * arm;
    const double near = sign * box;
    for (double off : {-kLaneWidth, kLaneWidth}) {
      add_element(s, sample_line({near, off}, {far, off}, kSampleSpacing), ElementType::kRoadEdge);
      add_element(s, sample_line({off, near}, {off, far}, kSampleSpacing), ElementType::kRoadEdge);
    }
    add_element(s, sample_line({near, 0.0}, {far, 0.0}, kSampleSpacing), ElementType::kLaneBoundary);
    add_element(s, sample_line({0.0, near}, {0.0, far}, kSampleSpacing), ElementType::kLaneBoundary);
    const double cw = sign * (box + 3.0);
    add_element(s, {{cw, -kLaneWidth}, {cw, kLaneWidth}}, ElementType::kCrossing);
    add_element(s, {{-kLaneWidth, cw}, {kLaneWidth, cw}}, ElementType::kCrossing);
  }
  std::vector<Lane> lanes;
  for (int r = 0; r < 4; ++r) lanes.push_back({r, arm - 12.0 - spawn_len, arm - 12.0});
  place_agents(s, lanes, n_agents, rand);
  return s;
}

Scenario build_merge(int n_agents, Placement& rand) {
  Scenario s;
  const double merge_x = 110.0;
  const int per_lane = (n_agents + 1) / 2;
  // Extra lead-in for long columns.
  const double lead = std::max(0.0, 26.0 * per_lane - 50.0);
  const std::vector<Vec2> main = sample_line({-lead, 0.0}, {380.0, 0.0}, kSampleSpacing);
  std::vector<int> main_ids = add_element(s, main, ElementType::kCenterline);
  std::vector<Vec2> ramp;
  if (lead > 0.0) ramp = sample_line({10.0 - lead, -20.0}, {10.0, -20.0}, kSampleSpacing);
  const Vec2 p0{10.0, -20.0}, p1{50.0, -20.0}, p2{70.0, 0.0}, p3{merge_x, 0.0};
  const int steps = 24;
  for (int i = ramp.empty() ? 0 : 1; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double u = 1.0 - t;
    ramp.push_back(p0 * (u * u * u) + p1 * (3 * u * u * t) + p2 * (3 * u * t * t) + p3 * (t * t * t));
  }
  std::vector<int> ramp_ids = add_element(s, ramp, ElementType::kCenterline);
  add_element(s, offset_chain(main, 0.5 * kLaneWidth), ElementType::kRoadEdge);
  add_element(s, sample_line({merge_x, -0.5 * kLaneWidth}, {380.0, -0.5 * kLaneWidth}, kSampleSpacing),
              ElementType::kRoadEdge);
  add_element(s, offset_chain(ramp, -0.5 * kLaneWidth), ElementType::kRoadEdge);
  s.routes.push_back({main_ids, scene::kDefaultCorridorHalfwidth});
  std::vector<int> ramp_route = ramp_ids;
  for (int id : main_ids) {
    const auto pts = s.polylines[static_cast<std::size_t>(id)].global_points();
    if (pts.front().x >= merge_x - 1e-6) ramp_route.push_back(id);
  }
  s.routes.push_back({ramp_route, scene::kDefaultCorridorHalfwidth});
  place_agents(s, {{0, 5.0, 100.0 + lead}, {1, 0.0, 50.0 + lead}}, n_agents, rand);
  return s;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d, double& ta, double& tc) {
  const Vec2 r = b - a;
  const Vec2 s = d - c;
  const double denom = r.cross(s);
  if (std::abs(denom) < 1e-12) return false;  // parallel or collinear
  ta = (c - a).cross(s) / denom;
  tc = (c - a).cross(r) / denom;
  const double eps = 1e-9;
  return ta >= -eps && ta <= 1.0 + eps && tc >= -eps && tc <= 1.0 + eps;
}

}  // namespace

std::string to_string(Template t) {
  switch (t) {
    case Template::kStraight: return "straight";
    case Template::kCurve: return "curve";
    case Template::kIntersection: return "intersection";
    case Template::kMerge: return "merge";
  }
  return "unknown";
}

Template template_from_string(const std::string& name) {
  if (name == "straight") return Template::kStraight;
  if (name == "curve") return Template::kCurve;
  if (name == "intersection") return Template::kIntersection;
  if (name == "merge") return Template::kMerge;
  throw std::invalid_argument("unknown scenario template '" + name + "'");
}

ScriptedExpert::ScriptedExpert(const Scenario& scenario, ExpertConfig config)
    : scenario_(&scenario), config_(config), routes_(scene::build_route_geometries(scenario)) {
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    desired_speed_.push_back(scenario.agents[i].features.speed_limit *
                             (0.85 + 0.15 * unit_hash(scenario.seed, i)));
  }
  // First crossing point between every ordered pair of route centerlines.
  for (std::size_t ra = 0; ra < routes_.size(); ++ra) {
    for (std::size_t rb = 0; rb < routes_.size(); ++rb) {
      if (ra == rb) continue;
      const auto& pa = routes_[ra].points();
      const auto& pb = routes_[rb].points();
      bool found = false;
      double arc_a_base = 0.0;
      for (std::size_t i = 0; i + 1 < pa.size() && !found; ++i) {
        double arc_b_base = 0.0;
        for (std::size_t j = 0; j + 1 < pb.size(); ++j) {
          double ta = 0.0, tb = 0.0;
          if (segments_intersect(pa[i], pa[i + 1], pb[j], pb[j + 1], ta, tb)) {
            conflicts_.push_back({static_cast<int>(ra), static_cast<int>(rb),
                                  arc_a_base + ta * (pa[i + 1] - pa[i]).norm(),
                                  arc_b_base + tb * (pb[j + 1] - pb[j]).norm()});
            found = true;
            break;
          }
          arc_b_base += (pb[j + 1] - pb[j]).norm();
        }
        arc_a_base += (pa[i + 1] - pa[i]).norm();
      }
    }
  }
}

double ScriptedExpert::desired_speed(int agent) const {
  return desired_speed_[static_cast<std::size_t>(agent)];
}

std::vector<Action> ScriptedExpert::act(const std::vector<AgentState>& states) const {
  const std::size_t n = states.size();
  std::vector<scene::RouteGeometry::Projection> own(n);
  for (std::size_t i = 0; i < n; ++i) {
    own[i] = routes_[static_cast<std::size_t>(states[i].route_id)].project(states[i].pose.position);
  }
  const double sqrt_ab = std::sqrt(config_.max_accel * config_.comfortable_decel);

  std::vector<Action> actions(n);
  for (std::size_t i = 0; i < n; ++i) {
    const AgentState& me = states[i];
    if (!me.alive) continue;
    const auto& route = routes_[static_cast<std::size_t>(me.route_id)];
    const double v = me.speed();
    const double s_me = own[i].arc_length;

    double gap = std::numeric_limits<double>::infinity();
    double lead_speed = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !states[j].alive) continue;
      const AgentState& other = states[j];
      const auto proj = route.project(other.pose.position);
      if (proj.lateral > route.halfwidth() + 0.5 * other.features.width) continue;
      if (proj.arc_length <= s_me) continue;
      const double g = proj.arc_length - s_me - 0.5 * (me.features.length + other.features.length);
      if (g < gap) {
        gap = g;
        lead_speed = other.speed() * std::cos(other.pose.heading - proj.heading);
      }
    }
    for (const Conflict& c : conflicts_) {
      if (c.route_a != me.route_id) continue;
      const double d_me = c.arc_a - s_me;
      if (d_me < 0.0 || d_me > 40.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !states[j].alive || states[j].route_id != c.route_b) continue;
        const double d_other = c.arc_b - own[j].arc_length;
        if (d_other < -(states[j].features.length + 2.0) || d_other > 60.0) continue;
        const double t_me = d_me / std::max(v, 1.0);
        const double t_other = std::max(d_other, 0.0) / std::max(states[j].speed(), 1.0);
        if (t_other < t_me || (t_other == t_me && j < i)) {
          const double g = d_me - 0.5 * me.features.length - 0.5 * states[j].features.width - 2.0;
          if (g < gap) {
            gap = g;
            lead_speed = 0.0;
          }
        }
      }
    }

    const double v0 = desired_speed(static_cast<int>(i));
    double accel = config_.max_accel * (1.0 - std::pow(v / v0, 4));
    if (std::isfinite(gap)) {
      const double dv = v - lead_speed;
      const double s_star = config_.min_gap + std::max(0.0, v * config_.time_gap + v * dv / (2.0 * sqrt_ab));
      const double s = std::max(gap, 0.1);
      accel -= config_.max_accel * (s_star / s) * (s_star / s);
    }
    accel = std::clamp(accel, dynamics::kMinAccel, config_.max_accel);

    const Vec2 target = route.point_at(s_me + config_.lookahead);
    const Vec2 local = geometry::to_local(target, me.pose);
    const double ld = std::max(local.norm(), 1e-3);
    const double alpha = std::atan2(local.y, local.x);
    const double steer = std::atan(2.0 * dynamics::wheelbase(me.features) * std::sin(alpha) / ld);
    actions[i] = Action{accel, steer}.clamped();
  }
  return actions;
}

std::vector<std::vector<scene::ExpertStep>> ScriptedExpert::rollout(
    const std::vector<AgentState>& initial) const {
  const int horizon = scenario_->horizon;
  std::vector<std::vector<scene::ExpertStep>> out(initial.size());
  std::vector<AgentState> states = initial;
  for (int t = 0; t <= horizon; ++t) {
    const auto actions = t < horizon ? act(states) : std::vector<Action>(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      out[i].push_back({states[i].pose, states[i].speed(), actions[i].accel, actions[i].steer});
    }
    if (t == horizon) break;
    for (std::size_t i = 0; i < states.size(); ++i) {
      states[i] = dynamics::bicycle_step(states[i], actions[i], scenario_->dt);
    }
  }
  return out;
}

Scenario generate_synthetic_scenario(Template tmpl, int n_agents, std::uint64_t seed,
                                     const GeneratorOptions& options) {
  if (n_agents < 1) throw std::invalid_argument("generate_synthetic_scenario: n_agents must be >= 1");
  Placement rand(mix(seed) ^ mix(static_cast<std::uint64_t>(tmpl) + 17), options.speed_limit, options.expert);
  Scenario s;
  switch (tmpl) {
    case Template::kStraight: s = build_straight(n_agents, rand); break;
    case Template::kCurve: s = build_curve(n_agents, rand); break;
    case Template::kIntersection: s = build_intersection(n_agents, rand); break;
    case Template::kMerge: s = build_merge(n_agents, rand); break;
  }
  s.dt = options.dt;
  s.horizon = options.horizon;
  s.seed = seed;
  for (auto& agent : s.agents) {
    agent.features.speed_limit = options.speed_limit;
    // place_agents stores the initial speed as a fraction of the desired speed.
    agent.features.speed *= options.speed_limit;
  }
  if (options.attach_expert) {
    ScriptedExpert expert(s, options.expert);
    s.expert = expert.rollout(dynamics::initial_states(s));
  }
  scene::validate(s);
  return s;
}

Scenario take_agents(const Scenario& scenario, int n_agents) {
  if (n_agents < 1 || n_agents > static_cast<int>(scenario.agents.size())) {
    throw std::invalid_argument("take_agents: agent count out of range");
  }
  Scenario s = scenario;
  const std::size_t total = scenario.agents.size();
  s.agents.clear();
  for (std::size_t k = 0; k < static_cast<std::size_t>(n_agents); ++k) {
    s.agents.push_back(scenario.agents[k * total / static_cast<std::size_t>(n_agents)]);
  }
  if (scenario.has_expert()) {
    s.expert.clear();
    ScriptedExpert expert(s);
    s.expert = expert.rollout(dynamics::initial_states(s));
  }
  return s;
}

}  // namespace instasim::synthetic
