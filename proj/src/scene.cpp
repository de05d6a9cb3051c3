#include "instasim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace instasim::scene {

namespace {
constexpr double kChainTolerance = 1e-9;
constexpr double kSplitTolerance = 1e-9;
}  // namespace

std::string to_string(ElementType type) {
  switch (type) {
    case ElementType::kLaneBoundary: return "lane_boundary";
    case ElementType::kRoadEdge: return "road_edge";
    case ElementType::kCrossing: return "crossing";
    case ElementType::kCenterline: return "centerline";
  }
  return "unknown";
}

ElementType element_type_from_string(const std::string& name) {
  if (name == "lane_boundary") return ElementType::kLaneBoundary;
  if (name == "road_edge") return ElementType::kRoadEdge;
  if (name == "crossing") return ElementType::kCrossing;
  if (name == "centerline") return ElementType::kCenterline;
  throw std::invalid_argument("unknown element type '" + name + "'");
}

double Polyline::length() const {
  double total = 0.0;
  for (const auto& v : vectors) total += (v.end - v.start).norm();
  return total;
}

std::vector<Vec2> Polyline::global_points() const {
  std::vector<Vec2> out;
  if (vectors.empty()) return out;
  out.reserve(vectors.size() + 1);
  out.push_back(geometry::to_global(vectors.front().start, anchor));
  for (const auto& v : vectors) out.push_back(geometry::to_global(v.end, anchor));
  return out;
}

Polyline make_polyline(std::span<const Vec2> points, ElementType type) {
  std::vector<Vec2> chain;
  for (const Vec2& p : points) {
    if (chain.empty() || (p - chain.back()).norm() > kChainTolerance) chain.push_back(p);
  }
  if (chain.size() < 2) throw std::invalid_argument("make_polyline: need two distinct points");

  Vec2 mean;
  for (const Vec2& p : chain) mean = mean + p;
  mean = mean * (1.0 / static_cast<double>(chain.size()));

  Vec2 chord = chain.back() - chain.front();
  if (chord.norm() < kChainTolerance) chord = chain[1] - chain[0];  // closed loop

  Polyline poly;
  poly.element_type = type;
  poly.anchor = {mean, geometry::normalize_angle(std::atan2(chord.y, chord.x))};
  poly.vectors.reserve(chain.size() - 1);
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    poly.vectors.push_back({geometry::to_local(chain[i], poly.anchor),
                            geometry::to_local(chain[i + 1], poly.anchor), type});
  }
  return poly;
}

std::vector<Polyline> split_map_element(std::span<const Vec2> points, double max_len,
                                        ElementType type) {
  if (points.size() < 2) throw std::invalid_argument("split_map_element: fewer than 2 points");
  if (!(max_len > 0.0)) throw std::invalid_argument("split_map_element: max_len must be > 0");

  std::vector<std::vector<Vec2>> pieces;
  std::vector<Vec2> current{points[0]};
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Vec2 a = points[i];
    const Vec2 b = points[i + 1];
    const double seg_len = (b - a).norm();
    if (seg_len <= kChainTolerance) continue;
    double pos = 0.0;
    while (acc + (seg_len - pos) > max_len + kSplitTolerance) {
      const double take = max_len - acc;
      pos += take;
      const Vec2 cut = a + (b - a) * (pos / seg_len);
      current.push_back(cut);
      pieces.push_back(std::move(current));
      current = {cut};
      acc = 0.0;
    }
    current.push_back(b);
    acc += seg_len - pos;
    if (acc >= max_len - kSplitTolerance && i + 2 < points.size()) {
      pieces.push_back(std::move(current));
      current = {b};
      acc = 0.0;
    }
  }
  if (current.size() >= 2) pieces.push_back(std::move(current));
  if (pieces.empty()) throw std::invalid_argument("split_map_element: degenerate element");

  std::vector<Polyline> out;
  out.reserve(pieces.size());
  for (const auto& piece : pieces) out.push_back(make_polyline(piece, type));
  return out;
}

std::vector<AnchorPose> Scenario::polyline_anchors() const {
  std::vector<AnchorPose> out;
  out.reserve(polylines.size());
  for (const auto& p : polylines) out.push_back(p.anchor);
  return out;
}

void validate(const Scenario& s) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("scenario: " + msg); };
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) fail("dt must be positive");
  if (s.horizon <= 0) fail("horizon must be positive");
  for (std::size_t i = 0; i < s.polylines.size(); ++i) {
    const Polyline& p = s.polylines[i];
    const std::string where = "polylines[" + std::to_string(i) + "]";
    if (p.vectors.empty()) fail(where + " has no vectors");
    geometry::validate(p.anchor);
    for (std::size_t l = 0; l < p.vectors.size(); ++l) {
      if ((p.vectors[l].end - p.vectors[l].start).norm() <= 0.0) fail(where + " has a zero-length vector");
      if (l + 1 < p.vectors.size() &&
          (p.vectors[l].end - p.vectors[l + 1].start).norm() > 1e-6) {
        fail(where + " is not chained");
      }
    }
    if (p.length() > kMaxPolylineLength + 1e-6) fail(where + " exceeds maximum length");
  }
  if (s.routes.empty()) fail("no routes");
  for (std::size_t r = 0; r < s.routes.size(); ++r) {
    const Route& route = s.routes[r];
    const std::string where = "routes[" + std::to_string(r) + "]";
    if (route.polyline_ids.empty()) fail(where + " is empty");
    for (int id : route.polyline_ids) {
      if (id < 0 || id >= static_cast<int>(s.polylines.size())) fail(where + " references a missing polyline");
    }
    if (!(route.corridor_halfwidth > 0.0)) fail(where + " corridor_halfwidth must be positive");
  }
  for (std::size_t a = 0; a < s.agents.size(); ++a) {
    const AgentSpec& agent = s.agents[a];
    const std::string where = "agents[" + std::to_string(a) + "]";
    geometry::validate(agent.pose);
    const AgentFeatures& f = agent.features;
    if (!(f.width > 0.0) || !(f.length > 0.0)) fail(where + " size must be positive");
    if (f.speed < 0.0) fail(where + " speed must be non-negative");
    if (!(f.speed_limit > 0.0)) fail(where + " speed_limit must be positive");
    if (agent.route_id < 0 || agent.route_id >= static_cast<int>(s.routes.size())) {
      fail(where + " references a missing route");
    }
    for (std::size_t b = 0; b < a; ++b) {
      const AgentSpec& other = s.agents[b];
      if (geometry::oriented_boxes_overlap(agent.pose, f.length, f.width, other.pose,
                                           other.features.length, other.features.width)) {
        fail(where + " overlaps agents[" + std::to_string(b) + "]");
      }
    }
  }
  if (s.has_expert()) {
    if (s.expert.size() != s.agents.size()) fail("expert must have one trajectory per agent");
    for (std::size_t a = 0; a < s.expert.size(); ++a) {
      if (s.expert[a].size() != static_cast<std::size_t>(s.horizon) + 1) {
        fail("expert[" + std::to_string(a) + "] must hold horizon + 1 steps");
      }
    }
  }
}

std::vector<int> neighbors_within(const AnchorPose& target, std::span<const AnchorPose> anchors,
                                  double radius) {
  std::vector<int> out;
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    if ((anchors[j].position - target.position).norm() <= radius) out.push_back(static_cast<int>(j));
  }
  return out;
}

RouteGeometry::RouteGeometry(const Route& route, std::span<const Polyline> polylines)
    : halfwidth_(route.corridor_halfwidth) {
  for (int id : route.polyline_ids) {
    for (const Vec2& p : polylines[static_cast<std::size_t>(id)].global_points()) {
      if (points_.empty() || (p - points_.back()).norm() > 1e-6) points_.push_back(p);
    }
  }
  cumulative_.assign(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    cumulative_[i] = cumulative_[i - 1] + (points_[i] - points_[i - 1]).norm();
  }
}

RouteGeometry::Projection RouteGeometry::project(const Vec2& p) const {
  Projection best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 a = points_[i];
    const Vec2 ab = points_[i + 1] - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + ab * t;
    const double dist = (p - q).norm();
    if (dist < best_dist) {
      best_dist = dist;
      const double seg_len = std::sqrt(len2);
      best.arc_length = cumulative_[i] + t * seg_len;
      best.lateral = dist;
      best.heading = std::atan2(ab.y, ab.x);
      const double side = ab.cross(p - a);
      best.signed_lateral = side >= 0.0 ? dist : -dist;
    }
  }
  return best;
}

Vec2 RouteGeometry::point_at(double s) const {
  if (points_.empty()) return {};
  if (s <= 0.0) return points_.front();
  if (s >= length()) {
    // Extrapolate along the final tangent.
    const std::size_t n = points_.size();
    const Vec2 dir = points_[n - 1] - points_[n - 2];
    return points_[n - 1] + dir * ((s - length()) / dir.norm());
  }
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  const double seg = cumulative_[i + 1] - cumulative_[i];
  const double t = seg > 0.0 ? (s - cumulative_[i]) / seg : 0.0;
  return points_[i] + (points_[i + 1] - points_[i]) * t;
}

double RouteGeometry::heading_at(double s) const {
  if (points_.size() < 2) return 0.0;
  std::size_t i = 0;
  if (s >= length()) {
    i = points_.size() - 2;
  } else if (s > 0.0) {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  }
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

std::vector<RouteGeometry> build_route_geometries(const Scenario& scenario) {
  std::vector<RouteGeometry> out;
  out.reserve(scenario.routes.size());
  for (const Route& r : scenario.routes) out.emplace_back(r, scenario.polylines);
  return out;
}

}  // namespace instasim::scene
