#ifndef INSTASIM_SCENE_HPP_
#define INSTASIM_SCENE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instasim/geometry.hpp"

namespace instasim::scene {

using geometry::AnchorPose;
using geometry::Vec2;

inline constexpr double kMaxPolylineLength = 10.0;
inline constexpr double kDefaultCorridorHalfwidth = 2.0;
inline constexpr double kDefaultSpeedLimit = 13.9;
inline constexpr double kDefaultDt = 0.2;
inline constexpr int kDefaultHorizon = 50;

enum class ElementType : int { kLaneBoundary = 0, kRoadEdge = 1, kCrossing = 2, kCenterline = 3 };
inline constexpr int kNumElementTypes = 4;

std::string to_string(ElementType type);
ElementType element_type_from_string(const std::string& name);

// One vector of a polyline, expressed in the polyline's local frame.
struct PolylineVector {
  Vec2 start;
  Vec2 end;
  ElementType type = ElementType::kCenterline;

  bool operator==(const PolylineVector&) const = default;
};

struct Polyline {
  std::vector<PolylineVector> vectors;
  AnchorPose anchor;
  ElementType element_type = ElementType::kCenterline;

  bool operator==(const Polyline&) const = default;

  double length() const;
  // Chain points (vectors.size() + 1 of them) in the global frame.
  std::vector<Vec2> global_points() const;
};

// Builds a polyline from a chain of global points: anchor at the mean of the
// points, x-axis along the first-to-last chord.
Polyline make_polyline(std::span<const Vec2> points, ElementType type);

// Cuts a chain into consecutive polylines of at most `max_len` total length.
std::vector<Polyline> split_map_element(std::span<const Vec2> points, double max_len,
                                        ElementType type = ElementType::kCenterline);

struct AgentFeatures {
  double width = 2.0;
  double length = 4.5;
  double speed = 0.0;
  double speed_limit = kDefaultSpeedLimit;
  bool vru = false;

  bool operator==(const AgentFeatures&) const = default;
};

struct Route {
  std::vector<int> polyline_ids;
  double corridor_halfwidth = kDefaultCorridorHalfwidth;

  bool operator==(const Route&) const = default;
};

struct AgentSpec {
  AgentFeatures features;
  AnchorPose pose;
  int route_id = 0;

  bool operator==(const AgentSpec&) const = default;
};

// One recorded expert step: the state before acting and the action taken.
struct ExpertStep {
  AnchorPose pose;
  double speed = 0.0;
  double accel = 0.0;
  double steer = 0.0;

  bool operator==(const ExpertStep&) const = default;
};

struct Scenario {
  std::vector<Polyline> polylines;
  std::vector<Route> routes;
  std::vector<AgentSpec> agents;
  // expert[agent] holds horizon + 1 steps (the final one carries no action);
  // empty when no expert data is attached.
  std::vector<std::vector<ExpertStep>> expert;
  double dt = kDefaultDt;
  int horizon = kDefaultHorizon;
  std::uint64_t seed = 0;

  bool operator==(const Scenario&) const = default;

  bool has_expert() const { return !expert.empty(); }
  std::vector<AnchorPose> polyline_anchors() const;
};

// Throws std::invalid_argument describing the first violated invariant.
void validate(const Scenario& scenario);

// Indices j with |p_j - p_target| <= radius, in input order.
std::vector<int> neighbors_within(const AnchorPose& target, std::span<const AnchorPose> anchors,
                                  double radius);

// Global centerline of a route with arc-length parametrisation.
class RouteGeometry {
 public:
  RouteGeometry() = default;
  RouteGeometry(const Route& route, std::span<const Polyline> polylines);

  struct Projection {
    double arc_length = 0.0;  // along the chain, clamped to [0, length]
    double lateral = 0.0;     // unsigned distance to the chain
    double signed_lateral = 0.0;  // positive to the left of travel
    double heading = 0.0;     // tangent heading at the projection
  };

  Projection project(const Vec2& p) const;
  Vec2 point_at(double arc_length) const;
  double heading_at(double arc_length) const;
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  double halfwidth() const { return halfwidth_; }
  const std::vector<Vec2>& points() const { return points_; }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
  double halfwidth_ = kDefaultCorridorHalfwidth;
};

std::vector<RouteGeometry> build_route_geometries(const Scenario& scenario);

}  // namespace instasim::scene

#endif  // INSTASIM_SCENE_HPP_
