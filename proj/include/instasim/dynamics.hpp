#ifndef INSTASIM_DYNAMICS_HPP_
#define INSTASIM_DYNAMICS_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "instasim/scene.hpp"

namespace instasim::dynamics {

using geometry::AnchorPose;
using scene::AgentFeatures;

inline constexpr double kMinAccel = -8.0;
inline constexpr double kMaxAccel = 5.0;
inline constexpr double kMaxSteer = 0.55;

struct Action {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad

  bool operator==(const Action&) const = default;
  Action clamped() const;
};

enum class Termination : int { kNone = 0, kCollision = 1, kOffTrack = 2, kFinished = 3 };
std::string to_string(Termination t);

struct AgentState {
  AnchorPose pose;
  // features.speed is the agent's current speed.
  AgentFeatures features;
  int route_id = 0;
  bool alive = true;
  Termination termination = Termination::kNone;

  bool operator==(const AgentState&) const = default;
  double speed() const { return features.speed; }
};

struct TerminationEvent {
  int agent_id = 0;
  Termination cause = Termination::kNone;
  int step = 0;

  bool operator==(const TerminationEvent&) const = default;
};

struct StepOutcome {
  std::vector<AgentState> states;
  std::vector<TerminationEvent> events;  // sorted by agent id
};

// Center-referenced kinematic bicycle, forward Euler. Wheelbase is
// 0.6 * length and the slip point sits mid-wheelbase.
AgentState bicycle_step(const AgentState& state, Action action, double dt);

double wheelbase(const AgentFeatures& features);

// Unordered pairs (i < j) of alive agents whose boxes overlap.
std::vector<std::pair<int, int>> check_collision(std::span<const AgentState> states);

// True iff the agent centre is farther than the corridor half-width from the
// route centerline.
bool check_off_track(const AgentState& state, const scene::RouteGeometry& route);
bool check_off_track(const AgentState& state, const scene::Route& route,
                     std::span<const scene::Polyline> polylines);

bool reached_route_end(const AgentState& state, const scene::RouteGeometry& route);

std::vector<AgentState> initial_states(const scene::Scenario& scenario);

// Steps all agents of one scenario. Route geometry is built once.
class Simulator {
 public:
  explicit Simulator(const scene::Scenario& scenario);

  // `actions` holds one entry per agent slot; entries of terminated agents
  // are ignored. Throws std::invalid_argument on a size mismatch.
  StepOutcome step(std::span<const AgentState> states, std::span<const Action> actions,
                   int step_index) const;

  const scene::Scenario& scenario() const { return *scenario_; }
  const scene::RouteGeometry& route(int id) const { return routes_[static_cast<std::size_t>(id)]; }
  const std::vector<scene::RouteGeometry>& routes() const { return routes_; }

 private:
  const scene::Scenario* scenario_;
  std::vector<scene::RouteGeometry> routes_;
};

StepOutcome simulation_step(const scene::Scenario& scenario, std::span<const AgentState> states,
                            std::span<const Action> actions, int step_index = 0);

}  // namespace instasim::dynamics

#endif  // INSTASIM_DYNAMICS_HPP_
