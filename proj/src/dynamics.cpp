#include "instasim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace instasim::dynamics {

Action Action::clamped() const {
  return {std::clamp(accel, kMinAccel, kMaxAccel), std::clamp(steer, -kMaxSteer, kMaxSteer)};
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kCollision: return "collision";
    case Termination::kOffTrack: return "off_track";
    case Termination::kFinished: return "finished";
  }
  return "unknown";
}

double wheelbase(const AgentFeatures& features) { return 0.6 * features.length; }

AgentState bicycle_step(const AgentState& state, Action action, double dt) {
  const Action a = action.clamped();
  AgentState next = state;
  const double v = state.features.speed;
  const double tan_steer = std::tan(a.steer);
  const double slip = std::atan(0.5 * tan_steer);
  const double theta = state.pose.heading;
  next.pose.position.x += v * std::cos(theta + slip) * dt;
  next.pose.position.y += v * std::sin(theta + slip) * dt;
  next.pose.heading = geometry::normalize_angle(
      theta + v * std::cos(slip) * tan_steer / wheelbase(state.features) * dt);
  next.features.speed = std::max(0.0, v + a.accel * dt);
  return next;
}

std::vector<std::pair<int, int>> check_collision(std::span<const AgentState> states) {
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].alive) continue;
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      if (!states[j].alive) continue;
      const auto& a = states[i];
      const auto& b = states[j];
      // Cheap bounding-circle reject first.
      const double reach = 0.5 * (std::hypot(a.features.length, a.features.width) +
                                  std::hypot(b.features.length, b.features.width));
      if ((a.pose.position - b.pose.position).norm() > reach) continue;
      if (geometry::oriented_boxes_overlap(a.pose, a.features.length, a.features.width, b.pose,
                                           b.features.length, b.features.width)) {
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return pairs;
}

bool check_off_track(const AgentState& state, const scene::RouteGeometry& route) {
  return route.project(state.pose.position).lateral > route.halfwidth();
}

bool check_off_track(const AgentState& state, const scene::Route& route,
                     std::span<const scene::Polyline> polylines) {
  return check_off_track(state, scene::RouteGeometry(route, polylines));
}

bool reached_route_end(const AgentState& state, const scene::RouteGeometry& route) {
  return route.project(state.pose.position).arc_length >= route.length() - 1e-9;
}

std::vector<AgentState> initial_states(const scene::Scenario& scenario) {
  std::vector<AgentState> states;
  states.reserve(scenario.agents.size());
  for (const auto& spec : scenario.agents) {
    AgentState s;
    s.pose = spec.pose;
    s.features = spec.features;
    s.route_id = spec.route_id;
    states.push_back(s);
  }
  return states;
}

Simulator::Simulator(const scene::Scenario& scenario)
    : scenario_(&scenario), routes_(scene::build_route_geometries(scenario)) {}

StepOutcome Simulator::step(std::span<const AgentState> states, std::span<const Action> actions,
                            int step_index) const {
  if (actions.size() != states.size()) {
    throw std::invalid_argument("simulation_step: expected " + std::to_string(states.size()) +
                                " actions, got " + std::to_string(actions.size()));
  }
  StepOutcome out;
  out.states.assign(states.begin(), states.end());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].alive) out.states[i] = bicycle_step(states[i], actions[i], scenario_->dt);
  }

  std::vector<Termination> cause(states.size(), Termination::kNone);
  for (const auto& [i, j] : check_collision(out.states)) {
    cause[static_cast<std::size_t>(i)] = Termination::kCollision;
    cause[static_cast<std::size_t>(j)] = Termination::kCollision;
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!out.states[i].alive || cause[i] != Termination::kNone) continue;
    const auto& route = routes_[static_cast<std::size_t>(out.states[i].route_id)];
    if (reached_route_end(out.states[i], route)) {
      cause[i] = Termination::kFinished;
    } else if (check_off_track(out.states[i], route)) {
      cause[i] = Termination::kOffTrack;
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (cause[i] == Termination::kNone) continue;
    out.states[i].alive = false;
    out.states[i].termination = cause[i];
    out.events.push_back({static_cast<int>(i), cause[i], step_index});
  }
  return out;
}

StepOutcome simulation_step(const scene::Scenario& scenario, std::span<const AgentState> states,
                            std::span<const Action> actions, int step_index) {
  return Simulator(scenario).step(states, actions, step_index);
}

}  // namespace instasim::dynamics
