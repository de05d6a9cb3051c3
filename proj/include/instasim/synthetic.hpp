#ifndef INSTASIM_SYNTHETIC_HPP_
#define INSTASIM_SYNTHETIC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "instasim/dynamics.hpp"
#include "instasim/scene.hpp"

namespace instasim::synthetic {

enum class Template { kStraight, kCurve, kIntersection, kMerge };

std::string to_string(Template t);
// Throws std::invalid_argument for unknown names.
Template template_from_string(const std::string& name);

struct ExpertConfig {
  double time_gap = 1.5;         // s
  double max_accel = 2.0;        // m/s^2
  double comfortable_decel = 3.0;  // m/s^2
  double min_gap = 2.0;          // m, standstill distance
  double lookahead = 8.0;        // m, pure pursuit
};

struct GeneratorOptions {
  double speed_limit = scene::kDefaultSpeedLimit;
  double dt = scene::kDefaultDt;
  int horizon = scene::kDefaultHorizon;
  bool attach_expert = true;
  ExpertConfig expert;
};

// Deterministic in (template, n_agents, seed, options).
scene::Scenario generate_synthetic_scenario(Template tmpl, int n_agents, std::uint64_t seed,
                                            const GeneratorOptions& options = {});

// Scripted expert: constant-time-gap car following plus pure pursuit along
// the route centerline. Yields to crossing traffic that reaches a shared
// conflict point first.
class ScriptedExpert {
 public:
  ScriptedExpert(const scene::Scenario& scenario, ExpertConfig config = {});

  std::vector<dynamics::Action> act(const std::vector<dynamics::AgentState>& states) const;

  // Runs the expert for the scenario horizon without termination and returns
  // per-agent steps (horizon + 1 entries each).
  std::vector<std::vector<scene::ExpertStep>> rollout(
      const std::vector<dynamics::AgentState>& initial) const;

 private:
  struct Conflict {
    int route_a = 0;
    int route_b = 0;
    double arc_a = 0.0;
    double arc_b = 0.0;
  };

  double desired_speed(int agent) const;

  const scene::Scenario* scenario_;
  ExpertConfig config_;
  std::vector<scene::RouteGeometry> routes_;
  std::vector<Conflict> conflicts_;
  std::vector<double> desired_speed_;
};

// Subset of a scenario keeping `n_agents` agents evenly spaced in index
// order (agent k * N / n_agents), on the same map. The expert is re-run.
scene::Scenario take_agents(const scene::Scenario& scenario, int n_agents);

}  // namespace instasim::synthetic

#endif  // INSTASIM_SYNTHETIC_HPP_
