#ifndef INSTASIM_EVAL_HPP_
#define INSTASIM_EVAL_HPP_

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "instasim/dynamics.hpp"
#include "instasim/encoder/agent_centric.hpp"
#include "instasim/rl/policy.hpp"
#include "instasim/rl/rollout.hpp"

namespace instasim::eval {

using geometry::Vec2;

struct Trajectory {
  std::vector<Vec2> positions;
  std::vector<char> valid;  // empty means every step is valid
};

// Per agent: root-mean-square position error over steps valid in both, then
// the unweighted mean over agents with at least one such step. Throws
// std::invalid_argument when no agent has an overlapping step.
double rmse(std::span<const Trajectory> simulated, std::span<const Trajectory> truth);

// Fraction of agents whose first termination cause is `cause`.
double termination_rate(std::span<const dynamics::TerminationEvent> events, int n_agents, dynamics::Termination cause);
double offtrack_rate(std::span<const dynamics::TerminationEvent> events, int n_agents);
double collision_rate(std::span<const dynamics::TerminationEvent> events, int n_agents);

struct ClassMetrics {
  double rmse = 0.0;
  double offtrack_rate = 0.0;
  double collision_rate = 0.0;
  int n_agents = 0;
};

struct MetricsReport {
  double rmse = 0.0;
  double offtrack_rate = 0.0;
  double collision_rate = 0.0;
  ClassMetrics vru;
  ClassMetrics non_vru;
  int n_agents = 0;

  double termination_rate() const { return offtrack_rate + collision_rate; }
  nlohmann::json to_json() const;
};

// RMSE / max(1e-3, 1 - offtrack - collision).
double selection_score(double rmse, double offtrack, double collision);
inline double selection_score(const MetricsReport& m) {
  return selection_score(m.rmse, m.offtrack_rate, m.collision_rate);
}

// Metrics of closed-loop traces against the scenarios' expert trajectories.
// The initial state is excluded from the RMSE, as is the step at which an
// agent terminates.
MetricsReport metrics_from_traces(std::span<const scene::Scenario* const> scenarios,
                                  std::span<const rl::SimTrace> traces);

// Straight-line extrapolation at initial speed and heading, with the usual
// termination checks.
rl::SimTrace cv_baseline(const scene::Scenario& scenario);
MetricsReport evaluate_cv(std::span<const scene::Scenario* const> scenarios);

// Closed loop with the policy mean.
MetricsReport evaluate_policy(const rl::BehaviorModel& model, std::span<const scene::Scenario* const> scenarios,
                              int workers = 1, bool use_cache = true);

struct ThroughputReport {
  double isps = 0.0;
  int n_envs = 0;
  std::vector<int> agent_counts;
  int horizon = 0;
  double elapsed = 0.0;             // s, median over repetitions
  double initial_step_latency = 0.0;     // s
  double subsequent_step_latency = 0.0;  // s, mean over steps 1..H-1
  int repetitions = 0;

  nlohmann::json to_json() const;
};

// H * sum(agent_counts) / elapsed
double isps_formula(int horizon, std::span<const int> agent_counts, double elapsed);

// Times policy forward passes only. Agents are stepped with the policy mean
// but never terminated, so agent counts stay fixed.
ThroughputReport isps_benchmark(const rl::BehaviorModel& model, std::span<const scene::Scenario* const> envs,
                                int horizon, int repetitions, int warmup = 3, int workers = 1);

struct ScalingRow {
  int n_agents = 0;
  int n_polylines = 0;
  encoder::EncoderCounters instance;
  encoder::EncoderCounters agent_centric;
  double instance_initial_ms = 0.0;
  double instance_subsequent_ms = 0.0;
  double agent_centric_step_ms = 0.0;
};

// For each agent count, replays the first `horizon` expert steps of a
// subset of `base` through the instance-centric encoder and, when given, the
// agent-centric one.
std::vector<ScalingRow> scaling_report(const encoder::InstanceEncoder& instance, const nn::ParamStore& instance_store,
                                       const encoder::AgentCentricEncoder* agent_centric, const scene::Scenario& base,
                                       std::span<const int> agent_counts, int horizon, int repetitions);

// Least-squares slope of y over x.
double slope(std::span<const double> x, std::span<const double> y);

// Agent-centric columns are appended when `agent_centric` is set.
void write_scaling_csv(std::ostream& out, std::span<const ScalingRow> rows, bool agent_centric = true);
void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsReport& m);

}  // namespace instasim::eval

#endif  // INSTASIM_EVAL_HPP_
