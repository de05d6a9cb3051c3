#include "instasim/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "instasim/synthetic.hpp"

namespace instasim::eval {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double rmse(std::span<const Trajectory> simulated, std::span<const Trajectory> truth) {
  if (simulated.size() != truth.size()) throw std::invalid_argument("rmse: agent count mismatch");
  double total = 0.0;
  int counted = 0;
  for (std::size_t a = 0; a < simulated.size(); ++a) {
    const Trajectory& s = simulated[a];
    const Trajectory& g = truth[a];
    const std::size_t steps = std::min(s.positions.size(), g.positions.size());
    double sq = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < steps; ++t) {
      const bool sv = s.valid.empty() || s.valid[t];
      const bool gv = g.valid.empty() || g.valid[t];
      if (!sv || !gv) continue;
      const Vec2 d = s.positions[t] - g.positions[t];
      sq += d.dot(d);
      ++n;
    }
    if (n == 0) continue;
    total += std::sqrt(sq / n);
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("rmse: no overlapping valid steps");
  return total / counted;
}

double termination_rate(std::span<const dynamics::TerminationEvent> events, int n_agents,
                        dynamics::Termination cause) {
  if (n_agents <= 0) throw std::invalid_argument("termination_rate: n_agents must be > 0");
  std::vector<const dynamics::TerminationEvent*> first(static_cast<std::size_t>(n_agents), nullptr);
  for (const dynamics::TerminationEvent& e : events) {
    if (e.agent_id < 0 || e.agent_id >= n_agents) throw std::invalid_argument("termination_rate: bad agent id");
    const dynamics::TerminationEvent*& f = first[static_cast<std::size_t>(e.agent_id)];
    if (f == nullptr || e.step < f->step) f = &e;
  }
  int count = 0;
  for (const auto* f : first) count += (f != nullptr && f->cause == cause) ? 1 : 0;
  return static_cast<double>(count) / n_agents;
}

double offtrack_rate(std::span<const dynamics::TerminationEvent> events, int n_agents) {
  return termination_rate(events, n_agents, dynamics::Termination::kOffTrack);
}

double collision_rate(std::span<const dynamics::TerminationEvent> events, int n_agents) {
  return termination_rate(events, n_agents, dynamics::Termination::kCollision);
}

nlohmann::json MetricsReport::to_json() const {
  auto cls = [](const ClassMetrics& c) {
    return nlohmann::json{{"rmse", c.rmse},
                          {"offtrack_rate", c.offtrack_rate},
                          {"collision_rate", c.collision_rate},
                          {"n_agents", c.n_agents}};
  };
  return {{"rmse", rmse},
          {"offtrack_rate", offtrack_rate},
          {"collision_rate", collision_rate},
          {"n_agents", n_agents},
          {"selection_score", selection_score(*this)},
          {"vru", cls(vru)},
          {"non_vru", cls(non_vru)}};
}

double selection_score(double rmse_value, double offtrack, double collision) {
  return rmse_value / std::max(1e-3, 1.0 - offtrack - collision);
}

MetricsReport metrics_from_traces(std::span<const scene::Scenario* const> scenarios,
                                  std::span<const rl::SimTrace> traces) {
  if (scenarios.size() != traces.size()) throw std::invalid_argument("metrics_from_traces: size mismatch");
  struct Group {
    std::vector<Trajectory> sim, truth;
    std::vector<dynamics::TerminationEvent> events;
    int n = 0;
  };
  Group all, vru, other;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const scene::Scenario& sc = *scenarios[s];
    const rl::SimTrace& tr = traces[s];
    if (!sc.has_expert()) throw std::invalid_argument("metrics_from_traces: scenario without expert data");
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
      Trajectory sim{tr.positions[i], tr.valid[i]};
      if (!sim.valid.empty()) sim.valid[0] = 0;
      Trajectory truth;
      for (const scene::ExpertStep& e : sc.expert[i]) truth.positions.push_back(e.pose.position);
      Group& g = sc.agents[i].features.vru ? vru : other;
      for (Group* grp : {&all, &g}) {
        grp->sim.push_back(sim);
        grp->truth.push_back(truth);
        if (tr.cause[i] != dynamics::Termination::kNone) {
          grp->events.push_back({grp->n, tr.cause[i], tr.termination_step[i]});
        }
        ++grp->n;
      }
    }
  }
  auto finish = [](const Group& g, ClassMetrics& out) {
    out.n_agents = g.n;
    if (g.n == 0) return;
    try {
      out.rmse = rmse(g.sim, g.truth);
    } catch (const std::invalid_argument&) {
      out.rmse = 0.0;
    }
    out.offtrack_rate = offtrack_rate(g.events, g.n);
    out.collision_rate = collision_rate(g.events, g.n);
  };
  MetricsReport report;
  ClassMetrics overall;
  finish(all, overall);
  finish(vru, report.vru);
  finish(other, report.non_vru);
  report.rmse = overall.rmse;
  report.offtrack_rate = overall.offtrack_rate;
  report.collision_rate = overall.collision_rate;
  report.n_agents = overall.n_agents;
  return report;
}

rl::SimTrace cv_baseline(const scene::Scenario& scenario) {
  const dynamics::Simulator sim(scenario);
  std::vector<dynamics::AgentState> states = dynamics::initial_states(scenario);
  const std::size_t n = states.size();
  rl::SimTrace trace;
  trace.positions.assign(n, std::vector<Vec2>(static_cast<std::size_t>(scenario.horizon + 1)));
  trace.valid.assign(n, std::vector<char>(static_cast<std::size_t>(scenario.horizon + 1), 0));
  trace.cause.assign(n, dynamics::Termination::kNone);
  trace.termination_step.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    trace.positions[i][0] = states[i].pose.position;
    trace.valid[i][0] = 1;
  }
  const std::vector<dynamics::Action> zero(n);
  for (int t = 0; t < scenario.horizon; ++t) {
    dynamics::StepOutcome out = sim.step(states, zero, t);
    for (const dynamics::TerminationEvent& e : out.events) {
      trace.cause[static_cast<std::size_t>(e.agent_id)] = e.cause;
      trace.termination_step[static_cast<std::size_t>(e.agent_id)] = t + 1;
    }
    states = std::move(out.states);
    for (std::size_t i = 0; i < n; ++i) {
      trace.positions[i][static_cast<std::size_t>(t + 1)] = states[i].pose.position;
      trace.valid[i][static_cast<std::size_t>(t + 1)] = states[i].alive ? 1 : 0;
    }
  }
  return trace;
}

MetricsReport evaluate_cv(std::span<const scene::Scenario* const> scenarios) {
  std::vector<rl::SimTrace> traces;
  for (const scene::Scenario* s : scenarios) traces.push_back(cv_baseline(*s));
  return metrics_from_traces(scenarios, traces);
}

MetricsReport evaluate_policy(const rl::BehaviorModel& model, std::span<const scene::Scenario* const> scenarios,
                              int workers, bool use_cache) {
  rl::RolloutConfig config;
  config.deterministic = true;
  config.record_experience = false;
  config.workers = workers;
  config.use_cache = use_cache;
  const rl::RolloutBatch batch = rl::collect_rollouts(model, scenarios, config);
  return metrics_from_traces(scenarios, batch.traces);
}

// ---------------------------------------------------------------------------

nlohmann::json ThroughputReport::to_json() const {
  return {{"isps", isps},
          {"n_envs", n_envs},
          {"agent_counts", agent_counts},
          {"horizon", horizon},
          {"elapsed_s", elapsed},
          {"initial_step_latency_s", initial_step_latency},
          {"subsequent_step_latency_s", subsequent_step_latency},
          {"repetitions", repetitions}};
}

double isps_formula(int horizon, std::span<const int> agent_counts, double elapsed) {
  if (!(elapsed > 0.0)) throw std::invalid_argument("isps_formula: elapsed must be > 0");
  const double total = std::accumulate(agent_counts.begin(), agent_counts.end(), 0.0);
  return horizon * total / elapsed;
}

ThroughputReport isps_benchmark(const rl::BehaviorModel& model, std::span<const scene::Scenario* const> envs,
                                int horizon, int repetitions, int warmup, int workers) {
  if (envs.empty() || horizon < 1 || repetitions < 1) throw std::invalid_argument("isps_benchmark: bad arguments");
  const int n_envs = static_cast<int>(envs.size());
  ThroughputReport report;
  report.n_envs = n_envs;
  report.horizon = horizon;
  report.repetitions = repetitions;
  for (const scene::Scenario* s : envs) report.agent_counts.push_back(static_cast<int>(s->agents.size()));

  std::vector<double> totals, initials, subsequents;
  for (int rep = 0; rep < warmup + repetitions; ++rep) {
    std::vector<std::vector<dynamics::AgentState>> states;
    std::vector<encoder::TokenCache> caches(static_cast<std::size_t>(n_envs));
    for (const scene::Scenario* s : envs) states.push_back(dynamics::initial_states(*s));
    std::vector<std::vector<rl::PolicyOutput>> outputs(static_cast<std::size_t>(n_envs));
    double total = 0.0, initial = 0.0, rest = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const auto start = Clock::now();
      rl::parallel_for(n_envs, workers, [&](int e) {
        const auto k = static_cast<std::size_t>(e);
        outputs[k] = model.evaluate(*envs[k], states[k], caches[k]);
      });
      const double dt = seconds_since(start);
      total += dt;
      if (t == 0) initial = dt;
      else rest += dt;
      for (std::size_t k = 0; k < states.size(); ++k) {
        for (std::size_t i = 0; i < states[k].size(); ++i) {
          states[k][i] = dynamics::bicycle_step(states[k][i], rl::to_action(outputs[k][i].dist.mean), envs[k]->dt);
        }
      }
    }
    if (rep < warmup) continue;
    totals.push_back(total);
    initials.push_back(initial);
    subsequents.push_back(horizon > 1 ? rest / (horizon - 1) : 0.0);
  }
  report.elapsed = median(totals);
  report.initial_step_latency = median(initials);
  report.subsequent_step_latency = median(subsequents);
  report.isps = isps_formula(horizon, report.agent_counts, report.elapsed);
  return report;
}

// ---------------------------------------------------------------------------

double slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    num += (x[k] - mx) * (y[k] - my);
    den += (x[k] - mx) * (x[k] - mx);
  }
  if (den == 0.0) throw std::invalid_argument("slope: x values are all equal");
  return num / den;
}

std::vector<ScalingRow> scaling_report(const encoder::InstanceEncoder& instance, const nn::ParamStore& instance_store,
                                       const encoder::AgentCentricEncoder* agent_centric, const scene::Scenario& base,
                                       std::span<const int> agent_counts, int horizon, int repetitions) {
  std::vector<ScalingRow> rows;
  for (int n_agents : agent_counts) {
    const scene::Scenario sc = synthetic::take_agents(base, n_agents);
    if (!sc.has_expert()) throw std::invalid_argument("scaling_report: base scenario needs expert data");
    const int steps = std::min(horizon, sc.horizon);
    std::vector<std::vector<dynamics::AgentState>> frames;
    for (int t = 0; t < steps; ++t) {
      std::vector<dynamics::AgentState> st = dynamics::initial_states(sc);
      for (std::size_t i = 0; i < st.size(); ++i) {
        const scene::ExpertStep& e = sc.expert[i][static_cast<std::size_t>(t)];
        st[i].pose = e.pose;
        st[i].features.speed = e.speed;
      }
      frames.push_back(std::move(st));
    }

    ScalingRow row;
    row.n_agents = n_agents;
    row.n_polylines = static_cast<int>(sc.polylines.size());
    {
      encoder::TokenCache cache;
      for (const auto& st : frames) encoder::encode_scene(instance, instance_store, sc, st, cache, &row.instance);
      if (agent_centric != nullptr) {
        for (const auto& st : frames) agent_centric->encode(sc, st, &row.agent_centric);
      }
    }
    std::vector<double> initial, subsequent, ac;
    for (int rep = 0; rep < repetitions + 1; ++rep) {
      encoder::TokenCache cache;
      auto start = Clock::now();
      encoder::encode_scene(instance, instance_store, sc, frames[0], cache);
      const double first = seconds_since(start);
      start = Clock::now();
      const int later = std::min<int>(steps - 1, 5);
      for (int t = 1; t <= later; ++t) encoder::encode_scene(instance, instance_store, sc, frames[static_cast<std::size_t>(t)], cache);
      const double next = later > 0 ? seconds_since(start) / later : 0.0;
      double ac_step = 0.0;
      if (agent_centric != nullptr) {
        start = Clock::now();
        agent_centric->encode(sc, frames[0]);
        ac_step = seconds_since(start);
      }
      if (rep == 0) continue;  // warmup
      initial.push_back(first);
      subsequent.push_back(next);
      ac.push_back(ac_step);
    }
    row.instance_initial_ms = 1e3 * median(initial);
    row.instance_subsequent_ms = 1e3 * median(subsequent);
    row.agent_centric_step_ms = 1e3 * median(ac);
    rows.push_back(row);
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, std::span<const ScalingRow> rows, bool agent_centric) {
  out << "n_agents,n_polylines,ic_polyline_encodings,ic_agent_encodings,ic_pair_encodings,ic_attention_tokens,"
         "ic_initial_ms,ic_subsequent_ms";
  if (agent_centric) out << ",ac_polyline_encodings,ac_agent_encodings,ac_attention_tokens,ac_step_ms";
  out << '\n';
  for (const ScalingRow& r : rows) {
    out << r.n_agents << ',' << r.n_polylines << ',' << r.instance.polyline_encodings << ','
        << r.instance.agent_encodings << ',' << r.instance.pair_encodings << ',' << r.instance.attention_tokens << ','
        << r.instance_initial_ms << ',' << r.instance_subsequent_ms;
    if (agent_centric) {
      out << ',' << r.agent_centric.polyline_encodings << ',' << r.agent_centric.agent_encodings << ','
          << r.agent_centric.attention_tokens << ',' << r.agent_centric_step_ms;
    }
    out << '\n';
  }
}

void write_metrics_csv_header(std::ostream& out) {
  out << "label,n_agents,rmse,offtrack_rate,collision_rate,selection_score,vru_agents,vru_rmse,non_vru_agents,"
         "non_vru_rmse\n";
}

void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsReport& m) {
  out << label << ',' << m.n_agents << ',' << m.rmse << ',' << m.offtrack_rate << ',' << m.collision_rate << ','
      << selection_score(m) << ',' << m.vru.n_agents << ',' << m.vru.rmse << ',' << m.non_vru.n_agents << ','
      << m.non_vru.rmse << '\n';
}

}  // namespace instasim::eval
