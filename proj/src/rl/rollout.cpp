#include "instasim/rl/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace instasim::rl {

encoder::TrainingSample RolloutBatch::observation(const Experience& e) const {
  const Frame& f = frames[static_cast<std::size_t>(e.frame)];
  return {scenarios[static_cast<std::size_t>(e.env)], f.states, e.agent};
}

std::uint64_t env_seed(std::uint64_t seed, int env) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(env) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  const int threads = std::max(1, std::min(workers, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct EnvResult {
  std::vector<Frame> frames;
  std::vector<Experience> experiences;
  SimTrace trace;
  encoder::EncoderCounters counters;
};

EnvResult run_env(const BehaviorModel& model, const scene::Scenario& scenario, int env, const RolloutConfig& config) {
  EnvResult out;
  std::mt19937_64 rng(env_seed(config.seed, env));
  const dynamics::Simulator sim(scenario);
  encoder::TokenCache cache(config.use_cache);
  std::vector<dynamics::AgentState> states = dynamics::initial_states(scenario);
  const std::size_t n = states.size();
  const int horizon = scenario.horizon;

  SimTrace& trace = out.trace;
  trace.positions.assign(n, std::vector<geometry::Vec2>(static_cast<std::size_t>(horizon + 1)));
  trace.valid.assign(n, std::vector<char>(static_cast<std::size_t>(horizon + 1), 0));
  trace.cause.assign(n, dynamics::Termination::kNone);
  trace.termination_step.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    trace.positions[i][0] = states[i].pose.position;
    trace.valid[i][0] = states[i].alive ? 1 : 0;
  }

  // Index of each agent's latest experience.
  std::vector<int> latest(n, -1);
  std::vector<dynamics::Action> actions(n);

  for (int t = 0; t < horizon; ++t) {
    if (std::none_of(states.begin(), states.end(), [](const dynamics::AgentState& s) { return s.alive; })) break;
    const std::vector<PolicyOutput> outputs = model.evaluate(scenario, states, cache, &out.counters);
    int frame_index = -1;
    if (config.record_experience) {
      frame_index = static_cast<int>(out.frames.size());
      out.frames.push_back({env, t, states});
    }
    for (std::size_t i = 0; i < n; ++i) {
      actions[i] = dynamics::Action{};
      if (!states[i].alive) continue;
      const PolicyOutput& o = outputs[i];
      const Vec2d a = config.deterministic ? o.dist.mean : o.dist.sample(rng);
      actions[i] = to_action(a);
      if (config.record_experience) {
        Experience e;
        e.env = env;
        e.agent = static_cast<int>(i);
        e.step = t;
        e.frame = frame_index;
        e.sampled = a;
        e.executed = actions[i];
        e.log_prob = o.dist.log_prob(a);
        e.stddev = o.dist.stddev();
        e.value = o.value;
        latest[i] = static_cast<int>(out.experiences.size());
        out.experiences.push_back(e);
      }
    }
    dynamics::StepOutcome next = sim.step(states, actions, t);

    bool any_finished = false;
    for (const dynamics::TerminationEvent& ev : next.events) {
      const auto i = static_cast<std::size_t>(ev.agent_id);
      trace.cause[i] = ev.cause;
      trace.termination_step[i] = t + 1;
      if (config.record_experience && latest[i] >= 0) {
        Experience& e = out.experiences[static_cast<std::size_t>(latest[i])];
        e.last = true;
        e.cause = ev.cause;
        e.done = ev.cause != dynamics::Termination::kFinished;
      }
      any_finished = any_finished || ev.cause == dynamics::Termination::kFinished;
    }
    if (config.record_experience && any_finished) {
      // Reaching the route end truncates: bootstrap from the reached state.
      std::vector<dynamics::AgentState> probe = next.states;
      for (const dynamics::TerminationEvent& ev : next.events) {
        if (ev.cause == dynamics::Termination::kFinished) probe[static_cast<std::size_t>(ev.agent_id)].alive = true;
        else probe[static_cast<std::size_t>(ev.agent_id)].alive = false;
      }
      encoder::TokenCache probe_cache(config.use_cache);
      const std::vector<PolicyOutput> v = model.evaluate(scenario, probe, probe_cache);
      for (const dynamics::TerminationEvent& ev : next.events) {
        if (ev.cause != dynamics::Termination::kFinished) continue;
        const auto i = static_cast<std::size_t>(ev.agent_id);
        if (latest[i] >= 0) out.experiences[static_cast<std::size_t>(latest[i])].bootstrap = v[i].value;
      }
    }
    states = std::move(next.states);
    for (std::size_t i = 0; i < n; ++i) {
      trace.positions[i][static_cast<std::size_t>(t + 1)] = states[i].pose.position;
      trace.valid[i][static_cast<std::size_t>(t + 1)] = states[i].alive ? 1 : 0;
    }
  }

  if (config.record_experience) {
    const bool any_alive = std::any_of(states.begin(), states.end(), [](const dynamics::AgentState& s) { return s.alive; });
    if (any_alive) {
      const std::vector<PolicyOutput> v = model.evaluate(scenario, states, cache);
      for (std::size_t i = 0; i < n; ++i) {
        if (!states[i].alive || latest[i] < 0) continue;
        Experience& e = out.experiences[static_cast<std::size_t>(latest[i])];
        e.last = true;
        e.bootstrap = v[i].value;
      }
    }
  }
  return out;
}

}  // namespace

RolloutBatch collect_rollouts(const BehaviorModel& model, std::span<const scene::Scenario* const> scenarios,
                              const RolloutConfig& config) {
  const int n_envs = static_cast<int>(scenarios.size());
  std::vector<EnvResult> results(static_cast<std::size_t>(n_envs));
  parallel_for(n_envs, config.workers, [&](int env) {
    results[static_cast<std::size_t>(env)] = run_env(model, *scenarios[static_cast<std::size_t>(env)], env, config);
  });

  RolloutBatch batch;
  batch.scenarios.assign(scenarios.begin(), scenarios.end());
  for (EnvResult& r : results) {
    const int frame_offset = static_cast<int>(batch.frames.size());
    for (Frame& f : r.frames) batch.frames.push_back(std::move(f));
    std::stable_sort(r.experiences.begin(), r.experiences.end(), [](const Experience& a, const Experience& b) {
      return a.agent < b.agent || (a.agent == b.agent && a.step < b.step);
    });
    for (Experience& e : r.experiences) {
      e.frame += frame_offset;
      batch.experiences.push_back(e);
    }
    batch.traces.push_back(std::move(r.trace));
    batch.counters += r.counters;
  }
  return batch;
}

}  // namespace instasim::rl
