#ifndef INSTASIM_RL_ROLLOUT_HPP_
#define INSTASIM_RL_ROLLOUT_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "instasim/dynamics.hpp"
#include "instasim/encoder/scene_encoder.hpp"
#include "instasim/rl/policy.hpp"

namespace instasim::rl {

// States of every agent slot at one step of one environment.
struct Frame {
  int env = 0;
  int step = 0;
  std::vector<dynamics::AgentState> states;
};

struct Experience {
  int env = 0;
  int agent = 0;
  int step = 0;
  int frame = 0;
  Vec2d sampled{0.0, 0.0};  // pre-clamp sample; log_prob refers to it
  dynamics::Action executed;
  double log_prob = 0.0;
  Vec2d stddev{0.0, 0.0};
  double value = 0.0;
  double raw_reward = 0.0;
  double reward = 0.0;
  bool done = false;  // collision or off-track: no bootstrap
  dynamics::Termination cause = dynamics::Termination::kNone;
  bool last = false;       // final experience of this agent in the rollout
  double bootstrap = 0.0;  // V(s_{t+1}) when last && !done
  double advantage = 0.0;
  double ret = 0.0;
};

// Closed-loop trajectory of one environment.
struct SimTrace {
  // positions[agent][t] for t = 0..horizon; valid while the agent is alive.
  std::vector<std::vector<geometry::Vec2>> positions;
  std::vector<std::vector<char>> valid;
  std::vector<dynamics::Termination> cause;
  std::vector<int> termination_step;  // -1 if never terminated
};

struct RolloutBatch {
  std::vector<const scene::Scenario*> scenarios;  // per env
  std::vector<Frame> frames;
  std::vector<Experience> experiences;  // ordered by (env, agent, step)
  std::vector<SimTrace> traces;
  encoder::EncoderCounters counters;

  encoder::TrainingSample observation(const Experience& e) const;
};

struct RolloutConfig {
  std::uint64_t seed = 0;
  int workers = 1;
  bool deterministic = false;  // act with the distribution mean
  bool use_cache = true;
  bool record_experience = true;
};

std::uint64_t env_seed(std::uint64_t seed, int env);

// One self-play episode per scenario, all agents acting from the same frozen
// policy. The result does not depend on the worker count.
RolloutBatch collect_rollouts(const BehaviorModel& model, std::span<const scene::Scenario* const> scenarios,
                              const RolloutConfig& config);

// Runs `fn(env)` for env in [0, n) on up to `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace instasim::rl

#endif  // INSTASIM_RL_ROLLOUT_HPP_
