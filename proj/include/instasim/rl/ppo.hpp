#ifndef INSTASIM_RL_PPO_HPP_
#define INSTASIM_RL_PPO_HPP_

#include <random>

#include "instasim/nn/param_store.hpp"
#include "instasim/rl/policy.hpp"
#include "instasim/rl/rollout.hpp"

namespace instasim::rl {

struct PPOConfig {
  double clip_eps = 0.2;
  int epochs_per_batch = 4;
  int minibatch = 1024;
  double lr = 2e-4;
  double weight_decay = 0.01;
  double gamma = 0.95;
  double lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.0;  // 0 disables clipping

  // Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

// Fills advantage/ret of every experience from its `reward` field, one GAE
// pass per (env, agent) sequence.
void assign_advantages(RolloutBatch& batch, double gamma, double lambda);

struct PPOStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double first_ratio_max_dev = 0.0;  // max |ratio - 1| in the first minibatch
  int updates = 0;
};

// Clipped-surrogate PPO with advantage normalisation. Throws
// std::invalid_argument on an empty batch.
PPOStats ppo_update(BehaviorModel& model, const RolloutBatch& batch, const PPOConfig& config, double lr,
                    std::mt19937_64& rng);

}  // namespace instasim::rl

#endif  // INSTASIM_RL_PPO_HPP_
