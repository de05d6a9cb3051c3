#ifndef INSTASIM_RL_POLICY_HPP_
#define INSTASIM_RL_POLICY_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "instasim/dynamics.hpp"
#include "instasim/encoder/instance_encoder.hpp"
#include "instasim/encoder/scene_encoder.hpp"
#include "instasim/nn/gaussian.hpp"
#include "instasim/nn/layers.hpp"
#include "instasim/nn/param_store.hpp"

namespace instasim::rl {

using nn::Tensor;
using nn::Vec2d;

struct ModelConfig {
  encoder::EncoderConfig encoder = encoder::EncoderConfig::small(50.0);
  Vec2d action_scale{2.0, 0.1};
  double value_scale = 20.0;
};

struct PolicyOutput {
  nn::DiagGaussian dist;
  double value = 0.0;
};

// Shared policy/value network: instance-centric encoder, Gaussian action
// head and a value head on z_i^(K).
class BehaviorModel {
 public:
  struct HeadCache {
    nn::MLPBlock::Cache policy;
    nn::MLPBlock::Cache value;
    Tensor raw;
  };

  BehaviorModel(const ModelConfig& config, std::uint64_t seed);
  BehaviorModel(const BehaviorModel&) = delete;
  BehaviorModel& operator=(const BehaviorModel&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& store() { return *store_; }
  const nn::ParamStore& store() const { return *store_; }
  const encoder::InstanceEncoder& encoder() const { return *encoder_; }
  const nn::GaussianHead& gaussian() const { return gaussian_; }

  PolicyOutput head(const Tensor& z, HeadCache* cache = nullptr) const;
  // Returns dL/dz given gradients w.r.t. the distribution parameters and the
  // value estimate.
  Tensor head_backward(const HeadCache& cache, const Vec2d& dmean, const Vec2d& dlog_std, double dvalue) const;

  // Outputs for every alive agent of a step (entries of dead agents are
  // default-constructed).
  std::vector<PolicyOutput> evaluate(const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                                     encoder::TokenCache& cache, encoder::EncoderCounters* counters = nullptr) const;

 private:
  ModelConfig config_;
  std::unique_ptr<nn::ParamStore> store_;
  std::unique_ptr<encoder::InstanceEncoder> encoder_;
  nn::MLPBlock policy_head_;
  nn::MLPBlock value_head_;
  nn::GaussianHead gaussian_;
};

// Executed action for a sampled distribution value.
dynamics::Action to_action(const Vec2d& a);

}  // namespace instasim::rl

#endif  // INSTASIM_RL_POLICY_HPP_
