#include "instasim/rl/policy.hpp"

#include <cmath>

namespace instasim::rl {

BehaviorModel::BehaviorModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), store_(std::make_unique<nn::ParamStore>()), gaussian_(config.action_scale) {
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<encoder::InstanceEncoder>(*store_, "policy.encoder", config.encoder, rng);
  const int h = config.encoder.hidden;
  policy_head_ = nn::MLPBlock(*store_, "policy.head", h, h, 4, rng, 0.01);
  value_head_ = nn::MLPBlock(*store_, "policy.value", h, h, 1, rng, 0.1);
  // Initial std at half the action scale.
  nn::Parameter& bias = policy_head_.output_layer().bias();
  bias.value[2] = static_cast<nn::Real>(std::log(0.5));
  bias.value[3] = static_cast<nn::Real>(std::log(0.5));
}

PolicyOutput BehaviorModel::head(const Tensor& z, HeadCache* cache) const {
  Tensor raw = policy_head_.forward(z, cache != nullptr ? &cache->policy : nullptr);
  Tensor v = value_head_.forward(z, cache != nullptr ? &cache->value : nullptr);
  PolicyOutput out{gaussian_.distribution(raw), config_.value_scale * static_cast<double>(v[0])};
  if (cache != nullptr) cache->raw = std::move(raw);
  return out;
}

Tensor BehaviorModel::head_backward(const HeadCache& cache, const Vec2d& dmean, const Vec2d& dlog_std,
                                    double dvalue) const {
  Tensor draw = gaussian_.backward(cache.raw, dmean, dlog_std);
  Tensor dz = policy_head_.backward(cache.policy, draw);
  if (dvalue != 0.0) {
    Tensor dv = Tensor::matrix(1, 1);
    dv[0] = static_cast<nn::Real>(dvalue * config_.value_scale);
    dz.add_(value_head_.backward(cache.value, dv));
  }
  return dz;
}

std::vector<PolicyOutput> BehaviorModel::evaluate(const scene::Scenario& scenario,
                                                  std::span<const dynamics::AgentState> states,
                                                  encoder::TokenCache& cache,
                                                  encoder::EncoderCounters* counters) const {
  const encoder::SceneEncoding enc = encoder::encode_scene(*encoder_, *store_, scenario, states, cache, counters);
  std::vector<PolicyOutput> out(states.size());
  for (std::size_t k = 0; k < enc.agent_slots.size(); ++k) {
    out[static_cast<std::size_t>(enc.agent_slots[k])] = head(enc.tokens[k]);
  }
  return out;
}

dynamics::Action to_action(const Vec2d& a) { return dynamics::Action{a[0], a[1]}.clamped(); }

}  // namespace instasim::rl
