#ifndef INSTASIM_ENCODER_AGENT_CENTRIC_HPP_
#define INSTASIM_ENCODER_AGENT_CENTRIC_HPP_

#include <random>
#include <span>
#include <string>
#include <vector>

#include "instasim/dynamics.hpp"
#include "instasim/encoder/instance_encoder.hpp"
#include "instasim/encoder/scene_encoder.hpp"

namespace instasim::encoder {

// Reference path for the efficiency comparison: every instance within the
// radius is re-expressed in the target agent's frame and re-encoded for each
// target at every step. Nothing is cached.
class AgentCentricEncoder {
 public:
  static constexpr int kAgentInputDim = kAgentFeatureDim + 4;

  AgentCentricEncoder(nn::ParamStore& store, const std::string& prefix, const EncoderConfig& config,
                      std::mt19937_64& rng);

  const EncoderConfig& config() const { return config_; }

  // Tokens for all alive agents; counts one encoder invocation per in-radius
  // polyline and agent (self included) per target.
  SceneEncoding encode(const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                       EncoderCounters* counters = nullptr) const;

  Tensor encode_agent(const scene::Scenario& scenario, std::span<const dynamics::AgentState> states, int slot,
                      EncoderCounters* counters = nullptr) const;

 private:
  EncoderConfig config_;
  PolylineEncoder polyline_;
  AgentEncoder agent_;
  std::vector<PerceiverLayer> layers_;
};

}  // namespace instasim::encoder

#endif  // INSTASIM_ENCODER_AGENT_CENTRIC_HPP_
