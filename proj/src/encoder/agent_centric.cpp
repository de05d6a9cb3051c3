#include "instasim/encoder/agent_centric.hpp"

#include <algorithm>
#include <cmath>

namespace instasim::encoder {

AgentCentricEncoder::AgentCentricEncoder(nn::ParamStore& store, const std::string& prefix,
                                         const EncoderConfig& config, std::mt19937_64& rng)
    : config_(config),
      polyline_(store, prefix + ".polyline", config.hidden, rng),
      agent_(store, prefix + ".agent", kAgentInputDim, config.hidden, rng) {
  for (int k = 0; k < config.layers; ++k) {
    layers_.emplace_back(store, prefix + ".perceiver" + std::to_string(k), config.hidden, rng);
  }
}

Tensor AgentCentricEncoder::encode_agent(const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                                         int slot, EncoderCounters* counters) const {
  const AnchorPose& frame = states[static_cast<std::size_t>(slot)].pose;
  const double r2 = config_.radius * config_.radius;
  const int h = config_.hidden;
  std::vector<Tensor> tokens;

  auto encode_agent_in_frame = [&](const dynamics::AgentState& s) {
    const auto f = agent_feature_vector(s.features);
    const geometry::Vec2 local = geometry::to_local(s.pose.position, frame);
    const double dh = geometry::normalize_angle(s.pose.heading - frame.heading);
    Tensor x = Tensor::matrix(1, kAgentInputDim);
    std::copy(f.begin(), f.end(), x.data());
    x[kAgentFeatureDim + 0] = static_cast<Real>(local.x / config_.radius);
    x[kAgentFeatureDim + 1] = static_cast<Real>(local.y / config_.radius);
    x[kAgentFeatureDim + 2] = static_cast<Real>(std::cos(dh));
    x[kAgentFeatureDim + 3] = static_cast<Real>(std::sin(dh));
    return agent_.forward_raw(x);
  };

  tokens.push_back(encode_agent_in_frame(states[static_cast<std::size_t>(slot)]));
  for (std::size_t j = 0; j < states.size(); ++j) {
    if (static_cast<int>(j) == slot || !states[j].alive) continue;
    const geometry::Vec2 d = states[j].pose.position - frame.position;
    if (d.dot(d) <= r2) tokens.push_back(encode_agent_in_frame(states[j]));
  }
  const std::size_t n_agents = tokens.size();
  for (const scene::Polyline& p : scenario.polylines) {
    const geometry::Vec2 d = p.anchor.position - frame.position;
    if (d.dot(d) > r2) continue;
    Tensor x = polyline_features(p);
    for (std::size_t r = 0; r < p.vectors.size(); ++r) {
      const geometry::Vec2 s = geometry::to_local(geometry::to_global(p.vectors[r].start, p.anchor), frame);
      const geometry::Vec2 e = geometry::to_local(geometry::to_global(p.vectors[r].end, p.anchor), frame);
      Real* row = x.row(static_cast<int>(r));
      row[0] = static_cast<Real>(s.x / 10.0);
      row[1] = static_cast<Real>(s.y / 10.0);
      row[2] = static_cast<Real>(e.x / 10.0);
      row[3] = static_cast<Real>(e.y / 10.0);
    }
    tokens.push_back(polyline_.forward_features(x));
  }
  if (counters != nullptr) {
    counters->agent_encodings += static_cast<std::int64_t>(n_agents);
    counters->polyline_encodings += static_cast<std::int64_t>(tokens.size() - n_agents);
    counters->attention_tokens += static_cast<std::int64_t>(tokens.size()) * config_.layers;
  }

  Tensor kv = Tensor::matrix(static_cast<int>(tokens.size()), h);
  for (std::size_t r = 0; r < tokens.size(); ++r) std::copy(tokens[r].data(), tokens[r].data() + h, kv.row(static_cast<int>(r)));
  Tensor q = tokens.front();
  for (const PerceiverLayer& layer : layers_) q = layer.forward(q, kv);
  return q;
}

SceneEncoding AgentCentricEncoder::encode(const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                                          EncoderCounters* counters) const {
  SceneEncoding out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].alive) continue;
    out.agent_slots.push_back(static_cast<int>(i));
    out.tokens.push_back(encode_agent(scenario, states, static_cast<int>(i), counters));
  }
  return out;
}

}  // namespace instasim::encoder
