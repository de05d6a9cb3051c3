#ifndef INSTASIM_ENCODER_INSTANCE_ENCODER_HPP_
#define INSTASIM_ENCODER_INSTANCE_ENCODER_HPP_

#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "instasim/dynamics.hpp"
#include "instasim/geometry.hpp"
#include "instasim/nn/layers.hpp"
#include "instasim/scene.hpp"

namespace instasim::encoder {

using geometry::AnchorPose;
using nn::Real;
using nn::Tensor;

struct EncoderConfig {
  int hidden = 64;
  int layers = 1;  // Perceiver layers K
  double radius = 50.0;
  int max_neighbors = 128;

  static EncoderConfig small(double radius = 50.0) { return {64, 1, radius, 128}; }
  static EncoderConfig full(double radius = 50.0) { return {128, 3, radius, 128}; }
};

inline constexpr int kVectorFeatureDim = 4 + scene::kNumElementTypes;
inline constexpr int kAgentFeatureDim = 5;
inline constexpr int kPairContextDim = 7;

// Per-vector inputs: start and end in the local frame (scaled by 1/10) and
// the one-hot element type.
Tensor polyline_features(const scene::Polyline& polyline);
std::array<Real, kAgentFeatureDim> agent_feature_vector(const scene::AgentFeatures& f);

// Three rounds of per-vector MLP, set max-pool and concatenation, then a
// final max-pool over the vectors.
class PolylineEncoder {
 public:
  static constexpr int kRounds = 3;

  struct Cache {
    std::vector<nn::MLPBlock::Cache> mlp;
    std::vector<std::vector<int>> aggregate_argmax;
    std::vector<int> final_argmax;
    int vectors = 0;
  };

  PolylineEncoder() = default;
  PolylineEncoder(nn::ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng);

  // Throws std::invalid_argument on an empty polyline.
  Tensor forward(const scene::Polyline& polyline, Cache* cache = nullptr) const;
  Tensor forward_features(const Tensor& features, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Tensor& dtoken) const;

 private:
  int hidden_ = 0;
  std::vector<nn::MLPBlock> rounds_;
};

class AgentEncoder {
 public:
  AgentEncoder() = default;
  AgentEncoder(nn::ParamStore& store, const std::string& name, int in_dim, int hidden, std::mt19937_64& rng);

  Tensor forward(const scene::AgentFeatures& features, nn::MLPBlock::Cache* cache = nullptr) const;
  Tensor forward_raw(const Tensor& x, nn::MLPBlock::Cache* cache = nullptr) const;
  void backward(const nn::MLPBlock::Cache& cache, const Tensor& dtoken) const;

 private:
  nn::MLPBlock mlp_;
};

using PairContext = std::array<Real, kPairContextDim>;

// Relative-pose embedding of `to` seen from `from` plus the agent and route
// indicators. The distance entry is divided by `radius`.
PairContext pair_context(const AnchorPose& from, const AnchorPose& to, bool is_agent, bool on_route,
                         double radius);
// Context of the self pair z_{i->i}.
PairContext self_pair_context();

// z_ij = zeta(c) * z_j + beta(c)
class PairEncoder {
 public:
  struct Cache {
    nn::MLPBlock::Cache zeta;
    nn::MLPBlock::Cache beta;
    Tensor scale;
    Tensor token;
  };

  PairEncoder() = default;
  PairEncoder(nn::ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng);

  Tensor forward(const PairContext& context, const Tensor& token, Cache* cache = nullptr) const;
  // Returns d token.
  Tensor backward(const Cache& cache, const Tensor& dout) const;

 private:
  nn::MLPBlock zeta_;
  nn::MLPBlock beta_;
};

// Cross-attention with skip + layer norm, then MLP with skip + layer norm.
class PerceiverLayer {
 public:
  struct Cache {
    nn::AttentionCache attention;
    nn::LayerNormCache norm1;
    nn::MLPBlock::Cache mlp;
    nn::LayerNormCache norm2;
  };

  PerceiverLayer() = default;
  PerceiverLayer(nn::ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng);

  Tensor forward(const Tensor& query, const Tensor& kv, Cache* cache = nullptr) const;
  // Accumulates into dquery and dkv.
  void backward(const Cache& cache, const Tensor& dout, Tensor& dquery, Tensor& dkv) const;

 private:
  nn::CrossAttention attention_;
  nn::LayerNorm norm1_;
  nn::MLPBlock mlp_;
  nn::LayerNorm norm2_;
};

// Static, per-scenario part of the scene: map tokens and route membership.
struct MapContext {
  std::vector<AnchorPose> anchors;
  std::vector<Tensor> tokens;                     // [1, H] each
  std::vector<std::vector<char>> route_members;   // [route][polyline]
};

// Dynamic, per-step part: agent tokens. Tokens of dead agents are empty.
struct AgentContext {
  std::vector<AnchorPose> anchors;
  std::vector<Tensor> tokens;
  std::vector<char> alive;
  std::vector<int> route;
};

// Context member reference: index < n_map is a polyline, otherwise the
// agent slot index - n_map.
struct ContextEntry {
  int index = 0;
  PairContext context{};
};

struct RefineCache {
  std::vector<ContextEntry> entries;  // entry 0 is the self pair
  std::vector<PairEncoder::Cache> pairs;
  std::vector<PerceiverLayer::Cache> layers;
};

// Gradients w.r.t. the tokens of one frame, sized lazily.
struct TokenGrads {
  std::vector<Tensor> map;
  std::vector<Tensor> agents;
  std::vector<char> map_touched;
  std::vector<char> agent_touched;

  void reset(std::size_t n_map, std::size_t n_agents, int hidden);
};

class InstanceEncoder {
 public:
  InstanceEncoder(nn::ParamStore& store, const std::string& prefix, const EncoderConfig& config,
                  std::mt19937_64& rng);

  const EncoderConfig& config() const { return config_; }
  int hidden() const { return config_.hidden; }
  const PolylineEncoder& polylines() const { return polyline_; }
  const AgentEncoder& agents() const { return agent_; }
  const PairEncoder& pairs() const { return pair_; }

  // Neighbours of agent `slot` within the radius (self first, then in index
  // order), capped at max_neighbors nearest.
  std::vector<ContextEntry> select_context(const MapContext& map, const AgentContext& agents, int slot) const;

  // z_i^(K) for agent `slot`.
  Tensor refine(const MapContext& map, const AgentContext& agents, int slot, RefineCache* cache = nullptr) const;
  Tensor refine_with(const MapContext& map, const AgentContext& agents, int slot,
                     std::vector<ContextEntry> entries, RefineCache* cache) const;
  void refine_backward(const MapContext& map, const AgentContext& agents, const RefineCache& cache,
                       const Tensor& dz, TokenGrads& grads) const;

  // The Perceiver stack on an explicit query/context set.
  Tensor perceive(const Tensor& query, const Tensor& kv, std::vector<PerceiverLayer::Cache>* caches) const;
  void perceive_backward(const std::vector<PerceiverLayer::Cache>& caches, const Tensor& dout, Tensor& dquery,
                         Tensor& dkv) const;

  MapContext encode_map(const scene::Scenario& scenario, std::vector<PolylineEncoder::Cache>* caches = nullptr) const;
  // Agent tokens for every alive slot.
  AgentContext encode_agents(std::span<const dynamics::AgentState> states,
                             std::vector<nn::MLPBlock::Cache>* caches = nullptr) const;

 private:
  EncoderConfig config_;
  PolylineEncoder polyline_;
  AgentEncoder agent_;
  PairEncoder pair_;
  std::vector<PerceiverLayer> layers_;
};

}  // namespace instasim::encoder

#endif  // INSTASIM_ENCODER_INSTANCE_ENCODER_HPP_
