#ifndef INSTASIM_ENCODER_SCENE_ENCODER_HPP_
#define INSTASIM_ENCODER_SCENE_ENCODER_HPP_

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "instasim/dynamics.hpp"
#include "instasim/encoder/instance_encoder.hpp"
#include "instasim/nn/param_store.hpp"

namespace instasim::encoder {

struct EncoderCounters {
  std::int64_t polyline_encodings = 0;
  std::int64_t agent_encodings = 0;
  std::int64_t pair_encodings = 0;
  std::int64_t attention_tokens = 0;  // key/value tokens attended, summed over layers
  std::int64_t cache_rebuilds = 0;

  EncoderCounters& operator+=(const EncoderCounters& o);
  bool operator==(const EncoderCounters&) const = default;
};

nlohmann::json counters_record(int step, const EncoderCounters& c);
void write_counters_jsonl(std::ostream& out, int step, const EncoderCounters& c);

// Content hash of the polyline inputs.
std::uint64_t map_content_hash(const scene::Scenario& scenario);

// Map tokens of one scenario, keyed by map content and parameter version.
class TokenCache {
 public:
  explicit TokenCache(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; clear(); }
  void clear();

  // Returns cached map tokens, encoding them on a miss or when caching is
  // disabled.
  const MapContext& fetch(const InstanceEncoder& encoder, const nn::ParamStore& store,
                          const scene::Scenario& scenario, EncoderCounters* counters);

  std::uint64_t fingerprint() const { return fingerprint_; }
  bool has_tokens() const { return valid_; }

 private:
  bool enabled_ = true;
  bool valid_ = false;
  std::uint64_t fingerprint_ = 0;
  const InstanceEncoder* owner_ = nullptr;
  MapContext map_;
};

std::uint64_t cache_fingerprint(const scene::Scenario& scenario, const nn::ParamStore& store);

struct SceneEncoding {
  std::vector<int> agent_slots;  // alive agents, ascending
  std::vector<Tensor> tokens;    // z_i^(K), aligned with agent_slots
};

// Refined tokens for all alive agents of one simulation step.
SceneEncoding encode_scene(const InstanceEncoder& encoder, const nn::ParamStore& store,
                           const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                           TokenCache& cache, EncoderCounters* counters = nullptr);

// One training observation: agent `slot` of a recorded simulation step.
struct TrainingSample {
  const scene::Scenario* scenario = nullptr;
  std::span<const dynamics::AgentState> states;
  int slot = 0;
};

// Receives z_i^(K) of sample `index`, runs the head forward/backward and
// returns dL/dz.
using HeadGradFn = std::function<Tensor(std::size_t index, const Tensor& z)>;

// Forward and backward through the encoder for every sample. Map-token
// gradients are summed per scenario and pushed through the polyline encoder
// once; parameter gradients accumulate into the encoder's store.
void encoder_backward_batch(const InstanceEncoder& encoder, std::span<const TrainingSample> samples,
                            const HeadGradFn& head_grad);

}  // namespace instasim::encoder

#endif  // INSTASIM_ENCODER_SCENE_ENCODER_HPP_
