#include "instasim/encoder/scene_encoder.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace instasim::encoder {

EncoderCounters& EncoderCounters::operator+=(const EncoderCounters& o) {
  polyline_encodings += o.polyline_encodings;
  agent_encodings += o.agent_encodings;
  pair_encodings += o.pair_encodings;
  attention_tokens += o.attention_tokens;
  cache_rebuilds += o.cache_rebuilds;
  return *this;
}

nlohmann::json counters_record(int step, const EncoderCounters& c) {
  return {{"step", step},
          {"polyline_encodings", c.polyline_encodings},
          {"agent_encodings", c.agent_encodings},
          {"pair_encodings", c.pair_encodings},
          {"attention_tokens", c.attention_tokens}};
}

void write_counters_jsonl(std::ostream& out, int step, const EncoderCounters& c) {
  out << counters_record(step, c).dump() << '\n';
}

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

void fnv_double(std::uint64_t& h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  fnv_bytes(h, &bits, sizeof(bits));
}

}  // namespace

std::uint64_t map_content_hash(const scene::Scenario& scenario) {
  std::uint64_t h = kFnvOffset;
  const std::uint64_t n = scenario.polylines.size();
  fnv_bytes(h, &n, sizeof(n));
  for (const scene::Polyline& p : scenario.polylines) {
    const std::uint64_t m = p.vectors.size();
    fnv_bytes(h, &m, sizeof(m));
    for (const scene::PolylineVector& v : p.vectors) {
      fnv_double(h, v.start.x);
      fnv_double(h, v.start.y);
      fnv_double(h, v.end.x);
      fnv_double(h, v.end.y);
      const int t = static_cast<int>(v.type);
      fnv_bytes(h, &t, sizeof(t));
    }
  }
  // Anchors and routes decide neighbour sets and route flags.
  for (const scene::Polyline& p : scenario.polylines) {
    fnv_double(h, p.anchor.position.x);
    fnv_double(h, p.anchor.position.y);
    fnv_double(h, p.anchor.heading);
  }
  for (const scene::Route& r : scenario.routes) {
    for (int id : r.polyline_ids) fnv_bytes(h, &id, sizeof(id));
    fnv_bytes(h, "|", 1);
  }
  return h;
}

std::uint64_t cache_fingerprint(const scene::Scenario& scenario, const nn::ParamStore& store) {
  std::uint64_t h = map_content_hash(scenario);
  const std::uint64_t version = store.version();
  fnv_bytes(h, &version, sizeof(version));
  const auto address = reinterpret_cast<std::uintptr_t>(&store);
  fnv_bytes(h, &address, sizeof(address));
  return h;
}

void TokenCache::clear() {
  valid_ = false;
  fingerprint_ = 0;
  owner_ = nullptr;
  map_ = MapContext();
}

const MapContext& TokenCache::fetch(const InstanceEncoder& encoder, const nn::ParamStore& store,
                                    const scene::Scenario& scenario, EncoderCounters* counters) {
  const std::uint64_t fp = cache_fingerprint(scenario, store);
  if (enabled_ && valid_ && owner_ == &encoder && fp == fingerprint_) return map_;
  if (enabled_ && valid_ && counters != nullptr) ++counters->cache_rebuilds;
  map_ = encoder.encode_map(scenario);
  if (counters != nullptr) counters->polyline_encodings += static_cast<std::int64_t>(scenario.polylines.size());
  fingerprint_ = fp;
  owner_ = &encoder;
  valid_ = true;
  return map_;
}

SceneEncoding encode_scene(const InstanceEncoder& encoder, const nn::ParamStore& store,
                           const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                           TokenCache& cache, EncoderCounters* counters) {
  const MapContext& map = cache.fetch(encoder, store, scenario, counters);
  const AgentContext agents = encoder.encode_agents(states);
  SceneEncoding out;
  const int layers = encoder.config().layers;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].alive) continue;
    std::vector<ContextEntry> entries = encoder.select_context(map, agents, static_cast<int>(i));
    if (counters != nullptr) {
      ++counters->agent_encodings;
      counters->pair_encodings += static_cast<std::int64_t>(entries.size());
      counters->attention_tokens += static_cast<std::int64_t>(entries.size()) * layers;
    }
    out.agent_slots.push_back(static_cast<int>(i));
    out.tokens.push_back(encoder.refine_with(map, agents, static_cast<int>(i), std::move(entries), nullptr));
  }
  return out;
}

}  // namespace instasim::encoder

namespace instasim::encoder {

void encoder_backward_batch(const InstanceEncoder& encoder, std::span<const TrainingSample> samples,
                            const HeadGradFn& head_grad) {
  std::vector<const scene::Scenario*> order;
  for (const TrainingSample& s : samples) {
    if (std::find(order.begin(), order.end(), s.scenario) == order.end()) order.push_back(s.scenario);
  }
  for (const scene::Scenario* scenario : order) {
    std::vector<PolylineEncoder::Cache> poly_caches;
    const MapContext map = encoder.encode_map(*scenario, &poly_caches);
    TokenGrads grads;
    grads.reset(map.tokens.size(), 0, encoder.hidden());
    for (std::size_t idx = 0; idx < samples.size(); ++idx) {
      const TrainingSample& s = samples[idx];
      if (s.scenario != scenario) continue;
      std::vector<nn::MLPBlock::Cache> agent_caches;
      const AgentContext agents = encoder.encode_agents(s.states, &agent_caches);
      RefineCache cache;
      const Tensor z = encoder.refine(map, agents, s.slot, &cache);
      const Tensor dz = head_grad(idx, z);
      grads.agents.assign(agents.tokens.size(), Tensor());
      grads.agent_touched.assign(agents.tokens.size(), 0);
      encoder.refine_backward(map, agents, cache, dz, grads);
      for (std::size_t j = 0; j < agents.tokens.size(); ++j) {
        if (grads.agent_touched[j]) encoder.agents().backward(agent_caches[j], grads.agents[j]);
      }
    }
    for (std::size_t j = 0; j < map.tokens.size(); ++j) {
      if (grads.map_touched[j]) encoder.polylines().backward(poly_caches[j], grads.map[j]);
    }
  }
}

}  // namespace instasim::encoder
