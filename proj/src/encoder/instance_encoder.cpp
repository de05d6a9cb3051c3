#include "instasim/encoder/instance_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace instasim::encoder {

namespace {

Tensor row_tensor(const Real* values, int n) {
  Tensor t = Tensor::matrix(1, n);
  std::copy(values, values + n, t.data());
  return t;
}

}  // namespace

Tensor polyline_features(const scene::Polyline& polyline) {
  const int n = static_cast<int>(polyline.vectors.size());
  Tensor x = Tensor::matrix(n, kVectorFeatureDim);
  for (int r = 0; r < n; ++r) {
    const scene::PolylineVector& v = polyline.vectors[static_cast<std::size_t>(r)];
    Real* row = x.row(r);
    row[0] = static_cast<Real>(v.start.x / 10.0);
    row[1] = static_cast<Real>(v.start.y / 10.0);
    row[2] = static_cast<Real>(v.end.x / 10.0);
    row[3] = static_cast<Real>(v.end.y / 10.0);
    row[4 + static_cast<int>(v.type)] = Real(1);
  }
  return x;
}

std::array<Real, kAgentFeatureDim> agent_feature_vector(const scene::AgentFeatures& f) {
  return {static_cast<Real>(f.width / 2.0), static_cast<Real>(f.length / 5.0), static_cast<Real>(f.speed / 10.0),
          static_cast<Real>(f.speed_limit / 10.0), static_cast<Real>(f.vru ? 1.0 : 0.0)};
}

// ---------------------------------------------------------------------------

PolylineEncoder::PolylineEncoder(nn::ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng)
    : hidden_(hidden) {
  if (hidden % 2 != 0) throw std::invalid_argument("PolylineEncoder: hidden must be even");
  for (int l = 0; l < kRounds; ++l) {
    const int in = l == 0 ? kVectorFeatureDim : hidden;
    rounds_.emplace_back(store, name + ".round" + std::to_string(l), in, hidden, hidden / 2, rng);
  }
}

Tensor PolylineEncoder::forward(const scene::Polyline& polyline, Cache* cache) const {
  if (polyline.vectors.empty()) throw std::invalid_argument("encode_polyline: empty polyline");
  return forward_features(polyline_features(polyline), cache);
}

Tensor PolylineEncoder::forward_features(const Tensor& features, Cache* cache) const {
  const int n = features.rows();
  if (n == 0) throw std::invalid_argument("encode_polyline: empty polyline");
  const int half = hidden_ / 2;
  if (cache != nullptr) {
    cache->mlp.assign(kRounds, {});
    cache->aggregate_argmax.assign(kRounds, {});
    cache->vectors = n;
  }
  Tensor x = features;
  for (int l = 0; l < kRounds; ++l) {
    Tensor e = rounds_[static_cast<std::size_t>(l)].forward(x, cache != nullptr ? &cache->mlp[static_cast<std::size_t>(l)] : nullptr);
    nn::MaxPoolResult agg = nn::max_pool_set(e);
    Tensor next = Tensor::matrix(n, hidden_);
    for (int r = 0; r < n; ++r) {
      std::copy(e.row(r), e.row(r) + half, next.row(r));
      std::copy(agg.pooled.data(), agg.pooled.data() + half, next.row(r) + half);
    }
    if (cache != nullptr) cache->aggregate_argmax[static_cast<std::size_t>(l)] = std::move(agg.argmax);
    x = std::move(next);
  }
  nn::MaxPoolResult token = nn::max_pool_set(x);
  if (cache != nullptr) cache->final_argmax = std::move(token.argmax);
  return std::move(token.pooled);
}

void PolylineEncoder::backward(const Cache& cache, const Tensor& dtoken) const {
  const int n = cache.vectors;
  const int half = hidden_ / 2;
  Tensor dx = Tensor::matrix(n, hidden_);
  nn::max_pool_backward(cache.final_argmax, dtoken, dx);
  for (int l = kRounds - 1; l >= 0; --l) {
    Tensor de = Tensor::matrix(n, half);
    Tensor dagg = Tensor::matrix(1, half);
    for (int r = 0; r < n; ++r) {
      std::copy(dx.row(r), dx.row(r) + half, de.row(r));
      const Real* src = dx.row(r) + half;
      for (int c = 0; c < half; ++c) dagg[static_cast<std::size_t>(c)] += src[c];
    }
    nn::max_pool_backward(cache.aggregate_argmax[static_cast<std::size_t>(l)], dagg, de);
    Tensor dinput = rounds_[static_cast<std::size_t>(l)].backward(cache.mlp[static_cast<std::size_t>(l)], de);
    if (l > 0) dx = std::move(dinput);
  }
}

// ---------------------------------------------------------------------------

AgentEncoder::AgentEncoder(nn::ParamStore& store, const std::string& name, int in_dim, int hidden,
                           std::mt19937_64& rng)
    : mlp_(store, name, in_dim, hidden, hidden, rng) {}

Tensor AgentEncoder::forward(const scene::AgentFeatures& features, nn::MLPBlock::Cache* cache) const {
  const auto x = agent_feature_vector(features);
  return forward_raw(row_tensor(x.data(), kAgentFeatureDim), cache);
}

Tensor AgentEncoder::forward_raw(const Tensor& x, nn::MLPBlock::Cache* cache) const { return mlp_.forward(x, cache); }

void AgentEncoder::backward(const nn::MLPBlock::Cache& cache, const Tensor& dtoken) const {
  mlp_.backward(cache, dtoken);
}

// ---------------------------------------------------------------------------

PairContext pair_context(const AnchorPose& from, const AnchorPose& to, bool is_agent, bool on_route, double radius) {
  const auto e = geometry::relative_pose(from, to).embedding(radius);
  return {static_cast<Real>(e[0]), static_cast<Real>(e[1]), static_cast<Real>(e[2]),  static_cast<Real>(e[3]),
          static_cast<Real>(e[4]), Real(is_agent ? 1 : 0),  Real(on_route ? 1 : 0)};
}

PairContext self_pair_context() { return {Real(1), Real(0), Real(1), Real(0), Real(0), Real(1), Real(0)}; }

PairEncoder::PairEncoder(nn::ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng)
    : zeta_(store, name + ".zeta", kPairContextDim, hidden, hidden, rng, 0.5),
      beta_(store, name + ".beta", kPairContextDim, hidden, hidden, rng, 0.5) {
  zeta_.output_layer().bias().value.fill(Real(1));
}

Tensor PairEncoder::forward(const PairContext& context, const Tensor& token, Cache* cache) const {
  Tensor c = row_tensor(context.data(), kPairContextDim);
  Tensor scale = zeta_.forward(c, cache != nullptr ? &cache->zeta : nullptr);
  Tensor shift = beta_.forward(c, cache != nullptr ? &cache->beta : nullptr);
  Tensor out = nn::film(token, scale, shift);
  if (cache != nullptr) {
    cache->scale = std::move(scale);
    cache->token = token;
  }
  return out;
}

Tensor PairEncoder::backward(const Cache& cache, const Tensor& dout) const {
  Tensor dtoken(cache.token.shape());
  Tensor dscale(cache.token.shape());
  Tensor dshift(cache.token.shape());
  nn::film_backward(cache.token, cache.scale, dout, &dtoken, &dscale, &dshift);
  zeta_.backward(cache.zeta, dscale);
  beta_.backward(cache.beta, dshift);
  return dtoken;
}

// ---------------------------------------------------------------------------

PerceiverLayer::PerceiverLayer(nn::ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng)
    : attention_(store, name + ".attn", hidden, rng),
      norm1_(store, name + ".norm1", hidden),
      mlp_(store, name + ".mlp", hidden, hidden, hidden, rng),
      norm2_(store, name + ".norm2", hidden) {}

Tensor PerceiverLayer::forward(const Tensor& query, const Tensor& kv, Cache* cache) const {
  Tensor a = attention_.forward(query, kv, cache != nullptr ? &cache->attention : nullptr);
  a.add_(query);
  Tensor h = norm1_.forward(a, cache != nullptr ? &cache->norm1 : nullptr);
  Tensor m = mlp_.forward(h, cache != nullptr ? &cache->mlp : nullptr);
  m.add_(h);
  return norm2_.forward(m, cache != nullptr ? &cache->norm2 : nullptr);
}

void PerceiverLayer::backward(const Cache& cache, const Tensor& dout, Tensor& dquery, Tensor& dkv) const {
  Tensor dm = norm2_.backward(cache.norm2, dout);
  Tensor dh = mlp_.backward(cache.mlp, dm);
  dh.add_(dm);
  Tensor da = norm1_.backward(cache.norm1, dh);
  dquery.add_(da);
  attention_.backward(cache.attention, da, &dquery, &dkv);
}

// ---------------------------------------------------------------------------

void TokenGrads::reset(std::size_t n_map, std::size_t n_agents, int hidden) {
  map.assign(n_map, Tensor());
  agents.assign(n_agents, Tensor());
  map_touched.assign(n_map, 0);
  agent_touched.assign(n_agents, 0);
  (void)hidden;
}

InstanceEncoder::InstanceEncoder(nn::ParamStore& store, const std::string& prefix, const EncoderConfig& config,
                                 std::mt19937_64& rng)
    : config_(config),
      polyline_(store, prefix + ".polyline", config.hidden, rng),
      agent_(store, prefix + ".agent", kAgentFeatureDim, config.hidden, rng),
      pair_(store, prefix + ".pair", config.hidden, rng) {
  if (config.hidden <= 0 || config.hidden % nn::kHeadDim != 0) {
    throw std::invalid_argument("InstanceEncoder: hidden must be a positive multiple of 16");
  }
  if (config.layers < 0 || config.radius <= 0.0 || config.max_neighbors < 1) {
    throw std::invalid_argument("InstanceEncoder: invalid configuration");
  }
  for (int k = 0; k < config.layers; ++k) {
    layers_.emplace_back(store, prefix + ".perceiver" + std::to_string(k), config.hidden, rng);
  }
}

std::vector<ContextEntry> InstanceEncoder::select_context(const MapContext& map, const AgentContext& agents,
                                                          int slot) const {
  const AnchorPose& self = agents.anchors[static_cast<std::size_t>(slot)];
  const int n_map = static_cast<int>(map.anchors.size());
  const int n_agents = static_cast<int>(agents.anchors.size());
  const double r2 = config_.radius * config_.radius;

  struct Candidate {
    double d2;
    int index;
  };
  std::vector<Candidate> candidates;
  for (int j = 0; j < n_map; ++j) {
    const geometry::Vec2 d = map.anchors[static_cast<std::size_t>(j)].position - self.position;
    const double d2 = d.dot(d);
    if (d2 <= r2) candidates.push_back({d2, j});
  }
  for (int j = 0; j < n_agents; ++j) {
    if (j == slot || !agents.alive[static_cast<std::size_t>(j)]) continue;
    const geometry::Vec2 d = agents.anchors[static_cast<std::size_t>(j)].position - self.position;
    const double d2 = d.dot(d);
    if (d2 <= r2) candidates.push_back({d2, n_map + j});
  }
  const std::size_t cap = static_cast<std::size_t>(config_.max_neighbors - 1);
  if (candidates.size() > cap) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(cap), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
                     });
    candidates.resize(cap);
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
  }

  const std::vector<char>* members = nullptr;
  const int route = agents.route[static_cast<std::size_t>(slot)];
  if (route >= 0 && static_cast<std::size_t>(route) < map.route_members.size()) {
    members = &map.route_members[static_cast<std::size_t>(route)];
  }

  std::vector<ContextEntry> entries;
  entries.reserve(candidates.size() + 1);
  entries.push_back({n_map + slot, self_pair_context()});
  for (const Candidate& c : candidates) {
    if (c.index < n_map) {
      const bool on_route = members != nullptr && (*members)[static_cast<std::size_t>(c.index)] != 0;
      entries.push_back({c.index, pair_context(self, map.anchors[static_cast<std::size_t>(c.index)], false, on_route,
                                               config_.radius)});
    } else {
      entries.push_back({c.index, pair_context(self, agents.anchors[static_cast<std::size_t>(c.index - n_map)], true,
                                               false, config_.radius)});
    }
  }
  return entries;
}

Tensor InstanceEncoder::refine(const MapContext& map, const AgentContext& agents, int slot, RefineCache* cache) const {
  return refine_with(map, agents, slot, select_context(map, agents, slot), cache);
}

Tensor InstanceEncoder::refine_with(const MapContext& map, const AgentContext& agents, int slot,
                                    std::vector<ContextEntry> entries, RefineCache* cache) const {
  if (!agents.alive[static_cast<std::size_t>(slot)]) throw std::invalid_argument("refine: agent is not alive");
  const int n_map = static_cast<int>(map.tokens.size());
  const int h = config_.hidden;
  const int n = static_cast<int>(entries.size());
  Tensor kv = Tensor::matrix(n, h);
  if (cache != nullptr) cache->pairs.assign(static_cast<std::size_t>(n), {});
  for (int r = 0; r < n; ++r) {
    const ContextEntry& e = entries[static_cast<std::size_t>(r)];
    const Tensor& token = e.index < n_map ? map.tokens[static_cast<std::size_t>(e.index)]
                                          : agents.tokens[static_cast<std::size_t>(e.index - n_map)];
    Tensor z = pair_.forward(e.context, token, cache != nullptr ? &cache->pairs[static_cast<std::size_t>(r)] : nullptr);
    std::copy(z.data(), z.data() + h, kv.row(r));
  }
  Tensor query = row_tensor(kv.row(0), h);
  Tensor out = perceive(query, kv, cache != nullptr ? &cache->layers : nullptr);
  if (cache != nullptr) cache->entries = std::move(entries);
  return out;
}

Tensor InstanceEncoder::perceive(const Tensor& query, const Tensor& kv,
                                 std::vector<PerceiverLayer::Cache>* caches) const {
  if (caches != nullptr) caches->assign(layers_.size(), {});
  Tensor q = query;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    q = layers_[k].forward(q, kv, caches != nullptr ? &(*caches)[k] : nullptr);
  }
  return q;
}

void InstanceEncoder::perceive_backward(const std::vector<PerceiverLayer::Cache>& caches, const Tensor& dout,
                                        Tensor& dquery, Tensor& dkv) const {
  Tensor dq = dout;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    Tensor dprev(dq.shape());
    layers_[k].backward(caches[k], dq, dprev, dkv);
    dq = std::move(dprev);
  }
  dquery.add_(dq);
}

void InstanceEncoder::refine_backward(const MapContext& map, const AgentContext& agents, const RefineCache& cache,
                                      const Tensor& dz, TokenGrads& grads) const {
  const int n_map = static_cast<int>(map.tokens.size());
  const int h = config_.hidden;
  const int n = static_cast<int>(cache.entries.size());
  Tensor dkv = Tensor::matrix(n, h);
  Tensor dquery = Tensor::matrix(1, h);
  perceive_backward(cache.layers, dz, dquery, dkv);
  for (int c = 0; c < h; ++c) dkv.row(0)[c] += dquery[static_cast<std::size_t>(c)];

  if (grads.map.size() != map.tokens.size() || grads.agents.size() != agents.tokens.size()) {
    grads.reset(map.tokens.size(), agents.tokens.size(), h);
  }
  for (int r = 0; r < n; ++r) {
    const Tensor drow = row_tensor(dkv.row(r), h);
    Tensor dtoken = pair_.backward(cache.pairs[static_cast<std::size_t>(r)], drow);
    const int index = cache.entries[static_cast<std::size_t>(r)].index;
    Tensor* slot;
    if (index < n_map) {
      slot = &grads.map[static_cast<std::size_t>(index)];
      grads.map_touched[static_cast<std::size_t>(index)] = 1;
    } else {
      slot = &grads.agents[static_cast<std::size_t>(index - n_map)];
      grads.agent_touched[static_cast<std::size_t>(index - n_map)] = 1;
    }
    if (slot->empty()) {
      *slot = std::move(dtoken);
    } else {
      slot->add_(dtoken);
    }
  }
}

MapContext InstanceEncoder::encode_map(const scene::Scenario& scenario,
                                       std::vector<PolylineEncoder::Cache>* caches) const {
  MapContext map;
  const std::size_t n = scenario.polylines.size();
  map.anchors.reserve(n);
  map.tokens.reserve(n);
  if (caches != nullptr) caches->assign(n, {});
  for (std::size_t j = 0; j < n; ++j) {
    map.anchors.push_back(scenario.polylines[j].anchor);
    map.tokens.push_back(polyline_.forward(scenario.polylines[j], caches != nullptr ? &(*caches)[j] : nullptr));
  }
  map.route_members.assign(scenario.routes.size(), std::vector<char>(n, 0));
  for (std::size_t r = 0; r < scenario.routes.size(); ++r) {
    for (int id : scenario.routes[r].polyline_ids) map.route_members[r][static_cast<std::size_t>(id)] = 1;
  }
  return map;
}

AgentContext InstanceEncoder::encode_agents(std::span<const dynamics::AgentState> states,
                                            std::vector<nn::MLPBlock::Cache>* caches) const {
  AgentContext ctx;
  const std::size_t n = states.size();
  ctx.anchors.resize(n);
  ctx.tokens.assign(n, Tensor());
  ctx.alive.assign(n, 0);
  ctx.route.assign(n, -1);
  if (caches != nullptr) caches->assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    ctx.anchors[i] = states[i].pose;
    ctx.route[i] = states[i].route_id;
    if (!states[i].alive) continue;
    ctx.alive[i] = 1;
    ctx.tokens[i] = agent_.forward(states[i].features, caches != nullptr ? &(*caches)[i] : nullptr);
  }
  return ctx;
}

}  // namespace instasim::encoder
