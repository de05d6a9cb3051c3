#include "instasim/airl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace instasim::airl {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double surrogate_reward(double d) {
  const double c = std::clamp(d, kProbClamp, 1.0 - kProbClamp);
  return std::log(c) - std::log1p(-c);
}

double surrogate_reward_from_logit(double logit) { return surrogate_reward(sigmoid(logit)); }

double mean_of(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_of: empty input");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double RewardTransform::offset(std::span<const double> rewards) const {
  if (mode == RewardMode::kConstant) return constant;
  if (rewards.empty()) throw std::invalid_argument("adaptive_offset: no generated rewards this epoch");
  return target - mean_of(rewards);
}

double RewardTransform::apply(std::span<double> rewards) const {
  const double c = offset(rewards);
  for (double& r : rewards) r += c;
  return c;
}

// ---------------------------------------------------------------------------

Discriminator::Discriminator(const encoder::EncoderConfig& config, Vec2d action_scale, std::uint64_t seed)
    : action_scale_(action_scale), store_(std::make_unique<nn::ParamStore>()) {
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<encoder::InstanceEncoder>(*store_, "disc.encoder", config, rng);
  decoder_ = nn::MLPBlock(*store_, "disc.decoder", config.hidden + 2, config.hidden, 1, rng, 0.1);
}

double Discriminator::logit(const Tensor& z, const dynamics::Action& action, DecoderCache* cache) const {
  const int h = z.cols();
  Tensor x = Tensor::matrix(1, h + 2);
  std::copy(z.data(), z.data() + h, x.data());
  x[static_cast<std::size_t>(h)] = static_cast<nn::Real>(action.accel / action_scale_[0]);
  x[static_cast<std::size_t>(h + 1)] = static_cast<nn::Real>(action.steer / action_scale_[1]);
  const Tensor y = decoder_.forward(x, cache != nullptr ? &cache->mlp : nullptr);
  return static_cast<double>(y[0]);
}

Tensor Discriminator::logit_backward(const DecoderCache& cache, double dlogit) const {
  Tensor dy = Tensor::matrix(1, 1);
  dy[0] = static_cast<nn::Real>(dlogit);
  const Tensor dx = decoder_.backward(cache.mlp, dy);
  const int h = dx.cols() - 2;
  Tensor dz = Tensor::matrix(1, h);
  std::copy(dx.data(), dx.data() + h, dz.data());
  return dz;
}

std::vector<double> Discriminator::score(const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                                         std::span<const dynamics::Action> actions, encoder::TokenCache& cache) const {
  const encoder::SceneEncoding enc = encoder::encode_scene(*encoder_, *store_, scenario, states, cache);
  std::vector<double> out(states.size(), 0.0);
  for (std::size_t k = 0; k < enc.agent_slots.size(); ++k) {
    const auto slot = static_cast<std::size_t>(enc.agent_slots[k]);
    out[slot] = logit(enc.tokens[k], actions[slot]);
  }
  return out;
}

double Discriminator::score_sample(const LabeledSample& sample) const {
  const encoder::MapContext map = encoder_->encode_map(*sample.obs.scenario);
  const encoder::AgentContext agents = encoder_->encode_agents(sample.obs.states);
  return logit(encoder_->refine(map, agents, sample.obs.slot), sample.action);
}

// ---------------------------------------------------------------------------

ExpertBuffer::ExpertBuffer(std::span<const scene::Scenario> scenarios) : scenarios_(scenarios) {
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const scene::Scenario& sc = scenarios[s];
    if (!sc.has_expert()) throw std::invalid_argument("ExpertBuffer: scenario without expert data");
    for (int t = 0; t < sc.horizon; ++t) {
      Frame frame;
      frame.scenario = static_cast<int>(s);
      frame.step = t;
      frame.states.resize(sc.agents.size());
      for (std::size_t i = 0; i < sc.agents.size(); ++i) {
        const scene::ExpertStep& e = sc.expert[i][static_cast<std::size_t>(t)];
        dynamics::AgentState& st = frame.states[i];
        st.pose = e.pose;
        st.features = sc.agents[i].features;
        st.features.speed = e.speed;
        st.route_id = sc.agents[i].route_id;
        st.alive = true;
      }
      const int frame_index = static_cast<int>(frames_.size());
      frames_.push_back(std::move(frame));
      for (std::size_t i = 0; i < sc.agents.size(); ++i) {
        const scene::ExpertStep& e = sc.expert[i][static_cast<std::size_t>(t)];
        samples_.push_back({frame_index, static_cast<int>(i), dynamics::Action{e.accel, e.steer}.clamped()});
      }
    }
  }
}

LabeledSample ExpertBuffer::labeled(std::size_t index) const {
  const Sample& s = samples_.at(index);
  const Frame& f = frames_[static_cast<std::size_t>(s.frame)];
  return {{&scenarios_[static_cast<std::size_t>(f.scenario)], f.states, s.agent}, s.action};
}

LabeledSample ExpertBuffer::noised(std::size_t index, const Vec2d& noise_std, std::mt19937_64& rng) const {
  LabeledSample out = labeled(index);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.action.accel += noise_std[0] * normal(rng);
  out.action.steer += noise_std[1] * normal(rng);
  out.action = out.action.clamped();
  return out;
}

std::vector<LabeledSample> ExpertBuffer::draw(std::size_t count, const Vec2d& noise_std, std::mt19937_64& rng) const {
  if (samples_.empty()) throw std::invalid_argument("ExpertBuffer::draw: empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
  std::vector<LabeledSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(noised(pick(rng), noise_std, rng));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<encoder::TrainingSample> observations(std::span<const LabeledSample> a, std::span<const LabeledSample> b) {
  std::vector<encoder::TrainingSample> out;
  out.reserve(a.size() + b.size());
  for (const LabeledSample& s : a) out.push_back(s.obs);
  for (const LabeledSample& s : b) out.push_back(s.obs);
  return out;
}

}  // namespace

DiscriminatorStats discriminator_update(Discriminator& disc, std::span<const LabeledSample> generated,
                                        std::span<const LabeledSample> expert, const nn::AdamWConfig& opt) {
  if (generated.empty() || expert.empty()) throw std::invalid_argument("discriminator_update: empty batch");
  const std::vector<encoder::TrainingSample> obs = observations(generated, expert);
  const double inv_n = 1.0 / static_cast<double>(obs.size());
  DiscriminatorStats stats;
  disc.store().zero_grad();
  encoder::encoder_backward_batch(disc.encoder(), obs, [&](std::size_t idx, const Tensor& z) {
    const bool real = idx >= generated.size();
    const LabeledSample& s = real ? expert[idx - generated.size()] : generated[idx];
    Discriminator::DecoderCache cache;
    const double l = disc.logit(z, s.action, &cache);
    const double y = real ? 1.0 : 0.0;
    stats.loss += (softplus(l) - y * l) * inv_n;
    stats.accuracy += ((l > 0.0) == real ? 1.0 : 0.0) * inv_n;
    return disc.logit_backward(cache, (sigmoid(l) - y) * inv_n);
  });
  nn::adamw_step(disc.store(), opt);
  return stats;
}

DiscriminatorStats discriminator_loss(const Discriminator& disc, std::span<const LabeledSample> generated,
                                      std::span<const LabeledSample> expert) {
  if (generated.empty() || expert.empty()) throw std::invalid_argument("discriminator_loss: empty batch");
  DiscriminatorStats stats;
  const double inv_n = 1.0 / static_cast<double>(generated.size() + expert.size());
  auto add = [&](const LabeledSample& s, bool real) {
    const double l = disc.score_sample(s);
    const double y = real ? 1.0 : 0.0;
    stats.loss += (softplus(l) - y * l) * inv_n;
    stats.accuracy += ((l > 0.0) == real ? 1.0 : 0.0) * inv_n;
  };
  for (const LabeledSample& s : generated) add(s, false);
  for (const LabeledSample& s : expert) add(s, true);
  return stats;
}

double bc_update(rl::BehaviorModel& model, std::span<const LabeledSample> expert, const nn::AdamWConfig& opt) {
  if (expert.empty()) throw std::invalid_argument("bc_update: empty batch");
  std::vector<encoder::TrainingSample> obs;
  obs.reserve(expert.size());
  for (const LabeledSample& s : expert) obs.push_back(s.obs);
  const double inv_n = 1.0 / static_cast<double>(expert.size());
  double loss = 0.0;
  model.store().zero_grad();
  encoder::encoder_backward_batch(model.encoder(), obs, [&](std::size_t idx, const Tensor& z) {
    rl::BehaviorModel::HeadCache cache;
    const rl::PolicyOutput out = model.head(z, &cache);
    const Vec2d a{expert[idx].action.accel, expert[idx].action.steer};
    loss -= out.dist.log_prob(a) * inv_n;
    Vec2d dmean{}, dlog_std{};
    out.dist.log_prob_grad(a, dmean, dlog_std);
    for (int d = 0; d < 2; ++d) {
      dmean[d] *= -inv_n;
      dlog_std[d] *= -inv_n;
    }
    return model.head_backward(cache, dmean, dlog_std, 0.0);
  });
  nn::adamw_step(model.store(), opt);
  return loss;
}

double bc_loss(const rl::BehaviorModel& model, std::span<const LabeledSample> expert) {
  if (expert.empty()) throw std::invalid_argument("bc_loss: empty batch");
  double loss = 0.0;
  for (const LabeledSample& s : expert) {
    const encoder::MapContext map = model.encoder().encode_map(*s.obs.scenario);
    const encoder::AgentContext agents = model.encoder().encode_agents(s.obs.states);
    const rl::PolicyOutput out = model.head(model.encoder().refine(map, agents, s.obs.slot));
    loss -= out.dist.log_prob({s.action.accel, s.action.steer});
  }
  return loss / static_cast<double>(expert.size());
}

}  // namespace instasim::airl
