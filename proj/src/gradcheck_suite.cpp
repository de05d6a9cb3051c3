#include "instasim/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "instasim/airl.hpp"
#include "instasim/encoder/scene_encoder.hpp"
#include "instasim/nn/gaussian.hpp"
#include "instasim/nn/layers.hpp"
#include "instasim/rl/policy.hpp"
#include "instasim/synthetic.hpp"

namespace instasim {
namespace {

using nn::GradCheckTarget;
using nn::Real;
using nn::Tensor;

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(u(rng));
  return t;
}

double project(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * static_cast<double>(w[i]);
  return s;
}

void corrupt(Tensor& grad) { grad[0] = static_cast<Real>(grad[0] * 1.5 + 0.1); }

struct Runner {
  const GradSuiteOptions& opt;
  std::mt19937_64 rng;
  std::vector<GradSuiteEntry> entries;

  void check(const std::string& name, const std::function<double()>& loss, std::vector<GradCheckTarget> targets,
             std::vector<Tensor>& grads, std::size_t probes = 0) {
    if (opt.inject_bug) corrupt(grads.front());
    GradSuiteEntry e;
    e.name = name;
    e.result = nn::finite_diff_check(loss, targets, opt.eps, probes);
    e.pass = e.result.checked > 0 && e.result.max_rel_error < opt.tolerance;
    entries.push_back(std::move(e));
  }

  void check_store(const std::string& name, const std::function<double()>& loss, nn::ParamStore& store,
                   std::size_t probes) {
    auto targets = nn::store_targets(store);
    if (opt.inject_bug && !targets.empty()) corrupt(*const_cast<Tensor*>(targets.front().grad));
    GradSuiteEntry e;
    e.name = name;
    e.result = nn::finite_diff_check(loss, targets, opt.eps, probes);
    e.pass = e.result.checked > 0 && e.result.max_rel_error < opt.tolerance;
    entries.push_back(std::move(e));
  }

  void linear() {
    Tensor x = random_tensor({2, 4}, rng), w = random_tensor({4, 3}, rng), b = random_tensor({3}, rng);
    const Tensor proj = random_tensor({2, 3}, rng);
    std::vector<Tensor> g{Tensor(w.shape()), Tensor(b.shape())};
    g.push_back(nn::linear_backward(x, w, proj, &g[0], &g[1]));
    check("linear", [&] { return project(nn::linear(x, w, b), proj); },
          {{"w", &w, &g[0]}, {"b", &b, &g[1]}, {"x", &x, &g[2]}}, g);
  }

  void layer_norm() {
    Tensor x = random_tensor({3, 6}, rng, -2.0, 2.0);
    Tensor scale = random_tensor({1, 6}, rng, 0.5, 1.5), shift = random_tensor({1, 6}, rng);
    const Tensor proj = random_tensor({3, 6}, rng);
    nn::LayerNormCache cache;
    nn::layer_norm(x, scale, shift, &cache);
    std::vector<Tensor> g{Tensor(scale.shape()), Tensor(shift.shape())};
    g.push_back(nn::layer_norm_backward(cache, scale, proj, &g[0], &g[1]));
    check("layer_norm", [&] { return project(nn::layer_norm(x, scale, shift, nullptr), proj); },
          {{"scale", &scale, &g[0]}, {"shift", &shift, &g[1]}, {"x", &x, &g[2]}}, g);
  }

  void max_pool() {
    // Entries spaced well apart so the perturbation never changes the argmax.
    Tensor tokens({3, 4});
    const Real vals[] = {0.1f, 0.9f, -0.7f, 0.4f, 0.6f, -0.2f, 0.3f, -0.9f, -0.5f, 0.2f, 0.8f, 0.0f};
    for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = vals[i];
    const Tensor proj = random_tensor({1, 4}, rng);
    std::vector<Tensor> g{Tensor(tokens.shape())};
    nn::max_pool_backward(nn::max_pool_set(tokens).argmax, proj, g[0]);
    check("max_pool_set", [&] { return project(nn::max_pool_set(tokens).pooled, proj); },
          {{"tokens", &tokens, &g[0]}}, g);
  }

  void film() {
    Tensor z = random_tensor({2, 5}, rng), scale = random_tensor({2, 5}, rng), shift = random_tensor({2, 5}, rng);
    const Tensor proj = random_tensor({2, 5}, rng);
    std::vector<Tensor> g{Tensor(z.shape()), Tensor(z.shape()), Tensor(z.shape())};
    nn::film_backward(z, scale, proj, &g[0], &g[1], &g[2]);
    check("film", [&] { return project(nn::film(z, scale, shift), proj); },
          {{"z", &z, &g[0]}, {"scale", &scale, &g[1]}, {"shift", &shift, &g[2]}}, g);
  }

  void attention() {
    const int hidden = 32;
    nn::ParamStore store;
    nn::CrossAttention attn(store, "attn", hidden, rng);
    Tensor query = random_tensor({1, hidden}, rng), kv = random_tensor({3, hidden}, rng);
    const Tensor proj = random_tensor({1, hidden}, rng);
    store.zero_grad();
    nn::AttentionCache cache;
    attn.forward(query, kv, &cache);
    std::vector<Tensor> g{Tensor(query.shape()), Tensor(kv.shape())};
    attn.backward(cache, proj, &g[0], &g[1]);
    auto targets = nn::store_targets(store);
    targets.push_back({"query", &query, &g[0]});
    targets.push_back({"kv", &kv, &g[1]});
    check("cross_attention", [&] { return project(attn.forward(query, kv), proj); }, targets, g);
  }

  void mlp() {
    nn::ParamStore store;
    nn::MLPBlock block(store, "mlp", 6, 16, 4, rng);
    Tensor x = random_tensor({3, 6}, rng);
    const Tensor proj = random_tensor({3, 4}, rng);
    store.zero_grad();
    nn::MLPBlock::Cache cache;
    block.forward(x, &cache);
    std::vector<Tensor> g{block.backward(cache, proj)};
    auto targets = nn::store_targets(store);
    targets.push_back({"x", &x, &g[0]});
    check("mlp_block", [&] { return project(block.forward(x), proj); }, targets, g);
  }

  void gaussian() {
    const nn::GaussianHead head({2.0, 0.1});
    Tensor raw({1, 4}, {Real(0.3), Real(-0.4), Real(-0.2), Real(0.1)});
    const nn::Vec2d action{0.7, -0.05};
    nn::Vec2d dmean{}, dls{};
    head.distribution(raw).log_prob_grad(action, dmean, dls);
    std::vector<Tensor> g{head.backward(raw, dmean, dls)};
    check("gaussian_head", [&] { return head.distribution(raw).log_prob(action); }, {{"raw", &raw, &g[0]}}, g);
  }

  // Observations of every agent at two steps of a scripted-expert rollout.
  struct Batch {
    scene::Scenario scenario;
    std::vector<std::vector<dynamics::AgentState>> frames;
    std::vector<encoder::TrainingSample> samples;
    std::vector<dynamics::Action> actions;
  };

  void fill(Batch& b) {
    b.scenario = synthetic::generate_synthetic_scenario(synthetic::Template::kIntersection, 4, opt.seed + 7);
    for (int step : {0, 5}) {
      std::vector<dynamics::AgentState> states = dynamics::initial_states(b.scenario);
      for (std::size_t i = 0; i < states.size(); ++i) {
        const scene::ExpertStep& e = b.scenario.expert[i][static_cast<std::size_t>(step)];
        states[i].pose = e.pose;
        states[i].features.speed = e.speed;
      }
      b.frames.push_back(std::move(states));
    }
    std::uniform_real_distribution<double> accel(-3.0, 3.0), steer(-0.2, 0.2);
    for (const auto& states : b.frames) {
      for (std::size_t i = 0; i < states.size(); ++i) {
        b.samples.push_back({&b.scenario, std::span<const dynamics::AgentState>(states), static_cast<int>(i)});
        b.actions.push_back({accel(rng), steer(rng)});
      }
    }
  }

  void policy() {
    rl::BehaviorModel model(rl::ModelConfig{}, opt.seed + 1);
    Batch b;
    fill(b);
    constexpr double kValueWeight = 0.05;
    const auto loss = [&] {
      double total = 0.0;
      const auto map = model.encoder().encode_map(b.scenario);
      std::size_t k = 0;
      for (const auto& frame : b.frames) {
        const auto agents = model.encoder().encode_agents(frame);
        for (std::size_t slot = 0; slot < frame.size(); ++slot, ++k) {
          const auto& s = b.samples[k];
          const rl::PolicyOutput out = model.head(model.encoder().refine(map, agents, s.slot));
          total += out.dist.log_prob({b.actions[k].accel, b.actions[k].steer}) + kValueWeight * out.value;
        }
      }
      return total;
    };
    model.store().zero_grad();
    encoder::encoder_backward_batch(model.encoder(), b.samples, [&](std::size_t k, const Tensor& z) {
      rl::BehaviorModel::HeadCache cache;
      const rl::PolicyOutput out = model.head(z, &cache);
      nn::Vec2d dmean{}, dls{};
      out.dist.log_prob_grad({b.actions[k].accel, b.actions[k].steer}, dmean, dls);
      return model.head_backward(cache, dmean, dls, kValueWeight);
    });
    check_store("policy_value_network", loss, model.store(), opt.network_probes);
  }

  void discriminator() {
    airl::Discriminator disc(encoder::EncoderConfig::small(30.0), {2.0, 0.1}, opt.seed + 2);
    Batch b;
    fill(b);
    const auto label = [](std::size_t k) { return k % 2 == 0 ? 1.0 : 0.0; };
    const auto loss = [&] {
      double total = 0.0;
      const auto map = disc.encoder().encode_map(b.scenario);
      std::size_t k = 0;
      for (const auto& frame : b.frames) {
        const auto agents = disc.encoder().encode_agents(frame);
        for (std::size_t slot = 0; slot < frame.size(); ++slot, ++k) {
          const auto& s = b.samples[k];
          const double l = disc.logit(disc.encoder().refine(map, agents, s.slot), b.actions[k]);
          // Binary cross-entropy with logits.
          total += std::max(l, 0.0) - l * label(k) + std::log1p(std::exp(-std::abs(l)));
        }
      }
      return total;
    };
    disc.store().zero_grad();
    encoder::encoder_backward_batch(disc.encoder(), b.samples, [&](std::size_t k, const Tensor& z) {
      airl::Discriminator::DecoderCache cache;
      const double l = disc.logit(z, b.actions[k], &cache);
      return disc.logit_backward(cache, airl::sigmoid(l) - label(k));
    });
    check_store("discriminator_network", loss, disc.store(), opt.network_probes);
  }
};

}  // namespace

std::vector<GradSuiteEntry> run_gradcheck_suite(const GradSuiteOptions& options) {
  Runner r{options, std::mt19937_64(options.seed), {}};
  r.linear();
  r.layer_norm();
  r.max_pool();
  r.film();
  r.attention();
  r.mlp();
  r.gaussian();
  r.policy();
  r.discriminator();
  return std::move(r.entries);
}

}  // namespace instasim
