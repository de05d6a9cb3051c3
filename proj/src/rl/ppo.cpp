#include "instasim/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "instasim/rl/gae.hpp"

namespace instasim::rl {

void PPOConfig::validate() const {
  if (!(clip_eps > 0.0)) throw std::invalid_argument("ppo: clip_eps must be > 0");
  if (epochs_per_batch < 1) throw std::invalid_argument("ppo: epochs_per_batch must be >= 1");
  if (minibatch < 1) throw std::invalid_argument("ppo: minibatch must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("ppo: lr must be > 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ppo: gamma must be in [0, 1)");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("ppo: lambda must be in [0, 1)");
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0 || weight_decay < 0.0) {
    throw std::invalid_argument("ppo: coefficients must be >= 0");
  }
}

void assign_advantages(RolloutBatch& batch, double gamma, double lambda) {
  auto& exps = batch.experiences;
  std::size_t begin = 0;
  while (begin < exps.size()) {
    std::size_t end = begin + 1;
    while (end < exps.size() && exps[end].env == exps[begin].env && exps[end].agent == exps[begin].agent) ++end;
    const std::size_t len = end - begin;
    std::vector<double> rewards(len), values(len + 1, 0.0);
    std::vector<char> dones(len, 0);
    for (std::size_t k = 0; k < len; ++k) {
      const Experience& e = exps[begin + k];
      rewards[k] = e.reward;
      values[k] = e.value;
      dones[k] = e.done ? 1 : 0;
    }
    const Experience& tail = exps[end - 1];
    values[len] = tail.done ? 0.0 : tail.bootstrap;
    const GaeResult g = compute_gae(rewards, values, dones, gamma, lambda);
    for (std::size_t k = 0; k < len; ++k) {
      exps[begin + k].advantage = g.advantages[k];
      exps[begin + k].ret = g.returns[k];
    }
    begin = end;
  }
}

PPOStats ppo_update(BehaviorModel& model, const RolloutBatch& batch, const PPOConfig& config, double lr,
                    std::mt19937_64& rng) {
  config.validate();
  const std::size_t n = batch.experiences.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty batch");

  std::vector<double> adv(n);
  for (std::size_t k = 0; k < n; ++k) adv[k] = batch.experiences[k].advantage;
  normalize_advantages(adv);

  std::vector<encoder::TrainingSample> all_obs(n);
  for (std::size_t k = 0; k < n; ++k) all_obs[k] = batch.observation(batch.experiences[k]);

  nn::AdamWConfig opt;
  opt.lr = lr;
  opt.weight_decay = config.weight_decay;
  const double vscale = model.config().value_scale;

  PPOStats stats;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double loss_weight_total = 0.0;
  bool first = true;
  for (int epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.minibatch)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.minibatch));
      const std::size_t m = stop - start;
      const double inv_m = 1.0 / static_cast<double>(m);
      std::vector<encoder::TrainingSample> obs(m);
      for (std::size_t k = 0; k < m; ++k) obs[k] = all_obs[order[start + k]];

      double pl = 0.0, vl = 0.0, ent = 0.0, kl = 0.0, clipped = 0.0, max_dev = 0.0;
      model.store().zero_grad();
      encoder::encoder_backward_batch(model.encoder(), obs, [&](std::size_t idx, const Tensor& z) {
        const std::size_t k = order[start + idx];
        const Experience& e = batch.experiences[k];
        BehaviorModel::HeadCache cache;
        const PolicyOutput out = model.head(z, &cache);
        const double logp = out.dist.log_prob(e.sampled);
        const double log_ratio = logp - e.log_prob;
        const double ratio = std::exp(log_ratio);
        const double a = adv[k];
        const double unclipped = ratio * a;
        const double clipped_obj = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps) * a;
        pl -= std::min(unclipped, clipped_obj) * inv_m;
        max_dev = std::max(max_dev, std::abs(ratio - 1.0));
        kl += (ratio - 1.0 - log_ratio) * inv_m;
        const bool use_unclipped = unclipped <= clipped_obj;
        if (!use_unclipped) clipped += inv_m;

        Vec2d dmean{}, dlog_std{};
        out.dist.log_prob_grad(e.sampled, dmean, dlog_std);
        const double dlogp = use_unclipped ? -ratio * a * inv_m : 0.0;
        for (int d = 0; d < 2; ++d) {
          dmean[d] *= dlogp;
          dlog_std[d] = dlog_std[d] * dlogp - config.entropy_coef * inv_m;
        }
        ent += out.dist.entropy() * inv_m;
        const double verr = (out.value - e.ret) / vscale;
        vl += verr * verr * inv_m;
        const double dvalue = config.value_coef * 2.0 * verr / vscale * inv_m;
        return model.head_backward(cache, dmean, dlog_std, dvalue);
      });
      if (config.max_grad_norm > 0.0) {
        const double norm = model.store().grad_norm();
        if (norm > config.max_grad_norm) model.store().scale_grads(config.max_grad_norm / norm);
      }
      nn::adamw_step(model.store(), opt);

      if (first) {
        stats.first_ratio_max_dev = max_dev;
        first = false;
      }
      const double w = static_cast<double>(m);
      stats.policy_loss += pl * w;
      stats.value_loss += vl * w;
      stats.entropy += ent * w;
      stats.approx_kl += kl * w;
      stats.clip_fraction += clipped * w;
      loss_weight_total += w;
      ++stats.updates;
    }
  }
  stats.policy_loss /= loss_weight_total;
  stats.value_loss /= loss_weight_total;
  stats.entropy /= loss_weight_total;
  stats.approx_kl /= loss_weight_total;
  stats.clip_fraction /= loss_weight_total;
  return stats;
}

}  // namespace instasim::rl
