#include "instasim/rl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "instasim/nn/checkpoint.hpp"
#include "instasim/rl/gae.hpp"

namespace instasim::rl {

void TrainConfig::validate() const {
  ppo.validate();
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (envs_per_epoch < 1) throw std::invalid_argument("train: envs_per_epoch must be >= 1");
  if (workers < 1) throw std::invalid_argument("train: workers must be >= 1");
  if (!(disc_lr > 0.0)) throw std::invalid_argument("train: disc_lr must be > 0");
  if (disc_batch < 1 || disc_steps < 0) throw std::invalid_argument("train: bad discriminator batch settings");
  if (!(lr_decay_fraction >= 0.0 && lr_decay_fraction <= 1.0)) {
    throw std::invalid_argument("train: lr_decay_fraction must be in [0, 1]");
  }
  if (!(lr_decay_factor > 0.0)) throw std::invalid_argument("train: lr_decay_factor must be > 0");
  if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint_every must be >= 0");
  if (model.encoder.hidden != disc_encoder.hidden && disc_encoder.hidden <= 0) {
    throw std::invalid_argument("train: bad discriminator size");
  }
}

double scheduled_lr(double lr, int epoch, int epochs, double decay_fraction, double factor) {
  if (epochs <= 1 || decay_fraction <= 0.0) return lr;
  const double start = (1.0 - decay_fraction) * epochs;
  if (epoch < start) return lr;
  const double span = std::max(1.0, epochs - 1 - start);
  const double frac = std::clamp((epoch - start) / span, 0.0, 1.0);
  return lr * (1.0 + (factor - 1.0) * frac);
}

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch},
          {"disc_loss", disc_loss},
          {"disc_acc", disc_acc},
          {"r_mean_raw", r_mean_raw},
          {"offset", offset},
          {"r_mean_transformed", r_mean_transformed},
          {"policy_loss", ppo.policy_loss},
          {"value_loss", ppo.value_loss},
          {"entropy", ppo.entropy},
          {"approx_kl", ppo.approx_kl},
          {"clip_fraction", ppo.clip_fraction},
          {"lr", lr},
          {"offtrack_rate", offtrack_rate},
          {"collision_rate", collision_rate},
          {"experiences", experiences}};
}

Trainer::Trainer(const TrainConfig& config, std::span<const scene::Scenario> scenarios)
    : config_(config), scenarios_(scenarios), expert_(scenarios), rng_(config.seed) {
  config_.validate();
  if (scenarios.empty()) throw std::invalid_argument("Trainer: no training scenarios");
  model_ = std::make_unique<BehaviorModel>(config_.model, env_seed(config.seed, -1));
  disc_ = std::make_unique<airl::Discriminator>(config_.disc_encoder, config_.model.action_scale,
                                                env_seed(config.seed, -2));
  if (!config_.out_dir.empty()) std::filesystem::create_directories(config_.out_dir);
}

EpochLog Trainer::run_epoch() {
  EpochLog log;
  log.epoch = epoch_;
  // Per-epoch stream so that a resumed run repeats the same draws.
  rng_.seed(env_seed(config_.seed ^ 0x5A5A5A5Aull, epoch_));
  log.lr = scheduled_lr(config_.ppo.lr, epoch_, config_.epochs, config_.lr_decay_fraction, config_.lr_decay_factor);

  // Scenario draw for this epoch.
  std::vector<std::size_t> pool(scenarios_.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng_);
  std::vector<const scene::Scenario*> envs;
  for (int k = 0; k < config_.envs_per_epoch; ++k) envs.push_back(&scenarios_[pool[static_cast<std::size_t>(k) % pool.size()]]);

  RolloutConfig rc;
  rc.seed = env_seed(config_.seed, epoch_);
  rc.workers = config_.workers;
  RolloutBatch batch = collect_rollouts(*model_, envs, rc);
  if (batch.experiences.empty()) throw std::runtime_error("train: rollout produced no experience");
  log.experiences = static_cast<int>(batch.experiences.size());
  {
    const eval::MetricsReport m = eval::metrics_from_traces(batch.scenarios, batch.traces);
    log.offtrack_rate = m.offtrack_rate;
    log.collision_rate = m.collision_rate;
  }

  // Discriminator.
  Vec2d policy_std{0.0, 0.0};
  for (const Experience& e : batch.experiences) {
    policy_std[0] += e.stddev[0];
    policy_std[1] += e.stddev[1];
  }
  policy_std[0] /= static_cast<double>(batch.experiences.size());
  policy_std[1] /= static_cast<double>(batch.experiences.size());
  nn::AdamWConfig disc_opt;
  disc_opt.lr = config_.disc_lr;
  for (int s = 0; s < config_.disc_steps; ++s) {
    std::vector<airl::LabeledSample> generated;
    std::uniform_int_distribution<std::size_t> pick(0, batch.experiences.size() - 1);
    for (int k = 0; k < config_.disc_batch; ++k) {
      const Experience& e = batch.experiences[pick(rng_)];
      generated.push_back({batch.observation(e), e.executed});
    }
    const std::vector<airl::LabeledSample> expert =
        expert_.draw(static_cast<std::size_t>(config_.disc_batch), policy_std, rng_);
    const airl::DiscriminatorStats ds = airl::discriminator_update(*disc_, generated, expert, disc_opt);
    log.disc_loss += ds.loss / config_.disc_steps;
    log.disc_acc += ds.accuracy / config_.disc_steps;
  }

  // Surrogate rewards with the updated discriminator.
  {
    std::vector<encoder::TokenCache> caches(batch.scenarios.size());
    std::vector<std::vector<std::size_t>> by_frame(batch.frames.size());
    for (std::size_t k = 0; k < batch.experiences.size(); ++k) {
      by_frame[static_cast<std::size_t>(batch.experiences[k].frame)].push_back(k);
    }
    parallel_for(static_cast<int>(batch.scenarios.size()), config_.workers, [&](int env) {
      for (std::size_t f = 0; f < batch.frames.size(); ++f) {
        const Frame& frame = batch.frames[f];
        if (frame.env != env || by_frame[f].empty()) continue;
        std::vector<dynamics::Action> actions(frame.states.size());
        for (std::size_t k : by_frame[f]) {
          actions[static_cast<std::size_t>(batch.experiences[k].agent)] = batch.experiences[k].executed;
        }
        const std::vector<double> logits =
            disc_->score(*batch.scenarios[static_cast<std::size_t>(env)], frame.states, actions,
                         caches[static_cast<std::size_t>(env)]);
        for (std::size_t k : by_frame[f]) {
          Experience& e = batch.experiences[k];
          e.raw_reward = airl::surrogate_reward_from_logit(logits[static_cast<std::size_t>(e.agent)]);
        }
      }
    });
  }
  std::vector<double> rewards(batch.experiences.size());
  for (std::size_t k = 0; k < rewards.size(); ++k) rewards[k] = batch.experiences[k].raw_reward;
  log.r_mean_raw = airl::mean_of(rewards);
  log.offset = config_.reward.apply(rewards);
  log.r_mean_transformed = airl::mean_of(rewards);
  for (std::size_t k = 0; k < rewards.size(); ++k) batch.experiences[k].reward = rewards[k];

  assign_advantages(batch, config_.ppo.gamma, config_.ppo.lambda);
  log.ppo = ppo_update(*model_, batch, config_.ppo, log.lr, rng_);

  check_finite(log, batch);
  logs_.push_back(log);
  ++epoch_;
  if (!config_.out_dir.empty()) {
    std::ofstream out(config_.out_dir / "train_log.jsonl", std::ios::app);
    out << log.to_json().dump() << '\n';
    if (config_.checkpoint_every > 0 && (epoch_ % config_.checkpoint_every == 0 || epoch_ == config_.epochs)) {
      checkpoints_.push_back(save_checkpoint());
    }
  }
  return log;
}

void Trainer::run(int epochs) {
  const int target = epochs < 0 ? config_.epochs : epoch_ + epochs;
  while (epoch_ < target) run_epoch();
}

std::filesystem::path Trainer::save_checkpoint() const {
  nlohmann::json extra{{"epoch", epoch_}, {"seed", config_.seed}, {"hidden", config_.model.encoder.hidden},
                       {"layers", config_.model.encoder.layers}};
  return nn::save_checkpoint(config_.out_dir, epoch_, {{"policy", &model_->store()}, {"disc", &disc_->store()}}, extra);
}

void Trainer::resume(const std::filesystem::path& checkpoint) {
  const nlohmann::json manifest =
      nn::load_checkpoint(checkpoint, {{"policy", &model_->store()}, {"disc", &disc_->store()}});
  epoch_ = manifest["extra"].value("epoch", manifest.value("epoch", 0));
}

void Trainer::check_finite(const EpochLog& log, const RolloutBatch& batch) const {
  const double values[] = {log.disc_loss, log.r_mean_raw, log.offset, log.ppo.policy_loss, log.ppo.value_loss,
                           log.ppo.entropy};
  bool finite = std::all_of(std::begin(values), std::end(values), [](double v) { return std::isfinite(v); });
  for (const auto& [name, p] : model_->store().params()) {
    for (nn::Real v : p.value.values()) finite = finite && std::isfinite(static_cast<double>(v));
  }
  if (finite) return;
  nlohmann::json dump{{"log", log.to_json()}, {"experiences", batch.experiences.size()}};
  nlohmann::json bad = nlohmann::json::array();
  for (const auto& [name, p] : model_->store().params()) {
    if (std::any_of(p.value.values().begin(), p.value.values().end(),
                    [](nn::Real v) { return !std::isfinite(static_cast<double>(v)); })) {
      bad.push_back(name);
    }
  }
  dump["non_finite_parameters"] = bad;
  if (!config_.out_dir.empty()) {
    std::ofstream out(config_.out_dir / ("diverged_epoch_" + std::to_string(log.epoch) + ".json"));
    out << dump.dump(1) << '\n';
  }
  throw TrainingDiverged("training diverged at epoch " + std::to_string(log.epoch) + ": " + dump.dump());
}

// ---------------------------------------------------------------------------

std::vector<double> train_bc(BehaviorModel& model, std::span<const scene::Scenario> scenarios, const BcConfig& config) {
  const airl::ExpertBuffer buffer(scenarios);
  std::mt19937_64 rng(env_seed(config.seed, -3));
  nn::AdamWConfig opt;
  opt.lr = config.lr;
  std::vector<double> losses;
  for (int step = 0; step < config.steps; ++step) {
    const std::vector<airl::LabeledSample> batch =
        buffer.draw(static_cast<std::size_t>(config.batch), Vec2d{0.0, 0.0}, rng);
    losses.push_back(airl::bc_update(model, batch, opt));
  }
  return losses;
}

std::size_t select_best(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw std::invalid_argument("model_selection: no checkpoints");
  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    if (eval::selection_score(candidates[k].metrics) < eval::selection_score(candidates[best].metrics)) best = k;
  }
  return best;
}

std::size_t model_selection(std::span<const std::filesystem::path> checkpoints, const ModelConfig& config,
                            std::span<const scene::Scenario* const> validation, std::vector<Candidate>* scored) {
  if (checkpoints.empty()) throw std::invalid_argument("model_selection: no checkpoints");
  std::vector<Candidate> candidates;
  for (const std::filesystem::path& path : checkpoints) {
    BehaviorModel model(config, 0);
    const nlohmann::json manifest = nn::load_checkpoint(path, {{"policy", &model.store()}});
    candidates.push_back({manifest.value("epoch", 0), eval::evaluate_policy(model, validation)});
  }
  const std::size_t best = select_best(candidates);
  if (scored != nullptr) *scored = std::move(candidates);
  return best;
}

}  // namespace instasim::rl
