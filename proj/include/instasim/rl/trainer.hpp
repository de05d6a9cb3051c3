#ifndef INSTASIM_RL_TRAINER_HPP_
#define INSTASIM_RL_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "instasim/airl.hpp"
#include "instasim/eval.hpp"
#include "instasim/rl/policy.hpp"
#include "instasim/rl/ppo.hpp"
#include "instasim/rl/rollout.hpp"

namespace instasim::rl {

struct TrainConfig {
  ModelConfig model;
  encoder::EncoderConfig disc_encoder = encoder::EncoderConfig::small(30.0);
  int epochs = 300;
  int envs_per_epoch = 4;
  int workers = 1;
  std::uint64_t seed = 0;
  PPOConfig ppo;
  double lr_decay_fraction = 0.3;  // final share of epochs over which lr decays
  double lr_decay_factor = 0.1;
  double disc_lr = 1e-4;
  int disc_batch = 256;  // per class
  int disc_steps = 1;
  airl::RewardTransform reward;
  int checkpoint_every = 50;
  std::filesystem::path out_dir;  // empty: no files written

  void validate() const;
};

// Learning rate for a 0-based epoch: constant, then linear decay down to
// lr * factor at the last epoch.
double scheduled_lr(double lr, int epoch, int epochs, double decay_fraction, double factor);

struct EpochLog {
  int epoch = 0;
  double disc_loss = 0.0;
  double disc_acc = 0.0;
  double r_mean_raw = 0.0;
  double offset = 0.0;
  double r_mean_transformed = 0.0;
  PPOStats ppo;
  double lr = 0.0;
  double offtrack_rate = 0.0;
  double collision_rate = 0.0;
  int experiences = 0;

  nlohmann::json to_json() const;
};

// Raised when a loss turns non-finite; a diagnostic dump is written first.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Trainer {
 public:
  // Scenarios need expert data and must outlive the trainer.
  Trainer(const TrainConfig& config, std::span<const scene::Scenario> scenarios);

  EpochLog run_epoch();
  void run(int epochs = -1);

  // Restores policy and discriminator from a checkpoint written by this
  // trainer and continues after its epoch.
  void resume(const std::filesystem::path& checkpoint);
  std::filesystem::path save_checkpoint() const;

  int epoch() const { return epoch_; }
  const TrainConfig& config() const { return config_; }
  BehaviorModel& model() { return *model_; }
  const BehaviorModel& model() const { return *model_; }
  airl::Discriminator& discriminator() { return *disc_; }
  const std::vector<EpochLog>& logs() const { return logs_; }
  const std::vector<std::filesystem::path>& checkpoints() const { return checkpoints_; }

 private:
  void check_finite(const EpochLog& log, const RolloutBatch& batch) const;

  TrainConfig config_;
  std::span<const scene::Scenario> scenarios_;
  std::unique_ptr<BehaviorModel> model_;
  std::unique_ptr<airl::Discriminator> disc_;
  airl::ExpertBuffer expert_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  std::vector<EpochLog> logs_;
  std::vector<std::filesystem::path> checkpoints_;
};

struct BcConfig {
  int steps = 2000;
  int batch = 256;
  double lr = 2e-4;
  std::uint64_t seed = 0;
};

// Behaviour cloning of the scripted expert with the same architecture.
std::vector<double> train_bc(BehaviorModel& model, std::span<const scene::Scenario> scenarios, const BcConfig& config);

struct Candidate {
  int epoch = 0;
  eval::MetricsReport metrics;
};

// Lowest selection score; ties go to the earliest candidate. Throws
// std::invalid_argument on an empty list.
std::size_t select_best(std::span<const Candidate> candidates);

// Loads each checkpoint into a model of `config`, evaluates it closed-loop
// and returns the best one's index.
std::size_t model_selection(std::span<const std::filesystem::path> checkpoints, const ModelConfig& config,
                            std::span<const scene::Scenario* const> validation, std::vector<Candidate>* scored = nullptr);

}  // namespace instasim::rl

#endif  // INSTASIM_RL_TRAINER_HPP_
