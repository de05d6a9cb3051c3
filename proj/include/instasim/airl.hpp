#ifndef INSTASIM_AIRL_HPP_
#define INSTASIM_AIRL_HPP_

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "instasim/dynamics.hpp"
#include "instasim/encoder/instance_encoder.hpp"
#include "instasim/encoder/scene_encoder.hpp"
#include "instasim/nn/layers.hpp"
#include "instasim/nn/param_store.hpp"
#include "instasim/rl/policy.hpp"

namespace instasim::airl {

using nn::Tensor;
using nn::Vec2d;

inline constexpr double kProbClamp = 1e-6;

double sigmoid(double x);
// log d - log(1 - d), with d clamped to [1e-6, 1 - 1e-6].
double surrogate_reward(double d);
double surrogate_reward_from_logit(double logit);

enum class RewardMode { kAdaptive, kConstant };

struct RewardTransform {
  RewardMode mode = RewardMode::kAdaptive;
  double target = 11.0;
  double constant = 5.0;

  // Offset for one epoch's generated rewards. Throws std::invalid_argument
  // on an empty epoch in adaptive mode.
  double offset(std::span<const double> rewards) const;
  // Adds the offset in place and returns it.
  double apply(std::span<double> rewards) const;
};

double mean_of(std::span<const double> values);

// Observation plus executed action.
struct LabeledSample {
  encoder::TrainingSample obs;
  dynamics::Action action;
};

// D(o, a) = sigmoid(decoder([z_i^(K), a / scale])).
class Discriminator {
 public:
  struct DecoderCache {
    nn::MLPBlock::Cache mlp;
  };

  Discriminator(const encoder::EncoderConfig& config, Vec2d action_scale, std::uint64_t seed);
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  nn::ParamStore& store() { return *store_; }
  const nn::ParamStore& store() const { return *store_; }
  const encoder::InstanceEncoder& encoder() const { return *encoder_; }

  double logit(const Tensor& z, const dynamics::Action& action, DecoderCache* cache = nullptr) const;
  Tensor logit_backward(const DecoderCache& cache, double dlogit) const;

  // Logits for every alive agent of one step (0 for dead slots).
  std::vector<double> score(const scene::Scenario& scenario, std::span<const dynamics::AgentState> states,
                            std::span<const dynamics::Action> actions, encoder::TokenCache& cache) const;
  double score_sample(const LabeledSample& sample) const;

 private:
  Vec2d action_scale_;
  std::unique_ptr<nn::ParamStore> store_;
  std::unique_ptr<encoder::InstanceEncoder> encoder_;
  nn::MLPBlock decoder_;
};

// Expert demonstrations: every agent at every step of each scenario's
// scripted-expert trajectory.
class ExpertBuffer {
 public:
  struct Frame {
    int scenario = 0;
    int step = 0;
    std::vector<dynamics::AgentState> states;
  };
  struct Sample {
    int frame = 0;
    int agent = 0;
    dynamics::Action action;
  };

  ExpertBuffer() = default;
  // Scenarios must carry expert data and outlive the buffer.
  explicit ExpertBuffer(std::span<const scene::Scenario> scenarios);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<Frame>& frames() const { return frames_; }

  LabeledSample labeled(std::size_t index) const;
  // Actions perturbed with N(0, std) per dimension, then clamped to the
  // actuator bounds.
  LabeledSample noised(std::size_t index, const Vec2d& noise_std, std::mt19937_64& rng) const;
  std::vector<LabeledSample> draw(std::size_t count, const Vec2d& noise_std, std::mt19937_64& rng) const;

 private:
  std::span<const scene::Scenario> scenarios_;
  std::vector<Frame> frames_;
  std::vector<Sample> samples_;
};

struct DiscriminatorStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Binary cross-entropy (expert = 1, generated = 0) and a single AdamW step.
// Throws std::invalid_argument on an empty batch.
DiscriminatorStats discriminator_update(Discriminator& disc, std::span<const LabeledSample> generated,
                                        std::span<const LabeledSample> expert, const nn::AdamWConfig& opt);
// Loss and accuracy without touching parameters.
DiscriminatorStats discriminator_loss(const Discriminator& disc, std::span<const LabeledSample> generated,
                                      std::span<const LabeledSample> expert);

// Mean negative log-likelihood of expert actions and one AdamW step.
double bc_update(rl::BehaviorModel& model, std::span<const LabeledSample> expert, const nn::AdamWConfig& opt);
double bc_loss(const rl::BehaviorModel& model, std::span<const LabeledSample> expert);

}  // namespace instasim::airl

#endif  // INSTASIM_AIRL_HPP_
