#ifndef INSTASIM_NN_GAUSSIAN_HPP_
#define INSTASIM_NN_GAUSSIAN_HPP_

#include <array>
#include <random>

#include "instasim/nn/tensor.hpp"

namespace instasim::nn {

inline constexpr double kMinLogStd = -5.0;
inline constexpr double kMaxLogStd = 1.0;

using Vec2d = std::array<double, 2>;

// Diagonal Gaussian over (accel, steer), before clamping to actuator bounds.
struct DiagGaussian {
  Vec2d mean{0.0, 0.0};
  Vec2d log_std{0.0, 0.0};

  Vec2d stddev() const;
  double log_prob(const Vec2d& x) const;
  // d log_prob / d mean and d log_prob / d log_std.
  void log_prob_grad(const Vec2d& x, Vec2d& dmean, Vec2d& dlog_std) const;
  double entropy() const;
  Vec2d sample(std::mt19937_64& rng) const;
};

// Maps the 4 raw head outputs to a distribution:
//   mean = scale * raw[0:2]
//   log_std = clamp(raw[2:4] + log(scale), -5, 1)
class GaussianHead {
 public:
  GaussianHead() = default;
  explicit GaussianHead(Vec2d scale) : scale_(scale) {}

  DiagGaussian distribution(const Tensor& raw) const;
  // Converts gradients w.r.t. mean/log_std into gradients w.r.t. raw [1, 4].
  // The clamp passes no gradient outside its range.
  Tensor backward(const Tensor& raw, const Vec2d& dmean, const Vec2d& dlog_std) const;

  const Vec2d& scale() const { return scale_; }

 private:
  Vec2d scale_{1.0, 1.0};
};

}  // namespace instasim::nn

#endif  // INSTASIM_NN_GAUSSIAN_HPP_
