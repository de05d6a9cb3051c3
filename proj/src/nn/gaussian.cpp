#include "instasim/nn/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace instasim::nn {

Vec2d DiagGaussian::stddev() const { return {std::exp(log_std[0]), std::exp(log_std[1])}; }

double DiagGaussian::log_prob(const Vec2d& x) const {
  double lp = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double z = (x[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -0.5 * z * z - log_std[d] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

void DiagGaussian::log_prob_grad(const Vec2d& x, Vec2d& dmean, Vec2d& dlog_std) const {
  for (int d = 0; d < 2; ++d) {
    const double inv_std = std::exp(-log_std[d]);
    const double z = (x[d] - mean[d]) * inv_std;
    dmean[d] = z * inv_std;
    dlog_std[d] = z * z - 1.0;
  }
}

double DiagGaussian::entropy() const {
  return log_std[0] + log_std[1] + 1.0 + std::log(2.0 * std::numbers::pi);
}

Vec2d DiagGaussian::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec2d out{};
  for (int d = 0; d < 2; ++d) out[d] = mean[d] + std::exp(log_std[d]) * normal(rng);
  return out;
}

DiagGaussian GaussianHead::distribution(const Tensor& raw) const {
  if (raw.size() != 4) throw std::invalid_argument("GaussianHead: expected 4 raw outputs, got " + raw.shape_string());
  DiagGaussian g;
  for (int d = 0; d < 2; ++d) {
    g.mean[d] = scale_[d] * static_cast<double>(raw[static_cast<std::size_t>(d)]);
    g.log_std[d] = std::clamp(static_cast<double>(raw[static_cast<std::size_t>(d + 2)]) + std::log(scale_[d]),
                              kMinLogStd, kMaxLogStd);
  }
  return g;
}

Tensor GaussianHead::backward(const Tensor& raw, const Vec2d& dmean, const Vec2d& dlog_std) const {
  Tensor draw = Tensor::matrix(1, 4);
  for (int d = 0; d < 2; ++d) {
    draw[static_cast<std::size_t>(d)] = static_cast<Real>(scale_[d] * dmean[d]);
    const double pre = static_cast<double>(raw[static_cast<std::size_t>(d + 2)]) + std::log(scale_[d]);
    if (pre > kMinLogStd && pre < kMaxLogStd) draw[static_cast<std::size_t>(d + 2)] = static_cast<Real>(dlog_std[d]);
  }
  return draw;
}

}  // namespace instasim::nn
