#include "instasim/rl/gae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace instasim::rl {

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const char> dones,
                      double gamma, double lambda) {
  const std::size_t t_len = rewards.size();
  if (dones.size() != t_len || values.size() != t_len + 1) {
    throw std::invalid_argument("compute_gae: expected |values| = |rewards| + 1 = |dones| + 1");
  }
  if (!(gamma >= 0.0 && gamma < 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("compute_gae: gamma must be in [0, 1) and lambda in [0, 1]");
  }
  GaeResult out{std::vector<double>(t_len), std::vector<double>(t_len)};
  double next_adv = 0.0;
  for (std::size_t k = t_len; k-- > 0;) {
    const double not_done = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * values[k + 1] * not_done - values[k];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  for (double& a : advantages) a = (a - mean) / sd;
}

}  // namespace instasim::rl
