#ifndef INSTASIM_RL_GAE_HPP_
#define INSTASIM_RL_GAE_HPP_

#include <span>
#include <vector>

namespace instasim::rl {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// rewards/dones have length T, values has length T + 1 (the last entry is
// the bootstrap value used when the final step is not terminal).
//   delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
//   A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// Throws std::invalid_argument on a length mismatch.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const char> dones,
                      double gamma, double lambda);

// In-place normalisation to mean 0, std 1 (std floored at 1e-8).
void normalize_advantages(std::vector<double>& advantages);

}  // namespace instasim::rl

#endif  // INSTASIM_RL_GAE_HPP_
