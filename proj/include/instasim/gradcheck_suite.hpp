#ifndef INSTASIM_GRADCHECK_SUITE_HPP_
#define INSTASIM_GRADCHECK_SUITE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "instasim/nn/gradcheck.hpp"

namespace instasim {

struct GradSuiteOptions {
  double eps = 1e-3;
  double tolerance = 1e-3;
  // Entries probed per tensor of the full networks (0 probes all).
  std::size_t network_probes = 6;
  std::uint64_t seed = 0;
  // Corrupts one analytic gradient per check as a negative control.
  bool inject_bug = false;
};

struct GradSuiteEntry {
  std::string name;
  nn::GradCheckResult result;
  bool pass = false;
};

// Finite-difference checks of every nn primitive, the policy/value network
// and the discriminator. An entry passes when its element-wise relative
// error is below the tolerance.
std::vector<GradSuiteEntry> run_gradcheck_suite(const GradSuiteOptions& options);

}  // namespace instasim

#endif  // INSTASIM_GRADCHECK_SUITE_HPP_
