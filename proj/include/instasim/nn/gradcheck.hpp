#ifndef INSTASIM_NN_GRADCHECK_HPP_
#define INSTASIM_NN_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "instasim/nn/param_store.hpp"
#include "instasim/nn/tensor.hpp"

namespace instasim::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  // Worst per-tensor error ||a - n|| / max(||a||, ||n||, 1e-8) over probed entries.
  double max_tensor_rel_error = 0.0;
  std::string worst_tensor_by_norm;
};

// A tensor to perturb together with its analytic gradient.
struct GradCheckTarget {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* grad = nullptr;
};

// Central differences of `loss` against the supplied analytic gradients.
// Relative error per element is |a - n| / max(|a|, |n|, 1e-8). When
// `max_per_tensor` > 0 only that many evenly spaced entries of each tensor are
// probed.
GradCheckResult finite_diff_check(const std::function<double()>& loss, const std::vector<GradCheckTarget>& targets,
                                  double eps = 1e-3, std::size_t max_per_tensor = 0);

// Every parameter of the store that holds a gradient.
std::vector<GradCheckTarget> store_targets(ParamStore& store);

}  // namespace instasim::nn

#endif  // INSTASIM_NN_GRADCHECK_HPP_
