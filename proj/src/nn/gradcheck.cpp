#include "instasim/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace instasim::nn {

GradCheckResult finite_diff_check(const std::function<double()>& loss, const std::vector<GradCheckTarget>& targets,
                                  double eps, std::size_t max_per_tensor) {
  GradCheckResult result;
  for (const GradCheckTarget& t : targets) {
    if (t.value == nullptr || t.grad == nullptr || !t.value->same_shape(*t.grad)) {
      throw std::invalid_argument("finite_diff_check: bad target '" + t.name + "'");
    }
    const std::size_t n = t.value->size();
    const std::size_t stride = (max_per_tensor == 0 || n <= max_per_tensor) ? 1 : n / max_per_tensor;
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      Real& p = (*t.value)[i];
      const Real original = p;
      p = static_cast<Real>(original + eps);
      const double up = loss();
      p = static_cast<Real>(original - eps);
      const double down = loss();
      p = original;
      // Use the perturbation actually representable in Real.
      const double h = static_cast<double>(static_cast<Real>(original + eps)) -
                       static_cast<double>(static_cast<Real>(original - eps));
      const double numeric = (up - down) / h;
      const double analytic = (*t.grad)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      diff_sq += (analytic - numeric) * (analytic - numeric);
      analytic_sq += analytic * analytic;
      numeric_sq += numeric * numeric;
      ++result.checked;
      if (rel > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        if (rel >= result.max_rel_error) {
          result.worst_tensor = t.name;
          result.worst_index = i;
          result.worst_analytic = analytic;
          result.worst_numeric = numeric;
        }
      }
    }
    const double tensor_rel = std::sqrt(diff_sq) / std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), 1e-8});
    if (tensor_rel > result.max_tensor_rel_error || result.worst_tensor_by_norm.empty()) {
      result.max_tensor_rel_error = std::max(tensor_rel, result.max_tensor_rel_error);
      result.worst_tensor_by_norm = t.name;
    }
  }
  return result;
}

std::vector<GradCheckTarget> store_targets(ParamStore& store) {
  std::vector<GradCheckTarget> out;
  for (auto& [name, p] : store.params()) {
    if (p.has_grad) out.push_back({name, &p.value, &p.grad});
  }
  return out;
}

}  // namespace instasim::nn
