#ifndef INSTASIM_NN_PARAM_STORE_HPP_
#define INSTASIM_NN_PARAM_STORE_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "instasim/nn/tensor.hpp"

namespace instasim::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // AdamW moments.
  Tensor first_moment;
  Tensor second_moment;
  bool has_grad = false;
};

// Named parameters plus optimizer state. Parameter addresses are stable for
// the lifetime of the store, so layers keep raw pointers into it.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  // Zero-initialised; throws if the name is taken.
  Parameter& add(const std::string& name, std::vector<int> shape);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::map<std::string, Parameter>& params() { return params_; }
  const std::map<std::string, Parameter>& params() const { return params_; }

  std::size_t num_parameters() const;
  void zero_grad();
  double grad_norm() const;
  void scale_grads(double factor);

  // Copies parameter values (not optimizer state) from a store with the same layout.
  void copy_values_from(const ParamStore& other);

  // Increments whenever parameter values change through the store.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  std::int64_t optimizer_steps() const { return optimizer_steps_; }
  void set_optimizer_steps(std::int64_t n) { optimizer_steps_ = n; }

 private:
  std::map<std::string, Parameter> params_;
  std::uint64_t version_ = 0;
  std::int64_t optimizer_steps_ = 0;
};

// Uniform fan-in initialisation, bound sqrt(6 / fan_in).
void kaiming_uniform(Tensor& weight, int fan_in, std::mt19937_64& rng, double gain_scale = 1.0);

struct AdamWConfig {
  double lr = 2e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Decoupled weight decay Adam. Clears gradients afterwards. Throws
// std::logic_error when no parameter received a gradient.
void adamw_step(ParamStore& store, const AdamWConfig& config);

}  // namespace instasim::nn

#endif  // INSTASIM_NN_PARAM_STORE_HPP_
