#include "instasim/nn/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace instasim::nn {

Parameter& ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (params_.count(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
  Parameter p;
  p.name = name;
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  p.first_moment = Tensor(shape);
  p.second_moment = Tensor(shape);
  auto [it, inserted] = params_.emplace(name, std::move(p));
  (void)inserted;
  return it->second;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::num_parameters() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) {
    p.grad.zero();
    p.has_grad = false;
  }
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, p] : params_) {
    for (Real g : p.grad.values()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

void ParamStore::scale_grads(double factor) {
  for (auto& [name, p] : params_) {
    for (Real& g : p.grad.values()) g = static_cast<Real>(g * factor);
  }
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.params_.size() != params_.size()) throw std::invalid_argument("copy_values_from: layout mismatch");
  for (auto& [name, p] : params_) {
    const Parameter& src = other.get(name);
    require_same_shape(p.value, src.value, "copy_values_from");
    p.value = src.value;
  }
  ++version_;
}

void kaiming_uniform(Tensor& weight, int fan_in, std::mt19937_64& rng, double gain_scale) {
  const double bound = gain_scale * std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Real& w : weight.values()) w = static_cast<Real>(dist(rng));
}

void adamw_step(ParamStore& store, const AdamWConfig& c) {
  bool any = false;
  for (const auto& [name, p] : store.params()) any = any || p.has_grad;
  if (!any) throw std::logic_error("adamw_step: no gradients populated");

  const std::int64_t t = store.optimizer_steps() + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (auto& [name, p] : store.params()) {
    Real* w = p.value.data();
    Real* g = p.grad.data();
    Real* m = p.first_moment.data();
    Real* v = p.second_moment.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<Real>(c.beta1 * m[i] + (1.0 - c.beta1) * gi);
      v[i] = static_cast<Real>(c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi);
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      double wi = w[i];
      wi -= c.lr * c.weight_decay * wi;
      wi -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
      w[i] = static_cast<Real>(wi);
    }
  }
  store.set_optimizer_steps(t);
  store.zero_grad();
  store.bump_version();
}

}  // namespace instasim::nn
