#ifndef INSTASIM_NN_TENSOR_HPP_
#define INSTASIM_NN_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace instasim::nn {

#ifdef INSTASIM_REAL64
using Real = double;
#else
using Real = float;
#endif

// Dense row-major tensor. Most code treats it as a matrix: the last
// dimension is the feature axis and everything before it is rows.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, Real fill = Real(0));
  Tensor(std::vector<int> shape, std::vector<Real> values);

  static Tensor matrix(int rows, int cols, Real fill = Real(0)) { return Tensor({rows, cols}, fill); }
  static Tensor vector(std::vector<Real> values);

  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  int cols() const { return shape_.empty() ? 0 : shape_.back(); }
  int rows() const;

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  Real* row(int r) { return data_.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()); }
  const Real* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()); }
  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& at(int r, int c) { return row(r)[c]; }
  Real at(int r, int c) const { return row(r)[c]; }

  void fill(Real v);
  void zero() { fill(Real(0)); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

  // Element-wise in-place accumulate; shapes must match.
  void add_(const Tensor& o);

  std::string shape_string() const;

 private:
  std::vector<int> shape_;
  std::vector<Real> data_;
};

// Throws std::invalid_argument with `what` if the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// Fixed-order dot product (independent of the calling context).
Real dot(const Real* a, const Real* b, int n);

}  // namespace instasim::nn

#endif  // INSTASIM_NN_TENSOR_HPP_
