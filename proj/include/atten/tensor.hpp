#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace atten {

// Domain errors: bad shapes, bad files, contract violations. The CLI maps
// these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed invocations and input schemas; exit code 2 at the CLI.
class UsageError : public Error {
 public:
  using Error::Error;
};

using Dims = std::vector<std::size_t>;

std::size_t dims_product(const Dims& dims);
std::string dims_to_string(const Dims& dims);
bool dims_equal(const Dims& a, const Dims& b);

// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar holding one
// element. All dims are >= 1; product(dims) == data.size() always.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}  // rank-0 scalar 0.0
  explicit Tensor(Dims dims, double fill = 0.0);
  Tensor(Dims dims, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor ones(Dims dims) { return Tensor(std::move(dims), 1.0); }

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return dims_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Row-major multi-index access, bounds-checked.
  double& at(std::initializer_list<std::size_t> idx);
  double at(std::initializer_list<std::size_t> idx) const;

  bool all_finite() const;
  // Throws Error naming `context` if any element is NaN/Inf.
  void require_finite(const char* context) const;

  bool same_dims(const Tensor& other) const {
    return dims_equal(dims_, other.dims_);
  }
  bool bitwise_equal(const Tensor& other) const;

 private:
  Dims dims_;
  std::vector<double> data_;
};

}  // namespace atten
