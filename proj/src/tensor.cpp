#include "atten/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace atten {

std::size_t dims_product(const Dims& dims) {
  std::size_t n = 1;
  for (const std::size_t d : dims) n *= d;
  return n;
}

std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

bool dims_equal(const Dims& a, const Dims& b) { return a == b; }

namespace {
void validate_dims(const Dims& dims) {
  for (const std::size_t d : dims) {
    if (d == 0) throw Error("tensor dims must be positive, got " + dims_to_string(dims));
  }
}
}  // namespace

Tensor::Tensor(Dims dims, double fill) : dims_(std::move(dims)) {
  validate_dims(dims_);
  data_.assign(dims_product(dims_), fill);
}

Tensor::Tensor(Dims dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  validate_dims(dims_);
  if (dims_product(dims_) != data_.size()) {
    throw Error("tensor data length " + std::to_string(data_.size()) +
                " does not match dims " + dims_to_string(dims_));
  }
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

namespace {
std::size_t flat_index(const Dims& dims, std::initializer_list<std::size_t> idx) {
  if (idx.size() != dims.size()) {
    throw Error("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                std::to_string(dims.size()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (const std::size_t i : idx) {
    if (i >= dims[axis]) throw Error("index out of range on axis " + std::to_string(axis));
    flat = flat * dims[axis] + i;
    ++axis;
  }
  return flat;
}
}  // namespace

double& Tensor::at(std::initializer_list<std::size_t> idx) {
  return data_[flat_index(dims_, idx)];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  return data_[flat_index(dims_, idx)];
}

bool Tensor::all_finite() const {
  for (const double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::require_finite(const char* context) const {
  if (!all_finite()) {
    throw Error(std::string("non-finite value in ") + context);
  }
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  return dims_ == other.dims_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

}  // namespace atten
