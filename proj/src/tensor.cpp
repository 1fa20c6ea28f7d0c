#include "widthfold/tensor.hpp"

#include <cstring>
#include <sstream>

namespace widthfold {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Shape strides_of(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    strides[i] = strides[i + 1] * shape[i + 1];
  }
  return strides;
}

DenseTensor::DenseTensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::int64_t e : shape_) {
    if (e < 1) {
      throw ShapeMismatch("tensor extent must be >= 1, got shape " +
                          shape_str(shape_));
    }
  }
  if (numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw ShapeMismatch("shape " + shape_str(shape_) + " wants " +
                        std::to_string(numel(shape_)) + " elements, got " +
                        std::to_string(data_.size()));
  }
}

DenseTensor DenseTensor::zeros(Shape shape) {
  std::vector<float> data(static_cast<std::size_t>(numel(shape)), 0.0f);
  return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor DenseTensor::full(Shape shape, float value) {
  std::vector<float> data(static_cast<std::size_t>(numel(shape)), value);
  return DenseTensor(std::move(shape), std::move(data));
}

std::int64_t DenseTensor::offset(std::span<const std::int64_t> coord) const {
  if (coord.size() != shape_.size()) {
    throw ShapeMismatch("coordinate rank " + std::to_string(coord.size()) +
                        " does not match tensor rank " +
                        std::to_string(shape_.size()));
  }
  std::int64_t off = 0;
  std::int64_t stride = 1;
  for (int i = static_cast<int>(shape_.size()) - 1; i >= 0; --i) {
    if (coord[i] < 0 || coord[i] >= shape_[i]) {
      throw ShapeMismatch("coordinate out of range for shape " +
                          shape_str(shape_));
    }
    off += coord[i] * stride;
    stride *= shape_[i];
  }
  return off;
}

float DenseTensor::at(std::span<const std::int64_t> coord) const {
  return data_[static_cast<std::size_t>(offset(coord))];
}

float DenseTensor::at(std::initializer_list<std::int64_t> coord) const {
  return at(std::span<const std::int64_t>(coord.begin(), coord.size()));
}

bool DenseTensor::bitwise_equal(const DenseTensor& other) const {
  if (shape_ != other.shape_) return false;
  if (data_.empty()) return other.data_.empty();
  return std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(float)) == 0;
}

DenseTensor reshape(const DenseTensor& t, Shape new_shape) {
  if (numel(new_shape) != t.size()) {
    throw ShapeMismatch("cannot reshape " + shape_str(t.shape()) + " to " +
                        shape_str(new_shape) + ": element counts differ");
  }
  std::vector<float> data(t.data().begin(), t.data().end());
  return DenseTensor(std::move(new_shape), std::move(data));
}

float max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch("max_abs_diff shapes differ: " + shape_str(a.shape()) +
                        " vs " + shape_str(b.shape()));
  }
  float worst = 0.0f;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const float d = std::abs(da[i] - db[i]);
    if (d != d) return d;  // NaN propagates to the caller
    if (d > worst) worst = d;
  }
  return worst;
}

}  // namespace widthfold
