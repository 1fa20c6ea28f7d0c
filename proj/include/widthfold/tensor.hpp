#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "widthfold/errors.hpp"

namespace widthfold {

// Dimension extents. Order is semantic and documented per use:
// NHWC for activations, KH x KW x Cin x Cout for filters.
using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Row-major element strides (last axis fastest).
Shape strides_of(const Shape& shape);

// Dense row-major float32 tensor. Immutable after construction: every
// transformation returns a new tensor, so values are safe to share across
// threads.
class DenseTensor {
 public:
  DenseTensor() = default;

  // Throws ShapeMismatch if product(shape) != data.size() or any extent < 1.
  DenseTensor(Shape shape, std::vector<float> data);

  static DenseTensor zeros(Shape shape);
  static DenseTensor full(Shape shape, float value);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  std::span<const float> data() const { return data_; }

  // Flat row-major offset of a coordinate; bounds-checked.
  std::int64_t offset(std::span<const std::int64_t> coord) const;
  float at(std::span<const std::int64_t> coord) const;
  float at(std::initializer_list<std::int64_t> coord) const;

  // Shape equality plus bit-level data equality (distinguishes -0.0,
  // preserves NaN payload comparisons).
  bool bitwise_equal(const DenseTensor& other) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Same data sequence under a new shape. Throws ShapeMismatch if the element
// counts differ.
DenseTensor reshape(const DenseTensor& t, Shape new_shape);

// max over elements of |a_i - b_i|. NaN in either input yields NaN; callers
// doing verdicts must compare with `diff <= tol` so NaN fails.
float max_abs_diff(const DenseTensor& a, const DenseTensor& b);

}  // namespace widthfold
