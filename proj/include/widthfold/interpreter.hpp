#pragma once

#include <map>
#include <string>

#include "widthfold/graph.hpp"

namespace widthfold {

// How conv2d nodes with groups > 1 execute. Both modes produce bitwise
// identical results; Grouped skips the zero blocks of the expanded filter.
enum class ExecMode { Dense, Grouped };

using TensorMap = std::map<std::string, DenseTensor>;

// Executes nodes in topological order with refconv/gemm/tensor ops and
// returns one tensor per output node, keyed by the output node id. Throws
// MissingInput for unbound inputs, ShapeMismatch when a binding disagrees
// with the declared input shape.
TensorMap interpret(const Graph& g, const TensorMap& inputs,
                    ExecMode mode = ExecMode::Dense);

}  // namespace widthfold
