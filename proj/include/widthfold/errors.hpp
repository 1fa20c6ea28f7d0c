#pragma once

#include <stdexcept>
#include <string>

namespace widthfold {

// Error taxonomy. Operations document which of these they throw; fold
// legality failures are values (FoldPlan), not errors.

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// VALID padding produced an output extent < 1.
struct DegenerateOutput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A fold precondition (divisibility, Cin, KW) was violated on a direct call.
struct IllegalFold : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// from_expanded() found a nonzero entry outside the diagonal blocks.
struct NotBlockDiagonal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ManifestParse : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Declared tensor bytes do not fit in the backing blob.
struct BlobSizeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeInferenceFailure : std::runtime_error {
  ShapeInferenceFailure(const std::string& node, const std::string& what)
      : std::runtime_error("node '" + node + "': " + what), node_id(node) {}
  std::string node_id;
};

// Interpreter was invoked without a binding for a graph input.
struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace widthfold
