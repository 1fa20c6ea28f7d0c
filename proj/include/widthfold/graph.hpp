#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "widthfold/bundle.hpp"
#include "widthfold/refconv.hpp"
#include "widthfold/tensor.hpp"

namespace widthfold {

enum class OpKind { Input, Output, Constant, Conv2d, Matmul, BiasAdd, Reshape };

const char* to_string(OpKind kind);
OpKind op_kind_from_string(const std::string& name);

// One node per value; `inputs` lists producer node ids in argument order.
struct Node {
  std::string id;
  OpKind op = OpKind::Input;
  std::vector<std::string> inputs;

  // Attributes by op kind.
  Shape shape;          // Input: declared shape; Reshape: target shape
  std::string tensor;   // Constant: key into the weights bundle
  std::int64_t stride_h = 1;  // Conv2d
  std::int64_t stride_w = 1;  // Conv2d
  std::int64_t groups = 1;    // Conv2d: block-diagonal filter with G groups

  Shape out_shape;  // filled in by infer_shapes
};

// Mini-IR: nodes kept in topological order (validated), weights by name.
struct Graph {
  std::vector<Node> nodes;
  TensorBundle weights;

  const Node* find(const std::string& id) const;
  Node* find(const std::string& id);
  std::vector<std::string> input_ids() const;
  std::vector<std::string> output_ids() const;
};

// Structural validation plus per-node output shapes. Returns an annotated
// copy; throws ShapeInferenceFailure naming the offending node.
Graph infer_shapes(Graph g);

// Shape-only cost model: MACs honour `groups` (a block-diagonal conv does
// Cin/G reduction work per output); `aligned` asks that every conv/matmul
// reduction-channel extent be a multiple of `align`; footprint counts
// weight and activation floats.
struct CostEstimate {
  std::uint64_t macs = 0;
  bool aligned = true;
  std::uint64_t footprint_floats = 0;
};

enum class MacAccounting { Grouped, Dense };

CostEstimate cost(const Graph& g, std::int64_t align,
                  MacAccounting accounting = MacAccounting::Grouped);

// Derives the ConvSpec of a conv2d node from its inferred input shapes.
ConvSpec conv_spec_of(const Graph& g, const Node& node);

// Graph JSON (`nodes`, `edges`, `weights`) plus a tensor bundle next to it.
Graph read_graph(const std::filesystem::path& path);
void write_graph(const Graph& g, const std::filesystem::path& path);

// Structural equality including bitwise weight comparison.
bool graphs_equal(const Graph& a, const Graph& b);

}  // namespace widthfold
