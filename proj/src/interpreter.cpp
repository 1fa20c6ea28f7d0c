#include "widthfold/interpreter.hpp"

#include "widthfold/blockdiag.hpp"
#include "widthfold/gemm.hpp"

namespace widthfold {

TensorMap interpret(const Graph& graph, const TensorMap& inputs,
                    ExecMode mode) {
  const Graph g = infer_shapes(graph);

  TensorMap values;
  TensorMap outputs;
  for (const auto& node : g.nodes) {
    switch (node.op) {
      case OpKind::Input: {
        auto it = inputs.find(node.id);
        if (it == inputs.end()) {
          throw MissingInput("no binding for graph input '" + node.id + "'");
        }
        if (it->second.shape() != node.shape) {
          throw ShapeMismatch("binding for '" + node.id + "' has shape " +
                              shape_str(it->second.shape()) + ", declared " +
                              shape_str(node.shape));
        }
        values.emplace(node.id, it->second);
        break;
      }
      case OpKind::Constant:
        values.emplace(node.id, g.weights.at(node.tensor));
        break;
      case OpKind::Conv2d: {
        const ConvSpec spec = conv_spec_of(g, node);
        const DenseTensor& x = values.at(node.inputs[0]);
        const DenseTensor& w = values.at(node.inputs[1]);
        if (mode == ExecMode::Grouped && node.groups > 1) {
          const auto bd = BlockDiagFilter::from_expanded(w, node.groups);
          values.emplace(node.id, grouped_conv(x, bd, spec));
        } else {
          values.emplace(node.id, conv2d(x, w, spec));
        }
        break;
      }
      case OpKind::Matmul:
        values.emplace(node.id, gemm_ref(values.at(node.inputs[0]),
                                         values.at(node.inputs[1])));
        break;
      case OpKind::BiasAdd:
        values.emplace(node.id, bias_add(values.at(node.inputs[0]),
                                         values.at(node.inputs[1])));
        break;
      case OpKind::Reshape:
        values.emplace(node.id, reshape(values.at(node.inputs[0]), node.shape));
        break;
      case OpKind::Output: {
        const DenseTensor& v = values.at(node.inputs[0]);
        values.emplace(node.id, v);
        outputs.emplace(node.id, v);
        break;
      }
    }
  }
  return outputs;
}

}  // namespace widthfold
