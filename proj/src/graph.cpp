#include "widthfold/graph.hpp"

#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

namespace widthfold {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Output: return "output";
    case OpKind::Constant: return "constant";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Matmul: return "matmul";
    case OpKind::BiasAdd: return "bias_add";
    case OpKind::Reshape: return "reshape";
  }
  return "?";
}

OpKind op_kind_from_string(const std::string& name) {
  if (name == "input") return OpKind::Input;
  if (name == "output") return OpKind::Output;
  if (name == "constant") return OpKind::Constant;
  if (name == "conv2d") return OpKind::Conv2d;
  if (name == "matmul") return OpKind::Matmul;
  if (name == "bias_add") return OpKind::BiasAdd;
  if (name == "reshape") return OpKind::Reshape;
  throw ManifestParse("unknown op kind '" + name + "'");
}

const Node* Graph::find(const std::string& id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

Node* Graph::find(const std::string& id) {
  for (auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::vector<std::string> Graph::input_ids() const {
  std::vector<std::string> ids;
  for (const auto& n : nodes) {
    if (n.op == OpKind::Input) ids.push_back(n.id);
  }
  return ids;
}

std::vector<std::string> Graph::output_ids() const {
  std::vector<std::string> ids;
  for (const auto& n : nodes) {
    if (n.op == OpKind::Output) ids.push_back(n.id);
  }
  return ids;
}

namespace {

std::size_t arity_of(OpKind op) {
  switch (op) {
    case OpKind::Input:
    case OpKind::Constant: return 0;
    case OpKind::Output:
    case OpKind::Reshape: return 1;
    case OpKind::Conv2d:
    case OpKind::Matmul:
    case OpKind::BiasAdd: return 2;
  }
  return 0;
}

}  // namespace

ConvSpec conv_spec_of(const Graph& g, const Node& node) {
  const Node* x = g.find(node.inputs[0]);
  const Node* w = g.find(node.inputs[1]);
  return ConvSpec{x->out_shape, w->out_shape, node.stride_h, node.stride_w};
}

Graph infer_shapes(Graph g) {
  std::set<std::string> seen;
  for (auto& node : g.nodes) {
    if (node.id.empty()) {
      throw ShapeInferenceFailure(node.id, "empty node id");
    }
    if (!seen.insert(node.id).second) {
      throw ShapeInferenceFailure(node.id, "duplicate node id");
    }
    if (node.inputs.size() != arity_of(node.op)) {
      throw ShapeInferenceFailure(
          node.id, std::string(to_string(node.op)) + " takes " +
                       std::to_string(arity_of(node.op)) + " inputs, got " +
                       std::to_string(node.inputs.size()));
    }
    std::vector<const Node*> in;
    for (const auto& ref : node.inputs) {
      const Node* producer = nullptr;
      for (const auto& other : g.nodes) {
        if (&other == &node) break;  // producers must precede consumers
        if (other.id == ref) {
          producer = &other;
          break;
        }
      }
      if (!producer) {
        throw ShapeInferenceFailure(
            node.id, "input '" + ref + "' is undefined or appears later");
      }
      in.push_back(producer);
    }

    try {
      switch (node.op) {
        case OpKind::Input:
          if (node.shape.empty()) {
            throw ShapeMismatch("input node needs a declared shape");
          }
          node.out_shape = node.shape;
          break;
        case OpKind::Constant: {
          if (!g.weights.contains(node.tensor)) {
            throw ShapeMismatch("weights bundle has no tensor '" +
                                node.tensor + "'");
          }
          node.out_shape = g.weights.at(node.tensor).shape();
          break;
        }
        case OpKind::Conv2d: {
          ConvSpec spec{in[0]->out_shape, in[1]->out_shape, node.stride_h,
                        node.stride_w};
          spec.validate();
          if (node.groups < 1 || spec.in_c() % node.groups != 0 ||
              spec.out_c() % node.groups != 0) {
            throw ShapeMismatch("channels not divisible into " +
                                std::to_string(node.groups) + " groups");
          }
          node.out_shape = spec.output_shape();
          break;
        }
        case OpKind::Matmul: {
          const Shape& a = in[0]->out_shape;
          const Shape& b = in[1]->out_shape;
          if (a.size() != 2 || b.size() != 2 || a[1] != b[0]) {
            throw ShapeMismatch("matmul wants MxK by KxN, got " +
                                shape_str(a) + " x " + shape_str(b));
          }
          node.out_shape = {a[0], b[1]};
          break;
        }
        case OpKind::BiasAdd: {
          const Shape& y = in[0]->out_shape;
          const Shape& b = in[1]->out_shape;
          if (y.empty() || b.size() != 1 || b[0] != y.back()) {
            throw ShapeMismatch("bias " + shape_str(b) +
                                " does not match channels of " + shape_str(y));
          }
          node.out_shape = y;
          break;
        }
        case OpKind::Reshape: {
          if (numel(node.shape) != numel(in[0]->out_shape)) {
            throw ShapeMismatch("reshape " + shape_str(in[0]->out_shape) +
                                " to " + shape_str(node.shape) +
                                ": element counts differ");
          }
          node.out_shape = node.shape;
          break;
        }
        case OpKind::Output:
          node.out_shape = in[0]->out_shape;
          break;
      }
    } catch (const std::exception& e) {
      throw ShapeInferenceFailure(node.id, e.what());
    }
  }
  return g;
}

CostEstimate cost(const Graph& g, std::int64_t align,
                  MacAccounting accounting) {
  CostEstimate est;
  for (const auto& node : g.nodes) {
    est.footprint_floats += static_cast<std::uint64_t>(numel(node.out_shape));
    if (node.op == OpKind::Conv2d) {
      const ConvSpec spec = conv_spec_of(g, node);
      std::uint64_t macs = count_macs(spec).macs;
      if (accounting == MacAccounting::Grouped) {
        macs /= static_cast<std::uint64_t>(node.groups);
      }
      est.macs += macs;
      est.aligned = est.aligned && spec.in_c() % align == 0;
    } else if (node.op == OpKind::Matmul) {
      const Node* a = g.find(node.inputs[0]);
      const Node* b = g.find(node.inputs[1]);
      est.macs += static_cast<std::uint64_t>(a->out_shape[0]) *
                  static_cast<std::uint64_t>(a->out_shape[1]) *
                  static_cast<std::uint64_t>(b->out_shape[1]);
      est.aligned = est.aligned && a->out_shape[1] % align == 0;
    }
  }
  return est;
}

namespace {

nlohmann::json node_to_json(const Node& node) {
  nlohmann::json j{{"id", node.id}, {"op", to_string(node.op)}};
  switch (node.op) {
    case OpKind::Input:
    case OpKind::Reshape:
      j["shape"] = node.shape;
      break;
    case OpKind::Constant:
      j["tensor"] = node.tensor;
      break;
    case OpKind::Conv2d:
      j["stride"] = {node.stride_h, node.stride_w};
      j["groups"] = node.groups;
      break;
    default:
      break;
  }
  return j;
}

Node node_from_json(const nlohmann::json& j) {
  Node node;
  node.id = j.at("id").get<std::string>();
  node.op = op_kind_from_string(j.at("op").get<std::string>());
  switch (node.op) {
    case OpKind::Input:
    case OpKind::Reshape:
      node.shape = j.at("shape").get<Shape>();
      break;
    case OpKind::Constant:
      node.tensor = j.at("tensor").get<std::string>();
      break;
    case OpKind::Conv2d: {
      const auto stride = j.value("stride", std::vector<std::int64_t>{1, 1});
      if (stride.size() != 2) throw ManifestParse("conv stride wants 2 entries");
      node.stride_h = stride[0];
      node.stride_w = stride[1];
      node.groups = j.value("groups", std::int64_t{1});
      break;
    }
    default:
      break;
  }
  return node;
}

}  // namespace

Graph read_graph(const std::filesystem::path& path) {
  nlohmann::json j;
  {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ManifestParse(path.string() + ": " + e.what());
    }
  }
  Graph g;
  try {
    if (!j.is_object()) throw ManifestParse("graph file must be a JSON object");
    for (const auto& jn : j.at("nodes")) {
      g.nodes.push_back(node_from_json(jn));
    }
    std::set<std::string> ids;
    for (const auto& node : g.nodes) ids.insert(node.id);
    // Edges carry the dataflow: value of `from` becomes input `port` of `to`.
    std::map<std::string, std::map<std::int64_t, std::string>> wiring;
    for (const auto& je : j.at("edges")) {
      const auto from = je.at("from").get<std::string>();
      const auto to = je.at("to").get<std::string>();
      if (!ids.count(from) || !ids.count(to)) {
        throw ManifestParse("edge " + from + " -> " + to +
                            " references an unknown node");
      }
      wiring[to][je.value("port", std::int64_t{0})] = from;
    }
    for (auto& node : g.nodes) {
      auto it = wiring.find(node.id);
      if (it == wiring.end()) continue;
      std::int64_t expect = 0;
      for (const auto& [port, from] : it->second) {
        if (port != expect++) {
          throw ManifestParse("node '" + node.id +
                              "': input ports must be 0..n-1");
        }
        node.inputs.push_back(from);
      }
    }
    if (j.contains("weights") && !j.at("weights").is_null()) {
      const auto rel = j.at("weights").get<std::string>();
      g.weights = read_bundle(path.parent_path() / rel);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestParse(path.string() + ": " + e.what());
  }
  return g;
}

void write_graph(const Graph& g, const std::filesystem::path& path) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& node : g.nodes) {
    nodes.push_back(node_to_json(node));
    for (std::size_t port = 0; port < node.inputs.size(); ++port) {
      edges.push_back({{"from", node.inputs[port]},
                       {"to", node.id},
                       {"port", static_cast<std::int64_t>(port)}});
    }
  }
  nlohmann::json j{{"nodes", nodes}, {"edges", edges}};
  if (g.weights.size() > 0) {
    const auto weights_name = path.stem().string() + ".weights.json";
    write_bundle(g.weights, path.parent_path() / weights_name);
    j["weights"] = weights_name;
  } else {
    j["weights"] = nullptr;
  }

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoFailure("write failed for " + path.string());
}

bool graphs_equal(const Graph& a, const Graph& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const Node& na = a.nodes[i];
    const Node& nb = b.nodes[i];
    if (na.id != nb.id || na.op != nb.op || na.inputs != nb.inputs ||
        na.shape != nb.shape || na.tensor != nb.tensor ||
        na.stride_h != nb.stride_h || na.stride_w != nb.stride_w ||
        na.groups != nb.groups) {
      return false;
    }
  }
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t i = 0; i < a.weights.entries().size(); ++i) {
    const auto& [name_a, tensor_a] = a.weights.entries()[i];
    const auto& [name_b, tensor_b] = b.weights.entries()[i];
    if (name_a != name_b || !tensor_a.bitwise_equal(tensor_b)) return false;
  }
  return true;
}

}  // namespace widthfold
