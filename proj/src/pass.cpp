#include "widthfold/pass.hpp"

#include <map>
#include <numeric>
#include <set>

namespace widthfold {

namespace {

struct Namer {
  std::set<std::string> taken;

  explicit Namer(const Graph& g) {
    for (const auto& n : g.nodes) taken.insert(n.id);
  }
  std::string fresh(const std::string& base) {
    std::string name = base;
    for (int i = 2; !taken.insert(name).second; ++i) {
      name = base + "_" + std::to_string(i);
    }
    return name;
  }
};

std::string fresh_tensor_name(const TensorBundle& weights,
                              const std::string& base) {
  std::string name = base;
  for (int i = 2; weights.contains(name); ++i) {
    name = base + "_" + std::to_string(i);
  }
  return name;
}

std::map<std::string, std::vector<const Node*>> consumers_of(const Graph& g) {
  std::map<std::string, std::vector<const Node*>> consumers;
  for (const auto& n : g.nodes) {
    for (const auto& in : n.inputs) consumers[in].push_back(&n);
  }
  return consumers;
}

NodeDecision skipped(const Node& node, FoldReason reason, std::int64_t factor,
                     std::string note = {}) {
  NodeDecision d;
  d.id = node.id;
  d.kind = node.op;
  d.applied = false;
  d.plan.status = FoldStatus::Fallback;
  d.plan.reason = reason;
  d.plan.factor = factor;
  d.note = std::move(note);
  return d;
}

// Everything a single rewrite inserts in place of the matched nodes.
struct Rewrite {
  std::vector<Node> sequence;
  std::set<std::string> remove_ids;  // matched nodes absorbed by the rewrite
  NodeDecision decision;
};

// Smallest F with (channels * F) % align == 0; larger candidates are its
// multiples, bounded by the extent being carved.
std::int64_t base_factor(std::int64_t channels, std::int64_t align) {
  return align / std::gcd(channels, align);
}

}  // namespace

PassResult width_fold_pass(Graph g, FoldFactor factor, std::int64_t align) {
  if (align < 1) throw std::invalid_argument("alignment must be >= 1");
  if (!factor.is_auto() && *factor.value < 1) {
    throw std::invalid_argument("fold factor must be >= 1");
  }
  g = infer_shapes(std::move(g));

  RewriteReport report;
  report.before = cost(g, align);

  const auto consumers = consumers_of(g);
  Namer namer(g);

  std::map<std::string, Rewrite> rewrites;       // keyed by matched conv/matmul id
  std::set<std::string> absorbed;                // nodes replaced by a rewrite
  std::set<std::string> replaced_constants;      // candidates for pruning

  for (const auto& node : g.nodes) {
    if (node.op == OpKind::Conv2d) {
      const ConvSpec spec = conv_spec_of(g, node);
      if (spec.in_c() % align == 0) {
        report.decisions.push_back(
            skipped(node, FoldReason::AlreadyAligned, 1));
        continue;
      }
      const Node* w_node = g.find(node.inputs[1]);
      if (w_node->op != OpKind::Constant) {
        report.decisions.push_back(
            skipped(node, FoldReason::NotProfitable, 1,
                    "filter is not a constant; cannot expand statically"));
        continue;
      }

      FoldPlan plan;
      if (factor.is_auto()) {
        plan = choose_fold_factor(spec, align);
      } else if (*factor.value == 1) {
        report.decisions.push_back(
            skipped(node, FoldReason::AlreadyAligned, 1,
                    "factor 1 is the identity fold"));
        continue;
      } else {
        plan = check_legality(spec, *factor.value, align);
        if (plan.ok() && (spec.in_c() * plan.factor) % align != 0) {
          report.decisions.push_back(skipped(
              node, FoldReason::NotProfitable, plan.factor,
              "folded channels " + std::to_string(spec.in_c() * plan.factor) +
                  " still miss alignment " + std::to_string(align)));
          continue;
        }
      }
      if (!plan.ok()) {
        report.decisions.push_back(
            skipped(node, plan.reason, plan.factor));
        continue;
      }
      const std::int64_t F = plan.factor;

      // Optional bias fusion: a bias_add that is the sole consumer of the
      // conv and reads its bias from a constant folds into the rewrite.
      const Node* bias_node = nullptr;
      const Node* bias_const = nullptr;
      {
        auto it = consumers.find(node.id);
        if (it != consumers.end() && it->second.size() == 1) {
          const Node* cand = it->second[0];
          if (cand->op == OpKind::BiasAdd && cand->inputs[0] == node.id) {
            const Node* bc = g.find(cand->inputs[1]);
            if (bc->op == OpKind::Constant) {
              bias_node = cand;
              bias_const = bc;
            }
          }
        }
      }

      Rewrite rw;
      rw.decision.id = node.id;
      rw.decision.kind = OpKind::Conv2d;
      rw.decision.applied = true;
      rw.decision.plan = plan;

      const std::string out_id = bias_node ? bias_node->id : node.id;

      Node fold_in;
      fold_in.id = namer.fresh(node.id + "_fold_in");
      fold_in.op = OpKind::Reshape;
      fold_in.inputs = {node.inputs[0]};
      fold_in.shape = plan.folded_input_shape;

      const std::string w_name = fresh_tensor_name(
          g.weights, w_node->tensor + "_folded" + std::to_string(F));
      g.weights.add(w_name,
                    expand_filter_general(g.weights.at(w_node->tensor), F));
      Node w_const;
      w_const.id = namer.fresh(w_node->id + "_folded");
      w_const.op = OpKind::Constant;
      w_const.tensor = w_name;

      Node conv;
      conv.id = namer.fresh(node.id + "_folded");
      conv.op = OpKind::Conv2d;
      conv.inputs = {fold_in.id, w_const.id};
      conv.stride_h = node.stride_h;
      conv.stride_w = 1;
      // A conv that was already block-diagonal keeps its inner structure:
      // the expansion nests it into F outer blocks.
      conv.groups = node.groups * F;

      rw.sequence = {fold_in, w_const, conv};
      std::string tail = conv.id;

      if (bias_node) {
        const std::string b_name = fresh_tensor_name(
            g.weights, bias_const->tensor + "_folded" + std::to_string(F));
        g.weights.add(b_name,
                      replicate_bias(g.weights.at(bias_const->tensor), F));
        Node b_const;
        b_const.id = namer.fresh(bias_const->id + "_folded");
        b_const.op = OpKind::Constant;
        b_const.tensor = b_name;

        Node badd;
        badd.id = namer.fresh(bias_node->id + "_folded");
        badd.op = OpKind::BiasAdd;
        badd.inputs = {tail, b_const.id};

        rw.sequence.push_back(b_const);
        rw.sequence.push_back(badd);
        tail = badd.id;
        rw.remove_ids.insert(bias_node->id);
        replaced_constants.insert(bias_const->id);
        rw.decision.note = "bias folded via " + bias_node->id;
      }

      Node unfold;
      unfold.id = out_id;  // keeps the value name consumers already use
      unfold.op = OpKind::Reshape;
      unfold.inputs = {tail};
      unfold.shape = bias_node ? g.find(bias_node->id)->out_shape
                               : node.out_shape;
      rw.sequence.push_back(unfold);

      rw.remove_ids.insert(node.id);
      replaced_constants.insert(w_node->id);
      for (const auto& id : rw.remove_ids) absorbed.insert(id);
      report.decisions.push_back(rw.decision);
      rewrites.emplace(node.id, std::move(rw));
    } else if (node.op == OpKind::Matmul) {
      const Node* a_node = g.find(node.inputs[0]);
      const Node* b_node = g.find(node.inputs[1]);
      const std::int64_t M = a_node->out_shape[0];
      const std::int64_t K = a_node->out_shape[1];
      const std::int64_t N = b_node->out_shape[1];

      if (K % align == 0) {
        report.decisions.push_back(
            skipped(node, FoldReason::AlreadyAligned, 1));
        continue;
      }
      if (b_node->op != OpKind::Constant) {
        report.decisions.push_back(
            skipped(node, FoldReason::NotProfitable, 1,
                    "rhs is not a constant; cannot expand statically"));
        continue;
      }

      std::int64_t F = 0;
      if (factor.is_auto()) {
        const std::int64_t base = base_factor(K, align);
        if (base > M) {
          report.decisions.push_back(
              skipped(node, FoldReason::FactorTooLarge, base));
          continue;
        }
        for (std::int64_t f = base; f <= M; f += base) {
          if (M % f == 0) {
            F = f;
            break;
          }
        }
        if (F == 0) {
          report.decisions.push_back(
              skipped(node, FoldReason::WidthNotDivisible, base,
                      "no aligning factor divides M=" + std::to_string(M)));
          continue;
        }
      } else {
        F = *factor.value;
        if (F == 1) {
          report.decisions.push_back(
              skipped(node, FoldReason::AlreadyAligned, 1,
                      "factor 1 is the identity fold"));
          continue;
        }
        if (M % F != 0) {
          report.decisions.push_back(
              skipped(node, FoldReason::WidthNotDivisible, F));
          continue;
        }
        if ((K * F) % align != 0) {
          report.decisions.push_back(skipped(
              node, FoldReason::NotProfitable, F,
              "folded channels " + std::to_string(K * F) +
                  " still miss alignment " + std::to_string(align)));
          continue;
        }
      }

      Rewrite rw;
      rw.decision.id = node.id;
      rw.decision.kind = OpKind::Matmul;
      rw.decision.applied = true;
      rw.decision.plan.status = FoldStatus::Apply;
      rw.decision.plan.reason = FoldReason::None;
      rw.decision.plan.factor = F;
      rw.decision.plan.folded_input_shape = {1, M / F, 1, K * F};
      rw.decision.plan.expanded_filter_shape = {1, 1, K * F, F * N};

      Node fold_in;
      fold_in.id = namer.fresh(node.id + "_fold_in");
      fold_in.op = OpKind::Reshape;
      fold_in.inputs = {node.inputs[0]};
      fold_in.shape = rw.decision.plan.folded_input_shape;

      const std::string w_name = fresh_tensor_name(
          g.weights, b_node->tensor + "_folded" + std::to_string(F));
      g.weights.add(
          w_name, expand_filter_general(
                      reshape(g.weights.at(b_node->tensor), {1, 1, K, N}), F));
      Node w_const;
      w_const.id = namer.fresh(b_node->id + "_folded");
      w_const.op = OpKind::Constant;
      w_const.tensor = w_name;

      Node conv;
      conv.id = namer.fresh(node.id + "_folded");
      conv.op = OpKind::Conv2d;
      conv.inputs = {fold_in.id, w_const.id};
      conv.groups = F;

      Node unfold;
      unfold.id = node.id;
      unfold.op = OpKind::Reshape;
      unfold.inputs = {conv.id};
      unfold.shape = {M, N};

      rw.sequence = {fold_in, w_const, conv, unfold};
      rw.remove_ids.insert(node.id);
      replaced_constants.insert(b_node->id);
      for (const auto& id : rw.remove_ids) absorbed.insert(id);
      report.decisions.push_back(rw.decision);
      rewrites.emplace(node.id, std::move(rw));
    }
  }

  // Splice the rewrites in, dropping the nodes they absorbed.
  Graph out;
  out.weights = g.weights;
  for (const auto& node : g.nodes) {
    auto it = rewrites.find(node.id);
    if (it != rewrites.end()) {
      for (const auto& n : it->second.sequence) out.nodes.push_back(n);
    } else if (!absorbed.count(node.id)) {
      out.nodes.push_back(node);
    }
  }

  // Constants orphaned by the rewrite (old filters/biases) are dropped; a
  // bundle tensor goes with them once nothing references it. A rewrite-free
  // pass leaves the graph untouched.
  if (!rewrites.empty()) {
    const auto out_consumers = consumers_of(out);
    std::vector<Node> kept;
    kept.reserve(out.nodes.size());
    for (const auto& node : out.nodes) {
      if (node.op == OpKind::Constant && replaced_constants.count(node.id) &&
          !out_consumers.count(node.id)) {
        continue;
      }
      kept.push_back(node);
    }
    out.nodes = std::move(kept);
    std::set<std::string> live_tensors;
    for (const auto& node : out.nodes) {
      if (node.op == OpKind::Constant) live_tensors.insert(node.tensor);
    }
    std::vector<std::string> dead;
    for (const auto& [name, t] : out.weights.entries()) {
      if (!live_tensors.count(name)) dead.push_back(name);
    }
    for (const auto& name : dead) out.weights.remove(name);
  }

  out = infer_shapes(std::move(out));
  report.after = cost(out, align);
  return PassResult{std::move(out), std::move(report)};
}

}  // namespace widthfold
