#pragma once

#include <optional>
#include <string>
#include <vector>

#include "widthfold/fold.hpp"
#include "widthfold/graph.hpp"

namespace widthfold {

// Fold factor request: a fixed factor or the auto rule (smallest F whose
// folded channel extent meets the alignment target).
struct FoldFactor {
  static FoldFactor automatic() { return FoldFactor{}; }
  static FoldFactor fixed(std::int64_t f) { return FoldFactor{f}; }

  bool is_auto() const { return !value.has_value(); }
  std::optional<std::int64_t> value;
};

struct NodeDecision {
  std::string id;
  OpKind kind = OpKind::Conv2d;  // Conv2d or Matmul
  bool applied = false;
  FoldPlan plan;       // Apply plan, or Fallback carrying the skip reason
  std::string note;    // optional human-readable detail
};

struct RewriteReport {
  std::vector<NodeDecision> decisions;
  CostEstimate before;
  CostEstimate after;

  std::size_t applied_count() const {
    std::size_t n = 0;
    for (const auto& d : decisions) n += d.applied ? 1 : 0;
    return n;
  }
};

struct PassResult {
  Graph graph;
  RewriteReport report;
};

// Rewrites every profitable conv2d/matmul into reshape -> folded conv with
// block-diagonal expanded weights -> reshape; a bias_add that solely
// consumes the conv is folded along (replicated bias). Never fails: illegal
// or unprofitable nodes are reported as Skipped and left untouched. The pass
// is idempotent; rewritten nodes come back AlreadyAligned on a second run.
PassResult width_fold_pass(Graph g, FoldFactor factor, std::int64_t align);

}  // namespace widthfold
