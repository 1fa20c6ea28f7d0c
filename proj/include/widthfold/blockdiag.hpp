#pragma once

#include <cstdint>
#include <vector>

#include "widthfold/fold.hpp"
#include "widthfold/refconv.hpp"
#include "widthfold/tensor.hpp"

namespace widthfold {

// Sparse storage for a block-diagonal filter: only the F diagonal blocks are
// kept (one shared block when all blocks are bitwise identical, which the
// diagonal-replication construction always produces). Stored floats are
// 1/F of the dense expanded filter.
class BlockDiagFilter {
 public:
  // Verifies the dense filter is exactly block-diagonal for `num_blocks`
  // equal blocks; every off-diagonal entry must be bit-level +/-0.0f.
  // Throws NotBlockDiagonal otherwise, ShapeMismatch on indivisible extents.
  static BlockDiagFilter from_expanded(const DenseTensor& dense,
                                       std::int64_t num_blocks);

  // One block replicated across the diagonal.
  static BlockDiagFilter shared(DenseTensor block, std::int64_t num_blocks);

  // Per-block storage for the general case.
  static BlockDiagFilter from_blocks(std::vector<DenseTensor> blocks);

  std::int64_t num_blocks() const { return num_blocks_; }
  bool shared_storage() const { return blocks_.size() == 1 && num_blocks_ > 1; }
  const DenseTensor& block(std::int64_t i) const;
  Shape block_shape() const { return blocks_.front().shape(); }
  Shape logical_shape() const;  // (KH, KW, F*Cin_b, F*Cout_b)
  std::int64_t stored_floats() const;

  DenseTensor densify() const;

 private:
  BlockDiagFilter(std::vector<DenseTensor> blocks, std::int64_t num_blocks);
  std::vector<DenseTensor> blocks_;  // size 1 (shared) or num_blocks_
  std::int64_t num_blocks_ = 1;
};

inline DenseTensor densify(const BlockDiagFilter& bd) { return bd.densify(); }

// Folded conv executed as F independent groups: group g consumes input
// channels [g*Cin_b, (g+1)*Cin_b) and writes output channels
// [g*Cout_b, (g+1)*Cout_b). Matches conv2d(x_f, densify(bd), spec) bitwise:
// the terms skipped are exact zero products and the surviving summation
// order is identical.
DenseTensor grouped_conv(const DenseTensor& x_f, const BlockDiagFilter& bd,
                         const ConvSpec& spec);

// MAC accounting for the three execution paths plus the zero-padding
// alternative (Cin padded up to the next multiple of `align`).
struct MacReport {
  std::uint64_t original = 0;
  std::uint64_t dense_folded = 0;    // F * original
  std::uint64_t grouped_folded = 0;  // == original
  std::uint64_t zero_padded = 0;     // original scaled to the padded Cin
  std::int64_t factor = 1;
};

// Requires plan.status == Apply (throws std::invalid_argument otherwise).
MacReport mac_report(const ConvSpec& spec, const FoldPlan& plan,
                     std::int64_t align);

}  // namespace widthfold
