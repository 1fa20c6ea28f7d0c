#pragma once

#include <cstdint>

#include "widthfold/tensor.hpp"

namespace widthfold {

struct GemmSpec {
  std::int64_t m = 0, k = 0, n = 0;  // C = A*B, A: MxK, B: KxN
};

// Direct triple loop with fixed k-inner reduction order.
DenseTensor gemm_ref(const DenseTensor& a, const DenseTensor& b);

// GEMM as a 1x1 convolution: A reshaped to (1, M, 1, K) so each row is a
// spatial position with K channels, B to a (1, 1, K, N) kernel. The conv
// reduction is also k-inner, so this agrees with gemm_ref bitwise.
DenseTensor gemm_as_conv1x1(const DenseTensor& a, const DenseTensor& b);

// Tall-skinny GEMM through a synthetic width dimension carved from M:
// A is read as H = M/F rows x W = F x Cin = K, the width is folded into
// channels (Cin' = K*F) and B is replicated into a block-diagonal (1, 1,
// K*F, F*N) kernel. Throws IllegalFold if M mod F != 0.
DenseTensor fold_tall_skinny(const DenseTensor& a, const DenseTensor& b,
                             std::int64_t factor);

}  // namespace widthfold
