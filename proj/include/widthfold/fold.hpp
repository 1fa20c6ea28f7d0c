#pragma once

#include <cstdint>
#include <string>

#include "widthfold/refconv.hpp"
#include "widthfold/tensor.hpp"

namespace widthfold {

enum class FoldStatus { Apply, Fallback };

// Diagnosable reasons for returning the inputs unchanged.
enum class FoldReason {
  None,                 // status == Apply
  WidthNotDivisible,    // W mod F != 0
  KernelSpansFoldAxis,  // KW != 1: the fold axis participates in the conv
  StrideOnFoldAxis,     // stride_w != 1
  AlreadyAligned,       // Cin already a multiple of the alignment target
  FactorTooLarge,       // auto mode: smallest aligning factor exceeds W
  UnsupportedChannels,  // Cin != 1 on the Cin==1-only path
  NotProfitable,        // legal fold that would not reach alignment
};

const char* to_string(FoldReason reason);

// Result of legality analysis for folding the W axis of an NHWC conv.
struct FoldPlan {
  FoldStatus status = FoldStatus::Fallback;
  FoldReason reason = FoldReason::None;
  std::int64_t factor = 1;
  int axis = 2;                 // W in NHWC
  Shape folded_input_shape;     // (B, H, W/F, Cin*F) when Apply
  Shape expanded_filter_shape;  // (KH, KW, Cin*F, F*Cout) when Apply

  bool ok() const { return status == FoldStatus::Apply; }
};

// Apply iff W mod F == 0 AND KW == 1 AND stride_w == 1. Legality failure is
// a value, never an error. `align` is unused here; it drives the auto rule
// in choose_fold_factor.
FoldPlan check_legality(const ConvSpec& spec, std::int64_t factor,
                        std::int64_t align);

// Auto mode: smallest F making Cin*F a multiple of `align`, subject to
// legality. Fallback(AlreadyAligned) when Cin is already a multiple;
// Fallback(FactorTooLarge) when no aligning factor fits the width.
FoldPlan choose_fold_factor(const ConvSpec& spec, std::int64_t align);

// X'(b, h, w', f) = X(b, h, F*w' + f, 0). For row-major NHWC with Cin == 1
// this is exactly a reshape. Throws IllegalFold unless W mod F == 0 and
// Cin == 1.
DenseTensor fold_input(const DenseTensor& x, std::int64_t factor);

// General-Cin isomorphism: X_f[b,h,w',c'] = X[b,h,F*w'+f,c] with
// c' = f*Cin + c (channel-major within each folded slice). Reduces to
// fold_input when Cin == 1.
DenseTensor fold_input_general(const DenseTensor& x, std::int64_t factor);

// Inverse of fold_input_general; unfold(fold(x)) == x bitwise.
DenseTensor unfold_input_general(const DenseTensor& x_f, std::int64_t factor);

// Diagonal replication of a (KH, 1, 1, Cout) filter into
// (KH, 1, F, F*Cout): slice f occupies input channel f and output channels
// [f*Cout, (f+1)*Cout); everything else is exact 0.0f.
DenseTensor expand_filter(const DenseTensor& w, std::int64_t factor);

// Block-diagonal expansion over Cin-sized blocks: (KH, 1, Cin, Cout) ->
// (KH, 1, F*Cin, F*Cout) with block f mapping input channels
// [f*Cin, (f+1)*Cin) to output channels [f*Cout, (f+1)*Cout).
DenseTensor expand_filter_general(const DenseTensor& w, std::int64_t factor);

// Concatenation of F copies: b'[f*Cout + c] = b[c].
DenseTensor replicate_bias(const DenseTensor& b, std::int64_t factor);

// Inverse index map of the folded output: w = F*w' + f, c = c' mod Cout,
// f = c' div Cout. For Cout == 1 this is exactly a reshape to (B, H', W, 1).
DenseTensor reconstruct_output(const DenseTensor& y_folded,
                               std::int64_t factor);

struct FoldResult {
  FoldPlan plan;
  DenseTensor input;   // folded on Apply, original on Fallback
  DenseTensor filter;  // expanded on Apply, original on Fallback
  DenseTensor bias;    // replicated on Apply, original on Fallback
};

// Width-folding for a stride-1 VALID conv given as raw tensors
// (x: (B,H,W,Cin), w: (KH,KW,Cin,Cout), b: (Cout,)). Total: legality
// failures come back as Fallback plus the untouched inputs. This path keeps
// the Cin == 1 restriction; apply_width_fold_general lifts it.
FoldResult apply_width_fold(const DenseTensor& x, const DenseTensor& w,
                            const DenseTensor& b, std::int64_t factor);

FoldResult apply_width_fold_general(const DenseTensor& x, const DenseTensor& w,
                                    const DenseTensor& b, std::int64_t factor);

}  // namespace widthfold
