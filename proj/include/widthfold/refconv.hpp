#pragma once

#include <cstdint>

#include "widthfold/tensor.hpp"

namespace widthfold {

// Direct 2-D convolution in NHWC layout with VALID padding (no implicit
// zeros). This is the ground truth every transformation is verified against,
// so the per-element reduction order is fixed: kh outer, kw middle, cin
// inner, accumulated into a float initialized to +0.0f. Results are
// reproducible bit-for-bit across runs.
struct ConvSpec {
  Shape input_shape;   // (B, H, W, Cin)
  Shape filter_shape;  // (KH, KW, Cin, Cout)
  std::int64_t stride_h = 1;
  std::int64_t stride_w = 1;

  std::int64_t batch() const { return input_shape[0]; }
  std::int64_t in_h() const { return input_shape[1]; }
  std::int64_t in_w() const { return input_shape[2]; }
  std::int64_t in_c() const { return input_shape[3]; }
  std::int64_t k_h() const { return filter_shape[0]; }
  std::int64_t k_w() const { return filter_shape[1]; }
  std::int64_t out_c() const { return filter_shape[3]; }

  std::int64_t out_h() const { return (in_h() - k_h()) / stride_h + 1; }
  std::int64_t out_w() const { return (in_w() - k_w()) / stride_w + 1; }
  Shape output_shape() const { return {batch(), out_h(), out_w(), out_c()}; }

  // Throws ShapeMismatch (ranks, filter Cin != input Cin, strides < 1) or
  // DegenerateOutput (out_h/out_w < 1).
  void validate() const;
};

// One multiply-accumulate per (output element x reduction term).
struct MacCount {
  std::uint64_t macs = 0;
};

// y[b,oh,ow,oc] = sum_{kh,kw,ci} x[b, oh*sh+kh, ow*sw+kw, ci] * w[kh,kw,ci,oc]
DenseTensor conv2d(const DenseTensor& x, const DenseTensor& w,
                   const ConvSpec& spec);

// y'[..., c] = y[..., c] + b[c]
DenseTensor bias_add(const DenseTensor& y, const DenseTensor& b);

// Convolution along height only: x is (H, W, 1), w is (K,), scalar bias.
// Thin wrapper over conv2d with KW = 1; agrees with it bitwise.
DenseTensor conv1d_h(const DenseTensor& x, const DenseTensor& w, float bias);

// Closed form B * H_out * W_out * Cout * KH * KW * Cin.
MacCount count_macs(const ConvSpec& spec);

}  // namespace widthfold
