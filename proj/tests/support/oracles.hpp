#pragma once

// Independent reference implementations used to cross-check the library.
// These deliberately avoid the library's kernels and index helpers: offsets
// are recomputed from scratch at every access so an indexing bug in the
// implementation cannot hide here. Reduction orders match the documented
// contracts (kh outer, kw middle, cin inner; k inner for gemm), which is
// what makes bitwise comparisons meaningful.

#include <cstdint>
#include <span>
#include <vector>

#include "widthfold/tensor.hpp"

namespace oracles {

using widthfold::DenseTensor;
using widthfold::Shape;

// Recursive row-major flat index: index(c) = index(c[:-1]) * extent + c[-1].
inline std::int64_t naive_flat_index(std::span<const std::int64_t> shape,
                                     std::span<const std::int64_t> coord) {
  if (shape.empty()) return 0;
  return naive_flat_index(shape.first(shape.size() - 1),
                          coord.first(coord.size() - 1)) *
             shape.back() +
         coord.back();
}

inline std::int64_t idx4(const Shape& s, std::int64_t a, std::int64_t b,
                         std::int64_t c, std::int64_t d) {
  const std::int64_t coord[4] = {a, b, c, d};
  const std::int64_t shape[4] = {s[0], s[1], s[2], s[3]};
  return naive_flat_index(shape, coord);
}

// Six-nested-loop direct convolution, NHWC, VALID padding. Counts one MAC
// per executed multiply-accumulate when a counter is supplied.
inline DenseTensor conv2d(const DenseTensor& x, const DenseTensor& w,
                          std::int64_t stride_h, std::int64_t stride_w,
                          std::uint64_t* macs = nullptr) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const std::int64_t B = xs[0], H = xs[1], W = xs[2], Ci = xs[3];
  const std::int64_t KH = ws[0], KW = ws[1], Co = ws[3];
  const std::int64_t OH = (H - KH) / stride_h + 1;
  const std::int64_t OW = (W - KW) / stride_w + 1;

  std::vector<float> out(static_cast<std::size_t>(B * OH * OW * Co));
  const Shape os{B, OH, OW, Co};
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t oh = 0; oh < OH; ++oh)
      for (std::int64_t ow = 0; ow < OW; ++ow)
        for (std::int64_t oc = 0; oc < Co; ++oc) {
          float acc = 0.0f;
          for (std::int64_t kh = 0; kh < KH; ++kh)
            for (std::int64_t kw = 0; kw < KW; ++kw)
              for (std::int64_t ci = 0; ci < Ci; ++ci) {
                const float xv = x.data()[idx4(
                    xs, b, oh * stride_h + kh, ow * stride_w + kw, ci)];
                const float wv = w.data()[idx4(ws, kh, kw, ci, oc)];
                acc += xv * wv;
                if (macs) ++*macs;
              }
          out[static_cast<std::size_t>(idx4(os, b, oh, ow, oc))] = acc;
        }
  return DenseTensor(os, std::move(out));
}

// Grouped execution with per-group channel windows; same surviving
// reduction order as the dense loop above.
inline DenseTensor grouped_conv(const DenseTensor& x, const DenseTensor& w,
                                std::int64_t groups, std::int64_t stride_h,
                                std::int64_t stride_w,
                                std::uint64_t* macs = nullptr) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const std::int64_t B = xs[0], Ci = xs[3];
  const std::int64_t KH = ws[0], KW = ws[1], Co = ws[3];
  const std::int64_t OH = (xs[1] - KH) / stride_h + 1;
  const std::int64_t OW = (xs[2] - KW) / stride_w + 1;
  const std::int64_t Cib = Ci / groups, Cob = Co / groups;

  std::vector<float> out(static_cast<std::size_t>(B * OH * OW * Co));
  const Shape os{B, OH, OW, Co};
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t oh = 0; oh < OH; ++oh)
      for (std::int64_t ow = 0; ow < OW; ++ow)
        for (std::int64_t g = 0; g < groups; ++g)
          for (std::int64_t oc = g * Cob; oc < (g + 1) * Cob; ++oc) {
            float acc = 0.0f;
            for (std::int64_t kh = 0; kh < KH; ++kh)
              for (std::int64_t kw = 0; kw < KW; ++kw)
                for (std::int64_t ci = g * Cib; ci < (g + 1) * Cib; ++ci) {
                  acc += x.data()[idx4(xs, b, oh * stride_h + kh,
                                       ow * stride_w + kw, ci)] *
                         w.data()[idx4(ws, kh, kw, ci, oc)];
                  if (macs) ++*macs;
                }
            out[static_cast<std::size_t>(idx4(os, b, oh, ow, oc))] = acc;
          }
  return DenseTensor(os, std::move(out));
}

inline DenseTensor bias_add(const DenseTensor& y, const DenseTensor& b) {
  std::vector<float> out(y.data().begin(), y.data().end());
  const std::int64_t C = b.shape()[0];
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += b.data()[i % static_cast<std::size_t>(C)];
  }
  return DenseTensor(y.shape(), std::move(out));
}

// Quadruple-loop width fold (Cin == 1 form).
inline DenseTensor fold_input(const DenseTensor& x, std::int64_t F) {
  const Shape& xs = x.shape();
  const std::int64_t B = xs[0], H = xs[1], W = xs[2];
  const Shape os{B, H, W / F, F};
  std::vector<float> out(static_cast<std::size_t>(widthfold::numel(os)));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t wp = 0; wp < W / F; ++wp)
        for (std::int64_t f = 0; f < F; ++f) {
          out[static_cast<std::size_t>(idx4(os, b, h, wp, f))] =
              x.data()[idx4(xs, b, h, F * wp + f, 0)];
        }
  return DenseTensor(os, std::move(out));
}

// General-Cin width fold: X_f[b,h,w',f*Cin+c] = X[b,h,F*w'+f,c].
inline DenseTensor fold_input_general(const DenseTensor& x, std::int64_t F) {
  const Shape& xs = x.shape();
  const std::int64_t B = xs[0], H = xs[1], W = xs[2], Ci = xs[3];
  const Shape os{B, H, W / F, Ci * F};
  std::vector<float> out(static_cast<std::size_t>(widthfold::numel(os)));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t wp = 0; wp < W / F; ++wp)
        for (std::int64_t f = 0; f < F; ++f)
          for (std::int64_t c = 0; c < Ci; ++c) {
            out[static_cast<std::size_t>(idx4(os, b, h, wp, f * Ci + c))] =
                x.data()[idx4(xs, b, h, F * wp + f, c)];
          }
  return DenseTensor(os, std::move(out));
}

// Inverse of the fold map, written from the inverse formula rather than by
// reversing the forward loop.
inline DenseTensor unfold_input_general(const DenseTensor& xf,
                                        std::int64_t F) {
  const Shape& fs = xf.shape();
  const std::int64_t B = fs[0], H = fs[1], Wp = fs[2], Cf = fs[3];
  const std::int64_t Ci = Cf / F;
  const Shape os{B, H, Wp * F, Ci};
  std::vector<float> out(static_cast<std::size_t>(widthfold::numel(os)));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < Wp * F; ++w)
        for (std::int64_t c = 0; c < Ci; ++c) {
          out[static_cast<std::size_t>(idx4(os, b, h, w, c))] =
              xf.data()[idx4(fs, b, h, w / F, (w % F) * Ci + c)];
        }
  return DenseTensor(os, std::move(out));
}

// Forward fold of an *output* tensor: Y_f[b,h,w',f*Cout+c] = Y[b,h,F*w'+f,c].
// reconstruct_output must invert exactly this map.
inline DenseTensor fold_output(const DenseTensor& y, std::int64_t F) {
  return fold_input_general(y, F);
}

// Plain triple loop, k inner.
inline DenseTensor gemm(const DenseTensor& a, const DenseTensor& b) {
  const std::int64_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  std::vector<float> out(static_cast<std::size_t>(M * N));
  for (std::int64_t i = 0; i < M; ++i)
    for (std::int64_t j = 0; j < N; ++j) {
      float acc = 0.0f;
      for (std::int64_t k = 0; k < K; ++k) {
        acc += a.data()[static_cast<std::size_t>(i * K + k)] *
               b.data()[static_cast<std::size_t>(k * N + j)];
      }
      out[static_cast<std::size_t>(i * N + j)] = acc;
    }
  return DenseTensor({M, N}, std::move(out));
}

}  // namespace oracles
