#include "widthfold/gemm.hpp"

#include <stdexcept>

#include "widthfold/fold.hpp"
#include "widthfold/refconv.hpp"

namespace widthfold {

namespace {

GemmSpec gemm_spec(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeMismatch("gemm operands must be rank-2, got " +
                        shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  if (a.shape()[1] != b.shape()[0]) {
    throw ShapeMismatch("gemm inner extents differ: " + shape_str(a.shape()) +
                        " x " + shape_str(b.shape()));
  }
  return GemmSpec{a.shape()[0], a.shape()[1], b.shape()[1]};
}

}  // namespace

DenseTensor gemm_ref(const DenseTensor& a, const DenseTensor& b) {
  const GemmSpec s = gemm_spec(a, b);
  const float* ad = a.data().data();
  const float* bd = b.data().data();
  std::vector<float> out(static_cast<std::size_t>(s.m * s.n));
  for (std::int64_t i = 0; i < s.m; ++i) {
    for (std::int64_t j = 0; j < s.n; ++j) {
      float acc = 0.0f;
      for (std::int64_t k = 0; k < s.k; ++k) {
        acc += ad[i * s.k + k] * bd[k * s.n + j];
      }
      out[i * s.n + j] = acc;
    }
  }
  return DenseTensor({s.m, s.n}, std::move(out));
}

DenseTensor gemm_as_conv1x1(const DenseTensor& a, const DenseTensor& b) {
  const GemmSpec s = gemm_spec(a, b);
  const DenseTensor x = reshape(a, {1, s.m, 1, s.k});
  const DenseTensor w = reshape(b, {1, 1, s.k, s.n});
  const ConvSpec spec{x.shape(), w.shape(), 1, 1};
  return reshape(conv2d(x, w, spec), {s.m, s.n});
}

DenseTensor fold_tall_skinny(const DenseTensor& a, const DenseTensor& b,
                             std::int64_t factor) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  const GemmSpec s = gemm_spec(a, b);
  if (s.m % factor != 0) {
    throw IllegalFold("rows " + std::to_string(s.m) + " not divisible by " +
                      std::to_string(factor));
  }
  // (M, K) read as (1, M/F, F, K) then width-folded: both steps together are
  // one row-major reshape with c' = f*K + k.
  const DenseTensor x_f = reshape(a, {1, s.m / factor, 1, s.k * factor});
  const DenseTensor w_f =
      expand_filter_general(reshape(b, {1, 1, s.k, s.n}), factor);
  const ConvSpec spec{x_f.shape(), w_f.shape(), 1, 1};
  const DenseTensor y = conv2d(x_f, w_f, spec);
  // Row m = h*F + f of C sits at y[0, h, 0, f*N + j]; de-interleaving is
  // again a plain reshape.
  return reshape(y, {s.m, s.n});
}

}  // namespace widthfold
