#include "widthfold/refconv.hpp"

namespace widthfold {

void ConvSpec::validate() const {
  if (input_shape.size() != 4) {
    throw ShapeMismatch("conv input must be rank-4 NHWC, got " +
                        shape_str(input_shape));
  }
  if (filter_shape.size() != 4) {
    throw ShapeMismatch("conv filter must be rank-4 KHxKWxCinxCout, got " +
                        shape_str(filter_shape));
  }
  for (std::int64_t e : input_shape) {
    if (e < 1) throw ShapeMismatch("conv input extent < 1: " + shape_str(input_shape));
  }
  for (std::int64_t e : filter_shape) {
    if (e < 1) throw ShapeMismatch("conv filter extent < 1: " + shape_str(filter_shape));
  }
  if (filter_shape[2] != in_c()) {
    throw ShapeMismatch("filter Cin " + std::to_string(filter_shape[2]) +
                        " != input Cin " + std::to_string(in_c()));
  }
  if (stride_h < 1 || stride_w < 1) {
    throw ShapeMismatch("strides must be >= 1");
  }
  if (in_h() < k_h() || in_w() < k_w() || out_h() < 1 || out_w() < 1) {
    throw DegenerateOutput("VALID padding yields empty output for input " +
                           shape_str(input_shape) + ", filter " +
                           shape_str(filter_shape));
  }
}

DenseTensor conv2d(const DenseTensor& x, const DenseTensor& w,
                   const ConvSpec& spec) {
  spec.validate();
  if (x.shape() != spec.input_shape) {
    throw ShapeMismatch("conv input " + shape_str(x.shape()) +
                        " does not match spec " + shape_str(spec.input_shape));
  }
  if (w.shape() != spec.filter_shape) {
    throw ShapeMismatch("conv filter " + shape_str(w.shape()) +
                        " does not match spec " + shape_str(spec.filter_shape));
  }

  const std::int64_t B = spec.batch(), H = spec.in_h(), W = spec.in_w(),
                     Ci = spec.in_c();
  const std::int64_t KH = spec.k_h(), KW = spec.k_w(), Co = spec.out_c();
  const std::int64_t OH = spec.out_h(), OW = spec.out_w();
  const std::int64_t sh = spec.stride_h, sw = spec.stride_w;

  const float* xd = x.data().data();
  const float* wd = w.data().data();
  std::vector<float> out(static_cast<std::size_t>(B * OH * OW * Co));

  std::size_t o = 0;
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t oh = 0; oh < OH; ++oh) {
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        for (std::int64_t oc = 0; oc < Co; ++oc) {
          float acc = 0.0f;
          // Fixed reduction order: kh outer, kw middle, cin inner.
          for (std::int64_t kh = 0; kh < KH; ++kh) {
            const std::int64_t ih = oh * sh + kh;
            for (std::int64_t kw = 0; kw < KW; ++kw) {
              const std::int64_t iw = ow * sw + kw;
              const float* xrow = xd + ((b * H + ih) * W + iw) * Ci;
              const float* wrow = wd + ((kh * KW + kw) * Ci) * Co + oc;
              for (std::int64_t ci = 0; ci < Ci; ++ci) {
                acc += xrow[ci] * wrow[ci * Co];
              }
            }
          }
          out[o++] = acc;
        }
      }
    }
  }
  return DenseTensor(spec.output_shape(), std::move(out));
}

DenseTensor bias_add(const DenseTensor& y, const DenseTensor& b) {
  if (y.rank() < 1 || b.rank() != 1 || b.shape()[0] != y.shape().back()) {
    throw ShapeMismatch("bias length " + shape_str(b.shape()) +
                        " does not match channel extent of " +
                        shape_str(y.shape()));
  }
  const std::int64_t C = b.shape()[0];
  const float* bd = b.data().data();
  std::vector<float> out(y.data().begin(), y.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += bd[i % C];
  }
  return DenseTensor(y.shape(), std::move(out));
}

DenseTensor conv1d_h(const DenseTensor& x, const DenseTensor& w, float bias) {
  if (x.rank() != 3 || x.shape()[2] != 1) {
    throw ShapeMismatch("conv1d_h input must be (H, W, 1), got " +
                        shape_str(x.shape()));
  }
  if (w.rank() != 1) {
    throw ShapeMismatch("conv1d_h kernel must be rank-1, got " +
                        shape_str(w.shape()));
  }
  const std::int64_t H = x.shape()[0], W = x.shape()[1], K = w.shape()[0];
  if (K > H) {
    throw ShapeMismatch("kernel length exceeds height");
  }
  ConvSpec spec{{1, H, W, 1}, {K, 1, 1, 1}, 1, 1};
  auto y = conv2d(reshape(x, {1, H, W, 1}), reshape(w, {K, 1, 1, 1}), spec);
  y = bias_add(y, DenseTensor({1}, {bias}));
  return reshape(y, {spec.out_h(), W, 1});
}

MacCount count_macs(const ConvSpec& spec) {
  spec.validate();
  const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v); };
  return MacCount{u(spec.batch()) * u(spec.out_h()) * u(spec.out_w()) *
                  u(spec.out_c()) * u(spec.k_h()) * u(spec.k_w()) *
                  u(spec.in_c())};
}

}  // namespace widthfold
