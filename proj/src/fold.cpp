#include "widthfold/fold.hpp"

#include <numeric>
#include <stdexcept>

namespace widthfold {

const char* to_string(FoldReason reason) {
  switch (reason) {
    case FoldReason::None: return "None";
    case FoldReason::WidthNotDivisible: return "WidthNotDivisible";
    case FoldReason::KernelSpansFoldAxis: return "KernelSpansFoldAxis";
    case FoldReason::StrideOnFoldAxis: return "StrideOnFoldAxis";
    case FoldReason::AlreadyAligned: return "AlreadyAligned";
    case FoldReason::FactorTooLarge: return "FactorTooLarge";
    case FoldReason::UnsupportedChannels: return "UnsupportedChannels";
    case FoldReason::NotProfitable: return "NotProfitable";
  }
  return "?";
}

namespace {

FoldPlan fallback(FoldReason reason, std::int64_t factor) {
  FoldPlan plan;
  plan.status = FoldStatus::Fallback;
  plan.reason = reason;
  plan.factor = factor;
  return plan;
}

FoldPlan make_apply_plan(const ConvSpec& spec, std::int64_t factor) {
  FoldPlan plan;
  plan.status = FoldStatus::Apply;
  plan.reason = FoldReason::None;
  plan.factor = factor;
  plan.folded_input_shape = {spec.batch(), spec.in_h(), spec.in_w() / factor,
                             spec.in_c() * factor};
  plan.expanded_filter_shape = {spec.k_h(), spec.k_w(), spec.in_c() * factor,
                                factor * spec.out_c()};
  return plan;
}

void require_positive(std::int64_t factor, std::int64_t align) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (align < 1) throw std::invalid_argument("alignment must be >= 1");
}

}  // namespace

FoldPlan check_legality(const ConvSpec& spec, std::int64_t factor,
                        std::int64_t align) {
  require_positive(factor, align);
  spec.validate();
  if (spec.in_w() % factor != 0) {
    return fallback(FoldReason::WidthNotDivisible, factor);
  }
  if (spec.k_w() != 1) {
    return fallback(FoldReason::KernelSpansFoldAxis, factor);
  }
  if (spec.stride_w != 1) {
    return fallback(FoldReason::StrideOnFoldAxis, factor);
  }
  return make_apply_plan(spec, factor);
}

FoldPlan choose_fold_factor(const ConvSpec& spec, std::int64_t align) {
  require_positive(1, align);
  spec.validate();
  if (spec.in_c() % align == 0) {
    return fallback(FoldReason::AlreadyAligned, 1);
  }
  // Smallest F with (Cin * F) % align == 0 is align / gcd(Cin, align);
  // larger candidates are its multiples.
  const std::int64_t base = align / std::gcd(spec.in_c(), align);
  if (base > spec.in_w()) {
    return fallback(FoldReason::FactorTooLarge, base);
  }
  FoldPlan first_failure;
  bool have_failure = false;
  for (std::int64_t f = base; f <= spec.in_w(); f += base) {
    FoldPlan plan = check_legality(spec, f, align);
    if (plan.ok()) return plan;
    if (!have_failure) {
      first_failure = plan;
      have_failure = true;
    }
  }
  return first_failure;
}

DenseTensor fold_input(const DenseTensor& x, std::int64_t factor) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (x.rank() != 4) {
    throw IllegalFold("fold_input wants a rank-4 NHWC tensor, got " +
                      shape_str(x.shape()));
  }
  const std::int64_t B = x.shape()[0], H = x.shape()[1], W = x.shape()[2],
                     Ci = x.shape()[3];
  if (Ci != 1) {
    throw IllegalFold("fold_input requires Cin == 1, got " +
                      std::to_string(Ci));
  }
  if (W % factor != 0) {
    throw IllegalFold("width " + std::to_string(W) + " not divisible by " +
                      std::to_string(factor));
  }
  // Pure re-indexing: row-major (B,H,W,1) and (B,H,W/F,F) share the flat
  // element order, so this is exactly a reshape.
  return reshape(x, {B, H, W / factor, factor});
}

DenseTensor fold_input_general(const DenseTensor& x, std::int64_t factor) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (x.rank() != 4) {
    throw IllegalFold("fold_input_general wants a rank-4 NHWC tensor, got " +
                      shape_str(x.shape()));
  }
  const std::int64_t B = x.shape()[0], H = x.shape()[1], W = x.shape()[2],
                     Ci = x.shape()[3];
  if (W % factor != 0) {
    throw IllegalFold("width " + std::to_string(W) + " not divisible by " +
                      std::to_string(factor));
  }
  const std::int64_t Wf = W / factor;
  const float* xd = x.data().data();
  std::vector<float> out(x.data().size());
  std::size_t o = 0;
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t wp = 0; wp < Wf; ++wp) {
        // c' = f*Cin + c, value X[b, h, F*w' + f, c]
        for (std::int64_t f = 0; f < factor; ++f) {
          const float* src = xd + (((b * H + h) * W) + factor * wp + f) * Ci;
          for (std::int64_t c = 0; c < Ci; ++c) {
            out[o++] = src[c];
          }
        }
      }
    }
  }
  return DenseTensor({B, H, Wf, Ci * factor}, std::move(out));
}

DenseTensor unfold_input_general(const DenseTensor& x_f, std::int64_t factor) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (x_f.rank() != 4) {
    throw IllegalFold("unfold_input_general wants a rank-4 tensor, got " +
                      shape_str(x_f.shape()));
  }
  const std::int64_t B = x_f.shape()[0], H = x_f.shape()[1],
                     Wf = x_f.shape()[2], Cf = x_f.shape()[3];
  if (Cf % factor != 0) {
    throw IllegalFold("channel extent " + std::to_string(Cf) +
                      " not divisible by " + std::to_string(factor));
  }
  const std::int64_t Ci = Cf / factor;
  const std::int64_t W = Wf * factor;
  const float* xd = x_f.data().data();
  std::vector<float> out(x_f.data().size());
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t wp = 0; wp < Wf; ++wp) {
        for (std::int64_t f = 0; f < factor; ++f) {
          for (std::int64_t c = 0; c < Ci; ++c) {
            const std::int64_t w = factor * wp + f;
            out[((b * H + h) * W + w) * Ci + c] =
                xd[((b * H + h) * Wf + wp) * Cf + f * Ci + c];
          }
        }
      }
    }
  }
  return DenseTensor({B, H, W, Ci}, std::move(out));
}

DenseTensor expand_filter(const DenseTensor& w, std::int64_t factor) {
  if (w.rank() != 4 || w.shape()[2] != 1) {
    throw IllegalFold("expand_filter wants a (KH, 1, 1, Cout) filter, got " +
                      shape_str(w.shape()));
  }
  return expand_filter_general(w, factor);
}

DenseTensor expand_filter_general(const DenseTensor& w, std::int64_t factor) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (w.rank() != 4) {
    throw IllegalFold("expand_filter wants a rank-4 filter, got " +
                      shape_str(w.shape()));
  }
  const std::int64_t KH = w.shape()[0], KW = w.shape()[1], Ci = w.shape()[2],
                     Co = w.shape()[3];
  if (KW != 1) {
    throw IllegalFold("cannot expand a filter that spans the fold axis (KW=" +
                      std::to_string(KW) + ")");
  }
  const std::int64_t Cif = Ci * factor, Cof = Co * factor;
  const float* wd = w.data().data();
  std::vector<float> out(static_cast<std::size_t>(KH * Cif * Cof), 0.0f);
  for (std::int64_t kh = 0; kh < KH; ++kh) {
    for (std::int64_t f = 0; f < factor; ++f) {
      for (std::int64_t c = 0; c < Ci; ++c) {
        for (std::int64_t co = 0; co < Co; ++co) {
          out[(kh * Cif + (f * Ci + c)) * Cof + (f * Co + co)] =
              wd[(kh * Ci + c) * Co + co];
        }
      }
    }
  }
  return DenseTensor({KH, 1, Cif, Cof}, std::move(out));
}

DenseTensor replicate_bias(const DenseTensor& b, std::int64_t factor) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (b.rank() != 1) {
    throw ShapeMismatch("bias must be rank-1, got " + shape_str(b.shape()));
  }
  const std::int64_t Co = b.shape()[0];
  std::vector<float> out(static_cast<std::size_t>(Co * factor));
  for (std::int64_t f = 0; f < factor; ++f) {
    for (std::int64_t c = 0; c < Co; ++c) {
      out[f * Co + c] = b.data()[c];
    }
  }
  return DenseTensor({Co * factor}, std::move(out));
}

DenseTensor reconstruct_output(const DenseTensor& y_folded,
                               std::int64_t factor) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (y_folded.rank() != 4) {
    throw ShapeMismatch("reconstruct_output wants a rank-4 tensor, got " +
                        shape_str(y_folded.shape()));
  }
  const std::int64_t B = y_folded.shape()[0], H = y_folded.shape()[1],
                     Wf = y_folded.shape()[2], Cf = y_folded.shape()[3];
  if (Cf % factor != 0) {
    throw ShapeMismatch("channel extent " + std::to_string(Cf) +
                        " not divisible by fold factor " +
                        std::to_string(factor));
  }
  const std::int64_t Co = Cf / factor;
  const std::int64_t W = Wf * factor;
  const float* yd = y_folded.data().data();
  std::vector<float> out(y_folded.data().size());
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t wp = 0; wp < Wf; ++wp) {
        for (std::int64_t cp = 0; cp < Cf; ++cp) {
          const std::int64_t f = cp / Co;
          const std::int64_t c = cp % Co;
          out[((b * H + h) * W + (factor * wp + f)) * Co + c] =
              yd[((b * H + h) * Wf + wp) * Cf + cp];
        }
      }
    }
  }
  return DenseTensor({B, H, W, Co}, std::move(out));
}

namespace {

FoldResult fold_with_guard(const DenseTensor& x, const DenseTensor& w,
                           const DenseTensor& b, std::int64_t factor,
                           bool require_single_channel) {
  if (factor < 1) throw std::invalid_argument("fold factor must be >= 1");
  if (x.rank() != 4) {
    throw ShapeMismatch("apply_width_fold input must be rank-4 NHWC, got " +
                        shape_str(x.shape()));
  }
  if (w.rank() != 4) {
    throw ShapeMismatch("apply_width_fold filter must be rank-4, got " +
                        shape_str(w.shape()));
  }
  if (b.rank() != 1 || b.shape()[0] != w.shape()[3]) {
    throw ShapeMismatch("bias " + shape_str(b.shape()) +
                        " does not match filter Cout " +
                        std::to_string(w.shape()[3]));
  }
  if (x.shape()[3] != w.shape()[2]) {
    throw ShapeMismatch("input Cin " + std::to_string(x.shape()[3]) +
                        " != filter Cin " + std::to_string(w.shape()[2]));
  }

  const std::int64_t W = x.shape()[2], Ci = x.shape()[3], KW = w.shape()[1];
  const ConvSpec spec{x.shape(), w.shape(), 1, 1};

  auto fall = [&](FoldReason reason) {
    return FoldResult{fallback(reason, factor), x, w, b};
  };
  if (W % factor != 0) return fall(FoldReason::WidthNotDivisible);
  if (require_single_channel && Ci != 1) {
    return fall(FoldReason::UnsupportedChannels);
  }
  if (KW != 1) return fall(FoldReason::KernelSpansFoldAxis);

  FoldResult result;
  result.plan = make_apply_plan(spec, factor);
  result.input = require_single_channel ? fold_input(x, factor)
                                        : fold_input_general(x, factor);
  result.filter = expand_filter_general(w, factor);
  result.bias = replicate_bias(b, factor);
  return result;
}

}  // namespace

FoldResult apply_width_fold(const DenseTensor& x, const DenseTensor& w,
                            const DenseTensor& b, std::int64_t factor) {
  return fold_with_guard(x, w, b, factor, /*require_single_channel=*/true);
}

FoldResult apply_width_fold_general(const DenseTensor& x, const DenseTensor& w,
                                    const DenseTensor& b,
                                    std::int64_t factor) {
  return fold_with_guard(x, w, b, factor, /*require_single_channel=*/false);
}

}  // namespace widthfold
