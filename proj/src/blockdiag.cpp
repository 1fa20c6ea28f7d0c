#include "widthfold/blockdiag.hpp"

#include <stdexcept>

namespace widthfold {

BlockDiagFilter::BlockDiagFilter(std::vector<DenseTensor> blocks,
                                 std::int64_t num_blocks)
    : blocks_(std::move(blocks)), num_blocks_(num_blocks) {
  if (blocks_.empty() || num_blocks_ < 1) {
    throw ShapeMismatch("BlockDiagFilter needs at least one block");
  }
  for (const auto& b : blocks_) {
    if (b.rank() != 4) {
      throw ShapeMismatch("block must be rank-4 KHxKWxCinxCout, got " +
                          shape_str(b.shape()));
    }
    if (b.shape() != blocks_.front().shape()) {
      throw ShapeMismatch("all blocks must share one shape");
    }
  }
}

BlockDiagFilter BlockDiagFilter::from_expanded(const DenseTensor& dense,
                                               std::int64_t num_blocks) {
  if (dense.rank() != 4) {
    throw ShapeMismatch("expanded filter must be rank-4, got " +
                        shape_str(dense.shape()));
  }
  const std::int64_t KH = dense.shape()[0], KW = dense.shape()[1],
                     Cif = dense.shape()[2], Cof = dense.shape()[3];
  if (num_blocks < 1 || Cif % num_blocks != 0 || Cof % num_blocks != 0) {
    throw ShapeMismatch("channel extents " + std::to_string(Cif) + "x" +
                        std::to_string(Cof) + " not divisible into " +
                        std::to_string(num_blocks) + " blocks");
  }
  const std::int64_t Cib = Cif / num_blocks, Cob = Cof / num_blocks;
  const float* d = dense.data().data();

  // Strict zero policy: the expansion writes exact zeros off the diagonal,
  // so any other bit pattern (even 1e-30) indicates a broken filter.
  std::vector<DenseTensor> blocks;
  blocks.reserve(static_cast<std::size_t>(num_blocks));
  for (std::int64_t g = 0; g < num_blocks; ++g) {
    std::vector<float> block(static_cast<std::size_t>(KH * KW * Cib * Cob));
    std::size_t o = 0;
    for (std::int64_t kh = 0; kh < KH; ++kh) {
      for (std::int64_t kw = 0; kw < KW; ++kw) {
        for (std::int64_t c = 0; c < Cib; ++c) {
          const float* row = d + ((kh * KW + kw) * Cif + g * Cib + c) * Cof;
          for (std::int64_t co = 0; co < Cob; ++co) {
            block[o++] = row[g * Cob + co];
          }
        }
      }
    }
    blocks.emplace_back(Shape{KH, KW, Cib, Cob}, std::move(block));
  }
  for (std::int64_t kh = 0; kh < KH; ++kh) {
    for (std::int64_t kw = 0; kw < KW; ++kw) {
      for (std::int64_t ci = 0; ci < Cif; ++ci) {
        const float* row = d + ((kh * KW + kw) * Cif + ci) * Cof;
        const std::int64_t gi = ci / Cib;
        for (std::int64_t co = 0; co < Cof; ++co) {
          if (co / Cob != gi && row[co] != 0.0f) {
            throw NotBlockDiagonal(
                "off-diagonal entry at (kh=" + std::to_string(kh) +
                ", kw=" + std::to_string(kw) + ", cin=" + std::to_string(ci) +
                ", cout=" + std::to_string(co) + ") is nonzero");
          }
        }
      }
    }
  }

  bool all_same = true;
  for (std::int64_t g = 1; g < num_blocks && all_same; ++g) {
    all_same = blocks[static_cast<std::size_t>(g)].bitwise_equal(blocks[0]);
  }
  if (all_same && num_blocks > 1) {
    return shared(std::move(blocks[0]), num_blocks);
  }
  return BlockDiagFilter(std::move(blocks), num_blocks);
}

BlockDiagFilter BlockDiagFilter::shared(DenseTensor block,
                                        std::int64_t num_blocks) {
  std::vector<DenseTensor> blocks;
  blocks.push_back(std::move(block));
  return BlockDiagFilter(std::move(blocks), num_blocks);
}

BlockDiagFilter BlockDiagFilter::from_blocks(std::vector<DenseTensor> blocks) {
  const auto n = static_cast<std::int64_t>(blocks.size());
  return BlockDiagFilter(std::move(blocks), n);
}

const DenseTensor& BlockDiagFilter::block(std::int64_t i) const {
  if (i < 0 || i >= num_blocks_) {
    throw ShapeMismatch("block index out of range");
  }
  return blocks_.size() == 1 ? blocks_[0] : blocks_[static_cast<std::size_t>(i)];
}

Shape BlockDiagFilter::logical_shape() const {
  const Shape& b = blocks_.front().shape();
  return {b[0], b[1], b[2] * num_blocks_, b[3] * num_blocks_};
}

std::int64_t BlockDiagFilter::stored_floats() const {
  // Footprint of the sparse representation: one block per group (1/F of the
  // dense expansion). Shared storage dedups below even that; the reported
  // figure is the per-block layout the structure guarantees.
  return num_blocks_ * blocks_.front().size();
}

DenseTensor BlockDiagFilter::densify() const {
  const Shape ls = logical_shape();
  const std::int64_t KH = ls[0], KW = ls[1], Cif = ls[2], Cof = ls[3];
  const std::int64_t Cib = Cif / num_blocks_, Cob = Cof / num_blocks_;
  std::vector<float> out(static_cast<std::size_t>(numel(ls)), 0.0f);
  for (std::int64_t g = 0; g < num_blocks_; ++g) {
    const float* bd = block(g).data().data();
    for (std::int64_t kh = 0; kh < KH; ++kh) {
      for (std::int64_t kw = 0; kw < KW; ++kw) {
        for (std::int64_t c = 0; c < Cib; ++c) {
          const float* src = bd + ((kh * KW + kw) * Cib + c) * Cob;
          float* dst =
              out.data() + ((kh * KW + kw) * Cif + g * Cib + c) * Cof + g * Cob;
          for (std::int64_t co = 0; co < Cob; ++co) dst[co] = src[co];
        }
      }
    }
  }
  return DenseTensor(ls, std::move(out));
}

DenseTensor grouped_conv(const DenseTensor& x_f, const BlockDiagFilter& bd,
                         const ConvSpec& spec) {
  spec.validate();
  const Shape ls = bd.logical_shape();
  if (x_f.shape() != spec.input_shape || ls != spec.filter_shape) {
    throw ShapeMismatch("grouped_conv shapes do not match spec: input " +
                        shape_str(x_f.shape()) + ", filter " + shape_str(ls) +
                        ", spec " + shape_str(spec.input_shape) + "/" +
                        shape_str(spec.filter_shape));
  }
  const std::int64_t F = bd.num_blocks();
  const std::int64_t B = spec.batch(), H = spec.in_h(), W = spec.in_w(),
                     Cif = spec.in_c();
  const std::int64_t KH = spec.k_h(), KW = spec.k_w(), Cof = spec.out_c();
  const std::int64_t OH = spec.out_h(), OW = spec.out_w();
  const std::int64_t sh = spec.stride_h, sw = spec.stride_w;
  const std::int64_t Cib = Cif / F, Cob = Cof / F;

  const float* xd = x_f.data().data();
  std::vector<float> out(static_cast<std::size_t>(B * OH * OW * Cof));

  // Same loop nest as conv2d with cin restricted to the live block, so the
  // surviving accumulation sequence is bit-identical to the dense path.
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t oh = 0; oh < OH; ++oh) {
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        for (std::int64_t g = 0; g < F; ++g) {
          const float* wd = bd.block(g).data().data();
          for (std::int64_t oc = 0; oc < Cob; ++oc) {
            float acc = 0.0f;
            for (std::int64_t kh = 0; kh < KH; ++kh) {
              const std::int64_t ih = oh * sh + kh;
              for (std::int64_t kw = 0; kw < KW; ++kw) {
                const std::int64_t iw = ow * sw + kw;
                const float* xrow =
                    xd + ((b * H + ih) * W + iw) * Cif + g * Cib;
                const float* wrow = wd + ((kh * KW + kw) * Cib) * Cob + oc;
                for (std::int64_t ci = 0; ci < Cib; ++ci) {
                  acc += xrow[ci] * wrow[ci * Cob];
                }
              }
            }
            out[((b * OH + oh) * OW + ow) * Cof + g * Cob + oc] = acc;
          }
        }
      }
    }
  }
  return DenseTensor(spec.output_shape(), std::move(out));
}

MacReport mac_report(const ConvSpec& spec, const FoldPlan& plan,
                     std::int64_t align) {
  if (!plan.ok()) {
    throw std::invalid_argument("mac_report requires an Apply plan");
  }
  if (align < 1) throw std::invalid_argument("alignment must be >= 1");
  spec.validate();

  MacReport report;
  report.factor = plan.factor;
  report.original = count_macs(spec).macs;

  ConvSpec folded = spec;
  folded.input_shape = plan.folded_input_shape;
  folded.filter_shape = plan.expanded_filter_shape;
  folded.stride_w = 1;
  report.dense_folded = count_macs(folded).macs;

  // Grouped execution only touches the diagonal blocks: dense_folded / F.
  report.grouped_folded = report.dense_folded / plan.factor;

  const std::int64_t padded_cin =
      (spec.in_c() + align - 1) / align * align;
  ConvSpec padded = spec;
  padded.input_shape[3] = padded_cin;
  padded.filter_shape[2] = padded_cin;
  report.zero_padded = count_macs(padded).macs;
  return report;
}

}  // namespace widthfold
