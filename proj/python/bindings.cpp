#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "widthfold/blockdiag.hpp"
#include "widthfold/fold.hpp"
#include "widthfold/gemm.hpp"
#include "widthfold/refconv.hpp"

namespace py = pybind11;
namespace wf = widthfold;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

wf::DenseTensor to_tensor(const FloatArray& a) {
  wf::Shape shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = a.shape(i);
  std::vector<float> data(a.data(), a.data() + a.size());
  return wf::DenseTensor(std::move(shape), std::move(data));
}

py::array_t<float> to_numpy(const wf::DenseTensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict plan_dict(const wf::FoldPlan& plan) {
  py::dict d;
  d["status"] = plan.ok() ? "apply" : "fallback";
  d["reason"] = wf::to_string(plan.reason);
  d["factor"] = plan.factor;
  d["folded_input_shape"] = plan.folded_input_shape;
  d["expanded_filter_shape"] = plan.expanded_filter_shape;
  return d;
}

wf::ConvSpec make_spec(const wf::Shape& input_shape, const wf::Shape& filter_shape,
                       std::int64_t stride_h, std::int64_t stride_w) {
  return wf::ConvSpec{input_shape, filter_shape, stride_h, stride_w};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "width folding for channel-aligned convolutions and GEMM";

  py::register_exception<wf::ShapeMismatch>(m, "ShapeMismatchError",
                                            PyExc_ValueError);
  py::register_exception<wf::IllegalFold>(m, "IllegalFoldError",
                                          PyExc_ValueError);
  py::register_exception<wf::DegenerateOutput>(m, "DegenerateOutputError",
                                               PyExc_ValueError);

  m.def(
      "conv2d",
      [](const FloatArray& x, const FloatArray& w, std::int64_t stride_h,
         std::int64_t stride_w) {
        const wf::DenseTensor xt = to_tensor(x), wt = to_tensor(w);
        return to_numpy(wf::conv2d(
            xt, wt, make_spec(xt.shape(), wt.shape(), stride_h, stride_w)));
      },
      py::arg("x"), py::arg("w"), py::arg("stride_h") = 1,
      py::arg("stride_w") = 1,
      "Direct NHWC convolution, VALID padding, fixed reduction order.");

  m.def(
      "bias_add",
      [](const FloatArray& y, const FloatArray& b) {
        return to_numpy(wf::bias_add(to_tensor(y), to_tensor(b)));
      },
      py::arg("y"), py::arg("b"));

  m.def(
      "conv1d_h",
      [](const FloatArray& x, const FloatArray& w, float bias) {
        return to_numpy(wf::conv1d_h(to_tensor(x), to_tensor(w), bias));
      },
      py::arg("x"), py::arg("w"), py::arg("bias") = 0.0f,
      "Height-only convolution of an (H, W, 1) tensor with a (K,) kernel.");

  m.def(
      "count_macs",
      [](const wf::Shape& input_shape, const wf::Shape& filter_shape,
         std::int64_t stride_h, std::int64_t stride_w) {
        return wf::count_macs(
                   make_spec(input_shape, filter_shape, stride_h, stride_w))
            .macs;
      },
      py::arg("input_shape"), py::arg("filter_shape"), py::arg("stride_h") = 1,
      py::arg("stride_w") = 1);

  m.def(
      "check_legality",
      [](const wf::Shape& input_shape, const wf::Shape& filter_shape,
         std::int64_t factor, std::int64_t align, std::int64_t stride_h,
         std::int64_t stride_w) {
        return plan_dict(wf::check_legality(
            make_spec(input_shape, filter_shape, stride_h, stride_w), factor,
            align));
      },
      py::arg("input_shape"), py::arg("filter_shape"), py::arg("factor"),
      py::arg("align") = 8, py::arg("stride_h") = 1, py::arg("stride_w") = 1);

  m.def(
      "choose_fold_factor",
      [](const wf::Shape& input_shape, const wf::Shape& filter_shape,
         std::int64_t align, std::int64_t stride_h, std::int64_t stride_w) {
        return plan_dict(wf::choose_fold_factor(
            make_spec(input_shape, filter_shape, stride_h, stride_w), align));
      },
      py::arg("input_shape"), py::arg("filter_shape"), py::arg("align") = 8,
      py::arg("stride_h") = 1, py::arg("stride_w") = 1,
      "Smallest factor whose folded channels meet the alignment target.");

  m.def("fold_input", [](const FloatArray& x, std::int64_t factor) {
    return to_numpy(wf::fold_input(to_tensor(x), factor));
  });
  m.def("fold_input_general", [](const FloatArray& x, std::int64_t factor) {
    return to_numpy(wf::fold_input_general(to_tensor(x), factor));
  });
  m.def("unfold_input_general", [](const FloatArray& x, std::int64_t factor) {
    return to_numpy(wf::unfold_input_general(to_tensor(x), factor));
  });
  m.def("expand_filter", [](const FloatArray& w, std::int64_t factor) {
    return to_numpy(wf::expand_filter(to_tensor(w), factor));
  });
  m.def("expand_filter_general", [](const FloatArray& w, std::int64_t factor) {
    return to_numpy(wf::expand_filter_general(to_tensor(w), factor));
  });
  m.def("replicate_bias", [](const FloatArray& b, std::int64_t factor) {
    return to_numpy(wf::replicate_bias(to_tensor(b), factor));
  });
  m.def("reconstruct_output", [](const FloatArray& y, std::int64_t factor) {
    return to_numpy(wf::reconstruct_output(to_tensor(y), factor));
  });

  m.def(
      "apply_width_fold",
      [](const FloatArray& x, const FloatArray& w, const FloatArray& b,
         std::int64_t factor) {
        const wf::FoldResult r =
            wf::apply_width_fold(to_tensor(x), to_tensor(w), to_tensor(b), factor);
        return py::make_tuple(plan_dict(r.plan), to_numpy(r.input),
                              to_numpy(r.filter), to_numpy(r.bias));
      },
      py::arg("x"), py::arg("w"), py::arg("b"), py::arg("factor"),
      "Returns (plan, x_f, w_f, b_f); inputs come back unchanged on fallback.");

  m.def(
      "apply_width_fold_general",
      [](const FloatArray& x, const FloatArray& w, const FloatArray& b,
         std::int64_t factor) {
        const wf::FoldResult r = wf::apply_width_fold_general(
            to_tensor(x), to_tensor(w), to_tensor(b), factor);
        return py::make_tuple(plan_dict(r.plan), to_numpy(r.input),
                              to_numpy(r.filter), to_numpy(r.bias));
      },
      py::arg("x"), py::arg("w"), py::arg("b"), py::arg("factor"));

  m.def(
      "grouped_conv",
      [](const FloatArray& x, const FloatArray& w_dense, std::int64_t groups,
         std::int64_t stride_h, std::int64_t stride_w) {
        const wf::DenseTensor xt = to_tensor(x), wt = to_tensor(w_dense);
        const auto bd = wf::BlockDiagFilter::from_expanded(wt, groups);
        return to_numpy(wf::grouped_conv(
            xt, bd, make_spec(xt.shape(), wt.shape(), stride_h, stride_w)));
      },
      py::arg("x"), py::arg("w_dense"), py::arg("groups"),
      py::arg("stride_h") = 1, py::arg("stride_w") = 1,
      "Runs a verified block-diagonal filter as independent groups.");

  m.def(
      "mac_report",
      [](const wf::Shape& input_shape, const wf::Shape& filter_shape,
         std::int64_t factor, std::int64_t align) {
        const wf::ConvSpec spec = make_spec(input_shape, filter_shape, 1, 1);
        const wf::MacReport r =
            wf::mac_report(spec, wf::check_legality(spec, factor, align), align);
        py::dict d;
        d["original"] = r.original;
        d["dense_folded"] = r.dense_folded;
        d["grouped_folded"] = r.grouped_folded;
        d["zero_padded"] = r.zero_padded;
        d["factor"] = r.factor;
        return d;
      },
      py::arg("input_shape"), py::arg("filter_shape"), py::arg("factor"),
      py::arg("align") = 8);

  m.def("gemm_ref", [](const FloatArray& a, const FloatArray& b) {
    return to_numpy(wf::gemm_ref(to_tensor(a), to_tensor(b)));
  });
  m.def("gemm_as_conv1x1", [](const FloatArray& a, const FloatArray& b) {
    return to_numpy(wf::gemm_as_conv1x1(to_tensor(a), to_tensor(b)));
  });
  m.def(
      "fold_tall_skinny",
      [](const FloatArray& a, const FloatArray& b, std::int64_t factor) {
        return to_numpy(wf::fold_tall_skinny(to_tensor(a), to_tensor(b), factor));
      },
      py::arg("a"), py::arg("b"), py::arg("factor"),
      "GEMM through a width-folded 1x1 convolution.");
}
