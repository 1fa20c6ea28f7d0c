"""Width folding: fold a non-convolved spatial axis into channels so conv and
GEMM operators meet hardware channel-alignment constraints, with machine-checked
equivalence to the original operator."""

from widthfold._core import (
    apply_width_fold,
    apply_width_fold_general,
    bias_add,
    check_legality,
    choose_fold_factor,
    conv1d_h,
    conv2d,
    count_macs,
    expand_filter,
    expand_filter_general,
    fold_input,
    fold_input_general,
    fold_tall_skinny,
    gemm_as_conv1x1,
    gemm_ref,
    grouped_conv,
    mac_report,
    reconstruct_output,
    replicate_bias,
    unfold_input_general,
)

__all__ = [
    "apply_width_fold",
    "apply_width_fold_general",
    "bias_add",
    "check_legality",
    "choose_fold_factor",
    "conv1d_h",
    "conv2d",
    "count_macs",
    "expand_filter",
    "expand_filter_general",
    "fold_input",
    "fold_input_general",
    "fold_tall_skinny",
    "gemm_as_conv1x1",
    "gemm_ref",
    "grouped_conv",
    "mac_report",
    "reconstruct_output",
    "replicate_bias",
    "unfold_input_general",
]

__version__ = "0.1.0"
