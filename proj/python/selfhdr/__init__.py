"""Self-supervised multi-exposure HDR reconstruction.

Images are numpy arrays shaped (height, width, channels) with float64 values.
"""

from ._selfhdr import (
    DataError,
    FlowEstimatorSpec,
    InputError,
    Model,
    NumericError,
    RadiometryConfig,
    build_model,
    build_supervision,
    estimate_flow,
    fuse_color,
    fusion_weights,
    linearize,
    load_scene,
    psnr_l,
    psnr_u,
    read_rgbe,
    ssim,
    synthesize_scene,
    tonemap,
    warp,
    write_rgbe,
)

__all__ = [
    "DataError",
    "FlowEstimatorSpec",
    "InputError",
    "Model",
    "NumericError",
    "RadiometryConfig",
    "build_model",
    "build_supervision",
    "estimate_flow",
    "fuse_color",
    "fusion_weights",
    "linearize",
    "load_scene",
    "psnr_l",
    "psnr_u",
    "read_rgbe",
    "ssim",
    "synthesize_scene",
    "tonemap",
    "warp",
    "write_rgbe",
]
