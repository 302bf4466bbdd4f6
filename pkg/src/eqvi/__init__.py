"""Enhanced quadratic video frame interpolation.

Deterministic NumPy implementation: least-squares quadratic flow
prediction, flow reversal, warping and blending, residual synthesis and
two-scale fusion, with analytic sprite scenes for ground truth.
"""
from .core import (
    build_laplacian_pyramid,
    channel_gradient,
    read_png,
    reconstruct_laplacian_pyramid,
    resample_bilinear,
    write_png,
)
from .flow_estimation import Analytic, BlockMatch, FlowFormatError, Precomputed, estimate_flow, load_flo, save_flo
from .flow_ops import backward_warp, refine_flow, reverse_flow
from .fusion import ConstantMask, NetMask, WarpErrorMask, fuse, predict_mask, run_two_scale
from .metrics import MetricReport, combined_loss, evaluate, epe, l1_loss, lap_loss, psnr, ssim
from .motion import (
    AccelTriplet,
    QuadraticMotionField,
    RQFPParams,
    accel_triplet,
    alpha_weight,
    direction_gate,
    eval_flow_at,
    linear_predict,
    ls_predict,
    qvi_predict,
    rectified_predict,
)
from .pipeline import FrameQuad, Interpolator, PipelineConfig, interpolate_multi, interpolate_one, load_config
from .synth import Sprite, SpriteScene, analytic_flow, gen_dataset, random_scene, render_at, sprite_mask
from .synthesis import ConvLayer, ConvSpec, RCSNWeights, WeightFormatError, blend_warped, conv2d, extract_features, rcsn_forward

__version__ = "0.1.0"
