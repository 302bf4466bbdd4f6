"""Two-scale inference and pixel-wise mask fusion."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import expit

from .core import as_frame, check_same_shape, resample_bilinear
from .synthesis import ConvSpec

MIN_SIDE = 8


@dataclass(frozen=True)
class ConstantMask:
    value: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"constant mask must lie in [0, 1], got {self.value}")


@dataclass(frozen=True)
class WarpErrorMask:
    """Trust each branch in inverse proportion to its warp error."""


@dataclass
class NetMask:
    net: ConvSpec


MaskPredictor = Union[ConstantMask, WarpErrorMask, NetMask]


def predict_mask(p: MaskPredictor, full, up_half, err_full=None, err_half=None) -> np.ndarray:
    """Weight ``M`` of the full-resolution branch, shape ``(H, W, 1)``."""
    full, up_half = as_frame(full), as_frame(up_half)
    check_same_shape(full, up_half, what="branch outputs")
    h, w = full.shape[:2]
    if isinstance(p, ConstantMask):
        return np.full((h, w, 1), float(p.value))
    if isinstance(p, WarpErrorMask):
        if err_full is None or err_half is None:
            raise ValueError("warp-error mask needs both branch error maps")
        ef = np.asarray(err_full, dtype=np.float64).reshape(h, w)
        eh = np.asarray(err_half, dtype=np.float64).reshape(h, w)
        total = ef + eh
        m = np.divide(eh, total, out=np.full((h, w), 0.5), where=total > 0)
        return m[..., None]
    if isinstance(p, NetMask):
        x = np.concatenate([full, up_half], axis=-1)
        if p.net.in_channels != x.shape[2]:
            raise ValueError(f"mask network expects {p.net.in_channels} channels, got {x.shape[2]}")
        if p.net.out_channels != 1:
            raise ValueError("mask network must produce one channel")
        return expit(p.net(x))
    raise TypeError(f"unknown mask predictor {p!r}")


def fuse(M, full, up_half) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    full, up_half = as_frame(full), as_frame(up_half)
    check_same_shape(full, up_half, what="branch outputs")
    if M.ndim == 2:
        M = M[..., None]
    return M * full + (1.0 - M) * up_half


def half_size(h: int, w: int) -> tuple[int, int]:
    return (h + 1) // 2, (w + 1) // 2


def run_two_scale(model: Callable, quad, t: float, p: MaskPredictor, half_model: Callable | None = None):
    """Run ``model`` on the quad and on its half-size copy, then fuse.

    ``model(quad, t)`` must return an object with ``frame`` and
    ``warp_error`` attributes; ``half_model`` (default ``model``) runs the
    half-size branch. Returns ``(fused, full_result, half_result, mask)``.
    """
    h, w = quad.shape
    if min(h, w) < MIN_SIDE:
        raise ValueError(f"two-scale inference needs at least {MIN_SIDE}px per side, got {h}x{w}")
    full_res = model(quad, t)
    half_res = (half_model or model)(quad.resized(*half_size(h, w)), t)
    up_half = resample_bilinear(half_res.frame, h, w)
    err_half = resample_bilinear(half_res.warp_error[..., None], h, w)[..., 0]
    M = predict_mask(p, full_res.frame, up_half, full_res.warp_error, err_half)
    return fuse(M, full_res.frame, up_half), full_res, half_res, M
