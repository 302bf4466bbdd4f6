"""Image quality metrics and the L1 / Laplacian-pyramid losses."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import ndimage

from .core import as_flow, as_frame, build_laplacian_pyramid, check_same_shape

PSNR_CAP = 99.0
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11x11 window
SSIM_K1, SSIM_K2 = 0.01, 0.03
LAP_WEIGHT = 10.0


def _pair(a, b):
    a = as_frame(a).astype(np.float64, copy=False)
    b = as_frame(b).astype(np.float64, copy=False)
    check_same_shape(a, b, what="frames")
    return a, b


def psnr(a, b) -> float:
    """PSNR in dB for peak 1, capped at 99 dB."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * math.log10(mse))


def _gauss_window(x: np.ndarray) -> np.ndarray:
    # truncate chosen so the kernel radius is exactly SSIM_RADIUS
    return ndimage.gaussian_filter(x, sigma=SSIM_SIGMA, truncate=SSIM_RADIUS / SSIM_SIGMA, mode="constant")


def ssim(a, b) -> float:
    """Mean SSIM over channels and the fully-windowed pixels.

    Gaussian 11x11 window with sigma 1.5, ``K1 = 0.01``, ``K2 = 0.03``,
    peak 1, population (biased) statistics.
    """
    a, b = _pair(a, b)
    h, w = a.shape[:2]
    if min(h, w) < 2 * SSIM_RADIUS + 1:
        raise ValueError(f"SSIM needs frames of at least {2 * SSIM_RADIUS + 1}px per side")
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    crop = (slice(SSIM_RADIUS, h - SSIM_RADIUS), slice(SSIM_RADIUS, w - SSIM_RADIUS))
    vals = []
    for c in range(a.shape[2]):
        x, y = a[..., c], b[..., c]
        mx, my = _gauss_window(x), _gauss_window(y)
        sxx = _gauss_window(x * x) - mx * mx
        syy = _gauss_window(y * y) - my * my
        sxy = _gauss_window(x * y) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        vals.append((num / den)[crop])
    return float(np.mean(vals))


def l1_loss(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def lap_loss(a, b, n: int = 5) -> float:
    """``sum_i 2**i * mean|L_i(a) - L_i(b)|`` over pyramid levels, finest first."""
    a, b = _pair(a, b)
    pa = build_laplacian_pyramid(a, n)
    pb = build_laplacian_pyramid(b, n)
    return float(sum(2.0**i * np.mean(np.abs(la - lb)) for i, (la, lb) in enumerate(zip(pa, pb))))


def combined_loss(a, b, n: int = 5) -> float:
    return l1_loss(a, b) + LAP_WEIGHT * lap_loss(a, b, n)


def epe(f, g) -> float:
    """Mean endpoint error between two flows."""
    f, g = as_flow(f), as_flow(g)
    check_same_shape(f, g, what="flows")
    return float(np.mean(np.hypot(f[..., 0] - g[..., 0], f[..., 1] - g[..., 1])))


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    l1: float
    lap: float
    combined: float
    epe: float | None = None

    def as_lines(self, prefix: str = "") -> list[str]:
        return [f"{prefix}{k}={v!r}" for k, v in asdict(self).items() if v is not None]


def evaluate(pred, gt, flow=None, gt_flow=None, n: int = 5) -> MetricReport:
    """All frame metrics for one prediction; the flow pair is optional."""
    l1 = l1_loss(pred, gt)
    lap = lap_loss(pred, gt, n)
    return MetricReport(
        psnr=psnr(pred, gt),
        ssim=ssim(pred, gt),
        l1=l1,
        lap=lap,
        combined=l1 + LAP_WEIGHT * lap,
        epe=None if flow is None else epe(flow, gt_flow),
    )


def aggregate(reports: list[MetricReport]) -> MetricReport:
    if not reports:
        raise ValueError("nothing to aggregate")
    out = {}
    for f in fields(MetricReport):
        vals = [getattr(r, f.name) for r in reports]
        out[f.name] = None if any(v is None for v in vals) else float(np.mean(vals))
    return MetricReport(**out)


def format_table(named: dict[str, MetricReport]) -> str:
    cols = [f.name for f in fields(MetricReport)]
    head = f"{'frame':<24}" + "".join(f"{c:>12}" for c in cols)
    lines = [head, "-" * len(head)]
    for name, rep in named.items():
        cells = []
        for c in cols:
            v = getattr(rep, c)
            cells.append(f"{'-':>12}" if v is None else f"{v:>12.5f}")
        lines.append(f"{name:<24}" + "".join(cells))
    return "\n".join(lines)


def format_kv(named: dict[str, MetricReport]) -> str:
    lines = []
    for name, rep in named.items():
        lines += rep.as_lines(prefix=f"{name}.")
    return "\n".join(lines) + "\n"
