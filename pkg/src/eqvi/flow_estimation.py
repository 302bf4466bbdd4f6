"""Flow sources: analytic scene flow, ``.flo`` files, and a block matcher."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy import ndimage

from .core import as_flow, as_frame, check_same_shape, downsample_mean
from .synth import SpriteScene, analytic_flow, format_time

FLO_MAGIC = 202021.25
COARSE_MEDIAN = 5


class FlowFormatError(ValueError):
    """Malformed flow file or a flow that does not fit the frames."""


def save_flo(path, flow) -> None:
    flow = as_flow(flow)
    if not np.all(np.isfinite(flow)):
        raise ValueError("refusing to save a non-finite flow")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, w, h))
        fh.write(flow.astype("<f4").tobytes())


def load_flo(path) -> np.ndarray:
    """Read a Middlebury ``.flo`` file into an ``(H, W, 2)`` float32 array."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FlowFormatError(f"{path}: truncated header")
    magic, w, h = struct.unpack("<fii", data[:12])
    if magic != np.float32(FLO_MAGIC):
        raise FlowFormatError(f"{path}: bad magic {magic!r}")
    if w < 1 or h < 1:
        raise FlowFormatError(f"{path}: invalid size {w}x{h}")
    expected = 12 + 8 * w * h
    if len(data) != expected:
        raise FlowFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float32)


@dataclass(frozen=True)
class Analytic:
    scene: SpriteScene


@dataclass(frozen=True)
class Precomputed:
    """``pattern`` contains ``{from}`` and ``{to}``, replaced by frame times."""

    pattern: str

    def path_for(self, t_from: float, t_to: float) -> Path:
        return Path(self.pattern.replace("{from}", format_time(t_from)).replace("{to}", format_time(t_to)))


@dataclass(frozen=True)
class BlockMatch:
    levels: int = 3
    radius: int = 2
    patch: int = 5

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.patch < 3 or self.patch % 2 == 0:
            raise ValueError("patch must be odd and >= 3")


FlowSource = Union[Analytic, Precomputed, BlockMatch]


def estimate_flow(source: FlowSource, Ia, Ib, times: tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """Flow from ``Ia`` to ``Ib`` such that ``Ia(x) ~ Ib(x + flow(x))``.

    ``times`` names the two frames for sources that look flows up by time
    (analytic scenes and file patterns); the block matcher ignores it.
    """
    Ia, Ib = as_frame(Ia), as_frame(Ib)
    check_same_shape(Ia, Ib, what="frames")
    h, w = Ia.shape[:2]
    t_from, t_to = times
    if isinstance(source, Analytic):
        if (source.scene.height, source.scene.width) != (h, w):
            raise FlowFormatError("scene canvas does not match the frames")
        return analytic_flow(source.scene, t_from, t_to)
    if isinstance(source, Precomputed):
        if t_from == t_to:
            return np.zeros((h, w, 2))
        flow = load_flo(source.path_for(t_from, t_to)).astype(np.float64)
        if flow.shape[:2] != (h, w):
            raise FlowFormatError(f"flow {flow.shape[:2]} does not match frames {(h, w)}")
        return flow
    if isinstance(source, BlockMatch):
        return block_match(Ia, Ib, source.levels, source.radius, source.patch)
    raise TypeError(f"unknown flow source {source!r}")


def _candidates(radius: int) -> list[tuple[int, int]]:
    offs = [(dx, dy) for dx in range(-radius, radius + 1) for dy in range(-radius, radius + 1)]
    return sorted(offs, key=lambda d: (d[0] ** 2 + d[1] ** 2, d[0], d[1]))


class _SADCost:
    """Patch SAD between ``a`` at each pixel and ``b`` displaced by a per-pixel integer offset."""

    def __init__(self, a: np.ndarray, b: np.ndarray, patch: int):
        self.b = b
        h, w = a.shape[:2]
        r = patch // 2
        self.ys, self.xs = np.mgrid[0:h, 0:w]
        self.offsets = [(ox, oy) for oy in range(-r, r + 1) for ox in range(-r, r + 1)]
        self.a_patches = [
            a[np.clip(self.ys + oy, 0, h - 1), np.clip(self.xs + ox, 0, w - 1)] for ox, oy in self.offsets
        ]

    def __call__(self, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        h, w = self.b.shape[:2]
        cost = np.zeros((h, w))
        bx = self.xs + dx
        by = self.ys + dy
        for (ox, oy), ap in zip(self.offsets, self.a_patches):
            bp = self.b[np.clip(by + oy, 0, h - 1), np.clip(bx + ox, 0, w - 1)]
            cost += np.abs(ap - bp).sum(axis=-1)
        return cost


def _parabola_offset(cm: np.ndarray, c0: np.ndarray, cp: np.ndarray) -> np.ndarray:
    denom = cm - 2.0 * c0 + cp
    off = np.divide(cm - cp, 2.0 * denom, out=np.zeros_like(c0), where=denom > 0)
    return np.clip(off, -0.5, 0.5)


def block_match(Ia, Ib, levels: int = 3, radius: int = 2, patch: int = 5) -> np.ndarray:
    """Coarse-to-fine SAD block matching with parabolic sub-pixel refinement.

    Each level median-filters (5x5) and doubles the coarser integer
    displacement, then searches ``radius`` pixels around it. Equal costs
    prefer the smaller step, ordered by ``(|d|, dx, dy)``.
    """
    Ia = as_frame(Ia).astype(np.float64, copy=False)
    Ib = as_frame(Ib).astype(np.float64, copy=False)
    check_same_shape(Ia, Ib, what="frames")
    if min(Ia.shape[:2]) < 2 ** (levels - 1):
        raise ValueError(f"frames too small for {levels} levels")
    pa, pb = [Ia], [Ib]
    for _ in range(levels - 1):
        pa.append(downsample_mean(pa[-1]))
        pb.append(downsample_mean(pb[-1]))

    cands = _candidates(radius)
    dx = dy = None
    for a, b in zip(reversed(pa), reversed(pb)):
        h, w = a.shape[:2]
        if dx is None:
            dx = np.zeros((h, w), dtype=np.intp)
            dy = np.zeros((h, w), dtype=np.intp)
        else:
            # a median pass drops isolated coarse mismatches before they are doubled
            dx = ndimage.median_filter(dx, size=COARSE_MEDIAN, mode="nearest")
            dy = ndimage.median_filter(dy, size=COARSE_MEDIAN, mode="nearest")
            yi = np.arange(h) // 2
            xi = np.arange(w) // 2
            dx = 2 * dx[np.ix_(yi, xi)]
            dy = 2 * dy[np.ix_(yi, xi)]
        cost = _SADCost(a, b, patch)
        best = np.full((h, w), np.inf)
        best_dx = np.zeros_like(dx)
        best_dy = np.zeros_like(dy)
        for cx, cy in cands:
            c = cost(dx + cx, dy + cy)
            better = c < best
            best[better] = c[better]
            best_dx[better] = cx
            best_dy[better] = cy
        dx = dx + best_dx
        dy = dy + best_dy

    sub_x = _parabola_offset(cost(dx - 1, dy), best, cost(dx + 1, dy))
    sub_y = _parabola_offset(cost(dx, dy - 1), best, cost(dx, dy + 1))
    return np.stack([dx + sub_x, dy + sub_y], axis=-1)
