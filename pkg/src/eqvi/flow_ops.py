"""Flow reversal, backward warping and flow refinement."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import as_flow, as_frame, sample_bilinear

_CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))


def reverse_flow(fwd, sigma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Turn a source-anchored flow into a target-anchored backward flow.

    Each source pixel ``x`` is splatted to ``x + fwd(x)`` onto its four
    neighbouring target pixels. A neighbour's weight is its bilinear weight
    times a Gaussian of its distance to the landing point (cut at
    ``3 * sigma``); each source's weights are normalised to sum to one.
    The backward flow at a target is minus the weighted mean of the vectors
    landing on it.

    Targets nobody lands on take the backward flow of the nearest covered
    target and get visibility 0.

    Returns:
        ``(backward_flow, visibility)``; visibility is the accumulated weight
        clipped to ``[0, 1]``, shape ``(H, W)``.
    """
    fwd = as_flow(fwd)
    h, w = fwd.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    tx = xs + fwd[..., 0]
    ty = ys + fwd[..., 1]
    x0 = np.floor(tx)
    y0 = np.floor(ty)

    weights = []
    targets = []
    for dx, dy in _CORNERS:
        nx = x0 + dx
        ny = y0 + dy
        ex = np.abs(tx - nx)
        ey = np.abs(ty - ny)
        wgt = (1.0 - ex) * (1.0 - ey) * np.exp(-(ex * ex + ey * ey) / (2.0 * sigma * sigma))
        wgt[ex * ex + ey * ey > (3.0 * sigma) ** 2] = 0.0
        weights.append(wgt)
        targets.append((nx, ny))
    total = np.sum(weights, axis=0)

    acc_w = np.zeros(h * w)
    acc_u = np.zeros(h * w)
    acc_v = np.zeros(h * w)
    for wgt, (nx, ny) in zip(weights, targets):
        wgt = np.divide(wgt, total, out=np.zeros_like(wgt), where=total > 0)
        inside = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h) & (wgt > 0)
        idx = (ny[inside] * w + nx[inside]).astype(np.intp)
        wi = wgt[inside]
        acc_w += np.bincount(idx, weights=wi, minlength=h * w)
        acc_u += np.bincount(idx, weights=wi * fwd[..., 0][inside], minlength=h * w)
        acc_v += np.bincount(idx, weights=wi * fwd[..., 1][inside], minlength=h * w)

    acc_w = acc_w.reshape(h, w)
    covered = acc_w > 0
    back = np.zeros((h, w, 2))
    back[covered, 0] = -acc_u.reshape(h, w)[covered] / acc_w[covered]
    back[covered, 1] = -acc_v.reshape(h, w)[covered] / acc_w[covered]
    if covered.any() and not covered.all():
        iy, ix = ndimage.distance_transform_edt(~covered, return_distances=False, return_indices=True)
        back = back[iy, ix]
    visibility = np.clip(acc_w, 0.0, 1.0)
    return back, visibility


def backward_warp(src, flow) -> np.ndarray:
    """``out(x) = src(x + flow(x))`` with bilinear, clamp-to-edge sampling."""
    src = as_frame(src)
    flow = as_flow(flow)
    if src.shape[:2] != flow.shape[:2]:
        raise ValueError(f"flow {flow.shape[:2]} does not match frame {src.shape[:2]}")
    h, w = flow.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return sample_bilinear(src, xs + flow[..., 0], ys + flow[..., 1])


def refine_flow(flow) -> np.ndarray:
    """3x3 median per flow component, replicate border."""
    flow = as_flow(flow)
    out = np.empty_like(flow)
    for c in range(2):
        out[..., c] = ndimage.median_filter(flow[..., c], size=3, mode="nearest")
    return out
