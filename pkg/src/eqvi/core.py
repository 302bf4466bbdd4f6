"""Image and flow containers, resampling, gradients and Laplacian pyramids.

Frames are ``(H, W, C)`` float arrays with intensities in ``[0, 1]``; flows
are ``(H, W, 2)`` arrays holding ``(u, v)`` = (horizontal, vertical)
displacement in pixels. Everything here is a pure function of its inputs.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def as_frame(frame) -> np.ndarray:
    """Return ``frame`` as a 3-D float array, adding a channel axis to 2-D input."""
    arr = np.asarray(frame)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected an (H, W, C) frame, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    return arr


def as_flow(flow) -> np.ndarray:
    arr = np.asarray(flow, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"expected an (H, W, 2) flow, got shape {arr.shape}")
    return arr


def check_same_shape(*arrays, what: str = "inputs") -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"{what} have mismatched shapes: {sorted(shapes)}")


def sample_bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample ``img`` at real-valued pixel coordinates.

    Coordinates are clamped to the image, so anything outside repeats the
    nearest edge pixel.

    Args:
        img: ``(H, W, C)`` array.
        x: horizontal coordinates, any shape.
        y: vertical coordinates, same shape as ``x``.

    Returns:
        Array of shape ``x.shape + (C,)``.
    """
    h, w = img.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (x - x0)[..., None]
    wy = (y - y0)[..., None]
    top = (1.0 - wx) * img[y0, x0] + wx * img[y0, x1]
    bottom = (1.0 - wx) * img[y1, x0] + wx * img[y1, x1]
    return (1.0 - wy) * top + wy * bottom


def _axis_weights(n_in: int, n_out: int):
    # pixel-centre alignment: out sample i sits at (i + 0.5) * n_in / n_out - 0.5
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def resample_bilinear(frame, new_h: int, new_w: int) -> np.ndarray:
    """Separable bilinear resize with clamp-to-edge coordinates.

    Works on any ``(H, W, C)`` array, so it serves frames, flows and
    feature maps alike. Flow values are *not* rescaled.
    """
    if new_h < 1 or new_w < 1:
        raise ValueError(f"target size must be positive, got {new_h}x{new_w}")
    img = as_frame(frame).astype(np.float64, copy=False)
    h, w = img.shape[:2]
    if (h, w) == (new_h, new_w):
        return img.copy()
    y0, y1, wy = _axis_weights(h, new_h)
    x0, x1, wx = _axis_weights(w, new_w)
    wy = wy[:, None, None]
    rows = (1.0 - wy) * img[y0] + wy * img[y1]
    wx = wx[None, :, None]
    return (1.0 - wx) * rows[:, x0] + wx * rows[:, x1]


def resize_flow(flow, new_h: int, new_w: int) -> np.ndarray:
    """Resample a flow field and rescale its vectors to the new pixel grid."""
    flow = as_flow(flow)
    h, w = flow.shape[:2]
    out = resample_bilinear(flow, new_h, new_w)
    out[..., 0] *= new_w / w
    out[..., 1] *= new_h / h
    return out


def downsample_mean(frame) -> np.ndarray:
    """Halve resolution by 2x2 averaging; odd sizes replicate the last row/column."""
    img = as_frame(frame).astype(np.float64, copy=False)
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        img = np.pad(img, ((0, h % 2), (0, w % 2), (0, 0)), mode="edge")
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def channel_gradient(frame) -> np.ndarray:
    """Forward-difference gradients of every channel.

    The output has ``2 * C`` channels ordered ``(dx_0, dy_0, dx_1, dy_1, ...)``.
    The last column (for dx) and last row (for dy) are zero, which is what a
    replicate-padded forward difference gives.
    """
    img = as_frame(frame).astype(np.float64, copy=False)
    h, w, c = img.shape
    out = np.zeros((h, w, 2 * c))
    out[:, :-1, 0::2] = img[:, 1:] - img[:, :-1]
    out[:-1, :, 1::2] = img[1:] - img[:-1]
    return out


def build_laplacian_pyramid(frame, n: int) -> list[np.ndarray]:
    """Laplacian pyramid with ``n`` levels, finest first.

    Levels ``0..n-2`` hold band-pass detail ``G_i - up(G_{i+1})``; the last
    level is the coarsest Gaussian (2x2 mean) level.
    """
    img = as_frame(frame).astype(np.float64, copy=False)
    if n < 1:
        raise ValueError("pyramid needs at least one level")
    h, w = img.shape[:2]
    if min(h, w) < 2 ** (n - 1):
        raise ValueError(f"{h}x{w} frame is too small for {n} pyramid levels")
    gauss = [img]
    for _ in range(n - 1):
        gauss.append(downsample_mean(gauss[-1]))
    levels = []
    for fine, coarse in zip(gauss[:-1], gauss[1:]):
        levels.append(fine - resample_bilinear(coarse, *fine.shape[:2]))
    levels.append(gauss[-1].copy())
    return levels


def reconstruct_laplacian_pyramid(levels: list[np.ndarray]) -> np.ndarray:
    img = levels[-1]
    for detail in reversed(levels[:-1]):
        img = detail + resample_bilinear(img, *detail.shape[:2])
    return img


def read_png(path) -> np.ndarray:
    """Load an 8-bit image as a float32 frame in ``[0, 1]`` (no gamma handling)."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float32) / np.float32(255.0)
    return as_frame(arr)


def to_uint8(frame) -> np.ndarray:
    img = as_frame(frame)
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path, frame) -> None:
    data = to_uint8(frame)
    if data.shape[2] == 1:
        im = Image.fromarray(data[:, :, 0], mode="L")
    elif data.shape[2] == 3:
        im = Image.fromarray(data, mode="RGB")
    else:
        raise ValueError(f"cannot write a {data.shape[2]}-channel frame as PNG")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    im.save(path, format="PNG")
