"""Frame blending and the residual contextual synthesis stage.

Feature maps use the same ``(H, W, C)`` layout as frames. Convolution
weights are stored ``(out, in, ky, kx)``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import as_frame, check_same_shape, resample_bilinear

ACTIVATIONS = {"none": 0, "relu": 1}
FEATURE_CHANNELS = 64
# warped images 3+3, edges 6+6, features 64+64
RCSN_IN_CHANNELS = 146


class WeightFormatError(ValueError):
    """Weight file or layer shapes that do not match the expected architecture."""


@dataclass
class ConvLayer:
    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0
    activation: str = "none"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float32)
        self.bias = np.asarray(self.bias, dtype=np.float32)
        if self.weight.ndim != 4 or self.weight.shape[2] != self.weight.shape[3]:
            raise ValueError(f"weight must be (out, in, k, k), got {self.weight.shape}")
        if self.kernel % 2 == 0:
            raise ValueError("kernel size must be odd")
        if self.bias.shape != (self.out_channels,):
            raise ValueError(f"bias shape {self.bias.shape} does not match {self.out_channels} outputs")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = conv2d(x, self.weight, self.bias, self.stride, self.padding)
        if self.activation == "relu":
            np.maximum(y, 0.0, out=y)
        return y

    @classmethod
    def random(cls, out_ch, in_ch, k, stride=1, padding=None, activation="none", seed=0, scale=None):
        """He-style seeded random layer (or all zeros with ``scale=0``)."""
        rng = np.random.default_rng(seed)
        if scale is None:
            scale = np.sqrt(2.0 / (in_ch * k * k))
        weight = rng.standard_normal((out_ch, in_ch, k, k)) * scale
        bias = rng.standard_normal(out_ch) * scale * 0.1
        return cls(weight, bias, stride, k // 2 if padding is None else padding, activation)


@dataclass
class ConvSpec:
    layers: list[ConvLayer]

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise ValueError("a ConvSpec needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_channels != nxt.in_channels:
                raise ValueError(
                    f"layer chain mismatch: {prev.out_channels} outputs feed {nxt.in_channels} inputs"
                )

    @property
    def in_channels(self) -> int:
        return self.layers[0].in_channels

    @property
    def out_channels(self) -> int:
        return self.layers[-1].out_channels

    def __call__(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer(x)
        return x


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation with zero padding, computed in float64.

    Output size per axis is ``(n + 2 * padding - k) // stride + 1``.
    """
    x = as_frame(x).astype(np.float64, copy=False)
    weight = np.asarray(weight, dtype=np.float64)
    out_ch, in_ch, k, _ = weight.shape
    if x.shape[2] != in_ch:
        raise ValueError(f"input has {x.shape[2]} channels, kernel expects {in_ch}")
    if padding:
        x = np.pad(x, ((padding, padding), (padding, padding), (0, 0)))
    hp, wp = x.shape[:2]
    if hp < k or wp < k:
        raise ValueError("input is smaller than the kernel")
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    windows = sliding_window_view(x, (k, k), axis=(0, 1))[::stride, ::stride]  # (ho, wo, in, k, k)
    kmat = weight.reshape(out_ch, -1).T
    out = np.empty((ho, wo, out_ch))
    # bound the im2col buffer to a few million elements
    rows = max(1, 4_000_000 // max(1, wo * in_ch * k * k))
    for r in range(0, ho, rows):
        cols = windows[r:r + rows].reshape(-1, in_ch * k * k)
        out[r:r + rows] = (cols @ kmat).reshape(-1, wo, out_ch)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)
    return out


def default_conv1(seed: int | None = 0) -> ConvLayer:
    """The fixed 7x7/stride-2 feature layer; ``seed=None`` gives zero weights."""
    return ConvLayer.random(FEATURE_CHANNELS, 3, 7, stride=2, padding=3,
                            seed=seed or 0, scale=0.0 if seed is None else 0.05)


def default_rcsn_net(seed: int | None = 0, in_channels: int = RCSN_IN_CHANNELS) -> ConvSpec:
    """Three 3x3 layers (64, 32, 3); ``seed=None`` gives zero weights."""
    widths = [(in_channels, 64, "relu"), (64, 32, "relu"), (32, 3, "none")]
    layers = []
    for i, (cin, cout, act) in enumerate(widths):
        scale = 0.0 if seed is None else None
        layer = ConvLayer.random(cout, cin, 3, activation=act, seed=(seed or 0) + i, scale=scale)
        layers.append(layer)
    if seed is not None:
        # keep the untrained residual small relative to intensities
        layers[-1].weight *= np.float32(0.01)
        layers[-1].bias *= np.float32(0.0)
    return ConvSpec(layers)


def check_conv1(layer: ConvLayer) -> None:
    if (layer.out_channels, layer.in_channels, layer.kernel, layer.stride, layer.padding) != (
        FEATURE_CHANNELS, 3, 7, 2, 3
    ):
        raise WeightFormatError(
            "feature layer must be 64x3x7x7, stride 2, padding 3; got "
            f"{layer.out_channels}x{layer.in_channels}x{layer.kernel}x{layer.kernel}, "
            f"stride {layer.stride}, padding {layer.padding}"
        )


def _rgb(frame) -> np.ndarray:
    img = as_frame(frame)
    if img.shape[2] == 1:
        return np.repeat(img, 3, axis=2)
    if img.shape[2] != 3:
        raise ValueError(f"expected a 1- or 3-channel frame, got {img.shape[2]} channels")
    return img


def extract_features(frame, conv1: ConvLayer) -> np.ndarray:
    """Contextual features at half resolution, upsampled back to the frame size."""
    check_conv1(conv1)
    img = _rgb(frame)
    feats = conv1(img)
    return resample_bilinear(feats, *img.shape[:2])


def blend_warped(I0w, I1w, vis0, vis1, t: float) -> np.ndarray:
    """Visibility- and time-weighted average of the two warped frames."""
    I0w, I1w = as_frame(I0w), as_frame(I1w)
    check_same_shape(I0w, I1w, what="warped frames")
    w0 = ((1.0 - t) * np.asarray(vis0, dtype=np.float64))[..., None]
    w1 = (t * np.asarray(vis1, dtype=np.float64))[..., None]
    total = w0 + w1
    fallback = (1.0 - t) * I0w + t * I1w
    safe = np.where(total > 0, total, 1.0)
    out = np.where(total > 0, (w0 * I0w + w1 * I1w) / safe, fallback)
    # the weighted mean can overshoot its inputs by an ulp; keep it inside
    return np.clip(out, np.minimum(I0w, I1w), np.maximum(I0w, I1w))


def rcsn_forward(blended, I0w, I1w, E0w, E1w, F0w, F1w, net: ConvSpec) -> np.ndarray:
    """Add the network's residual to the blended frame and clamp to [0, 1]."""
    parts = [as_frame(p) for p in (I0w, I1w, E0w, E1w, F0w, F1w)]
    blended = as_frame(blended)
    if len({p.shape[:2] for p in parts + [blended]}) != 1:
        raise ValueError("synthesis inputs must share spatial dimensions")
    x = np.concatenate([p.astype(np.float64, copy=False) for p in parts], axis=-1)
    if x.shape[2] != RCSN_IN_CHANNELS:
        raise ValueError(f"synthesis input has {x.shape[2]} channels, expected {RCSN_IN_CHANNELS}")
    if net.in_channels != x.shape[2]:
        raise ValueError(f"network expects {net.in_channels} channels, input has {x.shape[2]}")
    if net.out_channels != blended.shape[2]:
        raise ValueError(f"network produces {net.out_channels} channels, frame has {blended.shape[2]}")
    residual = net(x)
    if residual.shape != blended.shape:
        raise ValueError(f"residual shape {residual.shape} differs from frame {blended.shape}")
    return np.clip(blended + residual, 0.0, 1.0)


_HEADER = struct.Struct("<6i")


def save_layers(path, layers: list[ConvLayer]) -> None:
    """Write layers: count, per-layer header, then each layer's weights and biases."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<i", len(layers)))
        for L in layers:
            fh.write(_HEADER.pack(L.out_channels, L.in_channels, L.kernel, L.stride, L.padding,
                                  ACTIVATIONS[L.activation]))
        for L in layers:
            fh.write(L.weight.astype("<f4").tobytes())
            fh.write(L.bias.astype("<f4").tobytes())


def load_layers(path) -> list[ConvLayer]:
    data = Path(path).read_bytes()
    codes = {v: k for k, v in ACTIVATIONS.items()}
    try:
        (count,) = struct.unpack_from("<i", data, 0)
        if count < 1:
            raise WeightFormatError(f"{path}: layer count {count}")
        headers = [_HEADER.unpack_from(data, 4 + i * _HEADER.size) for i in range(count)]
    except struct.error as exc:
        raise WeightFormatError(f"{path}: truncated header") from exc
    pos = 4 + count * _HEADER.size
    layers = []
    for out_ch, in_ch, k, stride, pad, act in headers:
        if min(out_ch, in_ch, k, stride) < 1 or pad < 0 or act not in codes:
            raise WeightFormatError(f"{path}: invalid layer header {(out_ch, in_ch, k, stride, pad, act)}")
        n_w = out_ch * in_ch * k * k
        end = pos + 4 * (n_w + out_ch)
        if end > len(data):
            raise WeightFormatError(f"{path}: truncated weights")
        w = np.frombuffer(data, "<f4", n_w, pos).reshape(out_ch, in_ch, k, k)
        b = np.frombuffer(data, "<f4", out_ch, pos + 4 * n_w)
        pos = end
        try:
            layers.append(ConvLayer(w.copy(), b.copy(), stride, pad, codes[act]))
        except ValueError as exc:
            raise WeightFormatError(f"{path}: {exc}") from exc
    if pos != len(data):
        raise WeightFormatError(f"{path}: {len(data) - pos} trailing bytes")
    return layers


@dataclass
class RCSNWeights:
    """Feature layer plus the residual network, as stored in one weight file."""

    conv1: ConvLayer
    net: ConvSpec

    def __post_init__(self):
        check_conv1(self.conv1)
        if self.net.in_channels != RCSN_IN_CHANNELS:
            raise WeightFormatError(f"residual network takes {self.net.in_channels} channels, "
                                    f"expected {RCSN_IN_CHANNELS}")
        if self.net.out_channels != 3:
            raise WeightFormatError("residual network must output 3 channels")

    @classmethod
    def load(cls, path) -> "RCSNWeights":
        layers = load_layers(path)
        if len(layers) < 2:
            raise WeightFormatError(f"{path}: need the feature layer plus at least one network layer")
        try:
            net = ConvSpec(layers[1:])
        except ValueError as exc:
            raise WeightFormatError(f"{path}: {exc}") from exc
        return cls(layers[0], net)

    def save(self, path) -> None:
        save_layers(path, [self.conv1, *self.net.layers])

    @classmethod
    def seeded(cls, seed: int | None = 0) -> "RCSNWeights":
        return cls(default_conv1(seed), default_rcsn_net(seed))
