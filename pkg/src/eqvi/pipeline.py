"""End-to-end interpolation of a four-frame window.

Stages run in order: flow estimation, motion prediction for both anchor
frames, flow reversal (and optional refinement), backward warping and
blending, optional residual synthesis, optional two-scale fusion.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

import numpy as np

from . import motion
from .core import as_frame, channel_gradient, resample_bilinear, resize_flow
from .flow_estimation import Analytic, BlockMatch, FlowSource, Precomputed, estimate_flow
from .flow_ops import backward_warp, refine_flow, reverse_flow
from .fusion import ConstantMask, MaskPredictor, NetMask, WarpErrorMask, half_size, run_two_scale
from .synthesis import ConvSpec, RCSNWeights, blend_warped, extract_features, load_layers, rcsn_forward

# positions inside a quad: 0 -> I_-1, 1 -> I_0, 2 -> I_1, 3 -> I_2
ANCHOR0_PAIRS = ((1, 0), (1, 2), (1, 3))
ANCHOR1_PAIRS = ((2, 3), (2, 1), (2, 0))


@dataclass(frozen=True)
class FrameQuad:
    """Frames ``I_-1, I_0, I_1, I_2`` and the times flow sources know them by."""

    frames: tuple
    times: tuple = (-1.0, 0.0, 1.0, 2.0)

    def __post_init__(self):
        frames = tuple(as_frame(f) for f in self.frames)
        if len(frames) != 4 or len(self.times) != 4:
            raise ValueError("a quad has exactly four frames")
        if len({f.shape for f in frames}) != 1:
            raise ValueError(f"quad frames differ in shape: {[f.shape for f in frames]}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape[:2]

    def reversed(self) -> "FrameQuad":
        return FrameQuad(self.frames[::-1], self.times[::-1])

    def resized(self, h: int, w: int) -> "FrameQuad":
        return FrameQuad(tuple(resample_bilinear(f, h, w) for f in self.frames), self.times)


@dataclass
class PipelineConfig:
    flow_source: FlowSource = field(default_factory=BlockMatch)
    rqfp: bool = True
    rqfp_params: motion.RQFPParams = field(default_factory=motion.RQFPParams)
    linear: bool = False
    refine: bool = True
    rcsn: Union[RCSNWeights, str, Path, None] = None
    ms_fusion: MaskPredictor | None = None
    t_values: tuple = (0.5,)

    def __post_init__(self):
        ts = tuple(float(t) for t in self.t_values)
        if not ts or any(not 0.0 < t < 1.0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"t_values must be strictly increasing inside (0, 1), got {ts}")
        self.t_values = ts


@dataclass
class InterpResult:
    frame: np.ndarray
    warp_error: np.ndarray
    stages: dict = field(default_factory=dict)


class Interpolator:
    """Runs the configured pipeline; flows are estimated once per quad."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.rcsn = cfg.rcsn
        if isinstance(self.rcsn, (str, Path)):
            if not Path(self.rcsn).is_file():
                raise FileNotFoundError(f"weight file not found: {self.rcsn}")
            self.rcsn = RCSNWeights.load(self.rcsn)

    def needed_pairs(self) -> list[tuple[int, int]]:
        if self.cfg.linear:
            return [(1, 2), (2, 1)]
        if self.cfg.rqfp:
            return [*ANCHOR0_PAIRS, *ANCHOR1_PAIRS]
        return [(1, 0), (1, 2), (2, 3), (2, 1)]

    def estimate_flows(self, quad: FrameQuad) -> dict:
        flows = {}
        for i, j in self.needed_pairs():
            flows[i, j] = estimate_flow(
                self.cfg.flow_source, quad.frames[i], quad.frames[j], (quad.times[i], quad.times[j])
            )
        return flows

    def intermediate_flows(self, flows: dict, t: float):
        """``f_{0->t}`` and ``f_{1->t}``; anchor 1 reuses the anchor-0 code on the reversed quad."""
        if self.cfg.linear:
            return motion.linear_predict(flows[1, 2], t), motion.linear_predict(flows[2, 1], 1.0 - t)
        out = []
        for (prev, nxt, nxt2), s in ((ANCHOR0_PAIRS, t), (ANCHOR1_PAIRS, 1.0 - t)):
            if self.cfg.rqfp:
                m = motion.rectified_predict(flows[prev], flows[nxt], flows[nxt2], self.cfg.rqfp_params)
            else:
                m = motion.qvi_predict(flows[nxt], flows[prev])
            out.append(motion.eval_flow_at(m, s))
        return tuple(out)

    def run_single(self, quad: FrameQuad, t: float, flows: dict | None = None) -> InterpResult:
        if flows is None:
            flows = self.estimate_flows(quad)
        I0, I1 = quad.frames[1], quad.frames[2]
        f0t, f1t = self.intermediate_flows(flows, t)
        ft0, vis0 = reverse_flow(f0t)
        ft1, vis1 = reverse_flow(f1t)
        stages = {"f0t": f0t, "f1t": f1t, "ft0_raw": ft0, "ft1_raw": ft1, "vis0": vis0, "vis1": vis1}
        if self.cfg.refine:
            ft0, ft1 = refine_flow(ft0), refine_flow(ft1)
        I0w, I1w = backward_warp(I0, ft0), backward_warp(I1, ft1)
        blended = blend_warped(I0w, I1w, vis0, vis1, t)
        stages.update(ft0=ft0, ft1=ft1, I0w=I0w, I1w=I1w, blended=blended)
        out = blended
        if self.rcsn is not None:
            E0w = backward_warp(channel_gradient(I0), ft0)
            E1w = backward_warp(channel_gradient(I1), ft1)
            F0w = backward_warp(extract_features(I0, self.rcsn.conv1), ft0)
            F1w = backward_warp(extract_features(I1, self.rcsn.conv1), ft1)
            out = rcsn_forward(blended, I0w, I1w, E0w, E1w, F0w, F1w, self.rcsn.net)
        out = np.clip(out, 0.0, 1.0)
        stages["synthesized"] = out
        warp_error = np.mean(np.abs(I0w - I1w), axis=-1)
        return InterpResult(out, warp_error, stages)

    def half_flows(self, quad: FrameQuad, flows: dict) -> dict | None:
        """Half-resolution flows: re-estimated by the block matcher, else rescaled."""
        if isinstance(self.cfg.flow_source, BlockMatch):
            return None
        h2, w2 = half_size(*quad.shape)
        return {k: resize_flow(f, h2, w2) for k, f in flows.items()}

    def run(self, quad: FrameQuad, t: float, flows: dict | None = None, _half: dict | None = None) -> InterpResult:
        if flows is None:
            flows = self.estimate_flows(quad)
        if self.cfg.ms_fusion is None:
            res = self.run_single(quad, t, flows)
        else:
            half = _half if _half is not None else self.half_flows(quad, flows)
            fused, full, part, mask = run_two_scale(
                lambda q, s: self.run_single(q, s, flows),
                quad, t, self.cfg.ms_fusion,
                half_model=lambda q, s: self.run_single(q, s, half),
            )
            stages = dict(full.stages, half=part.frame, mask=mask)
            res = InterpResult(fused, full.warp_error, stages)
        res.frame = np.clip(res.frame, 0.0, 1.0).astype(np.float32)
        return res

    def run_multi(self, quad: FrameQuad, t_values=None) -> list[InterpResult]:
        ts = self.cfg.t_values if t_values is None else t_values
        flows = self.estimate_flows(quad)
        half = self.half_flows(quad, flows) if self.cfg.ms_fusion is not None else None
        if half is None and self.cfg.ms_fusion is not None:
            h2, w2 = half_size(*quad.shape)
            half = self.estimate_flows(quad.resized(h2, w2))
        return [self.run(quad, t, flows, half) for t in ts]


def interpolate_one(quad: FrameQuad, t: float, cfg: PipelineConfig) -> np.ndarray:
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    return Interpolator(cfg).run(quad, t).frame


def interpolate_multi(quad: FrameQuad, cfg: PipelineConfig) -> list[np.ndarray]:
    return [r.frame for r in Interpolator(cfg).run_multi(quad)]


def _onoff(value: str) -> bool:
    v = value.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {value!r}")


def load_config(path) -> PipelineConfig:
    """Read a ``key = value`` config with ``[flow]``, ``[motion]``, ``[refine]``,
    ``[rcsn]``, ``[fusion]`` and ``[pipeline]`` sections.

    Relative paths resolve against the config file's directory.
    """
    path = Path(path)
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"config not found: {path}")
    base = path.parent

    def rel(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    kwargs: dict = {}
    if cp.has_section("flow"):
        s = cp["flow"]
        kind = s.get("source", "blockmatch").strip().lower()
        if kind == "blockmatch":
            kwargs["flow_source"] = BlockMatch(s.getint("levels", 3), s.getint("radius", 2), s.getint("patch", 5))
        elif kind == "precomputed":
            kwargs["flow_source"] = Precomputed(rel(s["pattern"]))
        else:
            raise ValueError(f"unsupported flow source {kind!r} in config")
    if cp.has_section("motion"):
        s = cp["motion"]
        kwargs["rqfp"] = _onoff(s.get("rqfp", "on"))
        kwargs["linear"] = _onoff(s.get("linear", "off"))
        kwargs["rqfp_params"] = motion.RQFPParams(s.getfloat("omega", 5.0), s.getfloat("gamma", 1.0))
    if cp.has_section("refine"):
        kwargs["refine"] = _onoff(cp["refine"].get("enabled", "on"))
    if cp.has_section("rcsn"):
        w = cp["rcsn"].get("weights", "off").strip()
        kwargs["rcsn"] = None if w.lower() == "off" else rel(w)
    if cp.has_section("fusion"):
        s = cp["fusion"]
        kind = s.get("predictor", "off").strip().lower()
        if kind == "constant":
            kwargs["ms_fusion"] = ConstantMask(s.getfloat("value", 1.0))
        elif kind == "warperror":
            kwargs["ms_fusion"] = WarpErrorMask()
        elif kind == "net":
            kwargs["ms_fusion"] = NetMask(ConvSpec(load_layers(rel(s["weights"]))))
        elif kind != "off":
            raise ValueError(f"unknown fusion predictor {kind!r}")
    if cp.has_section("pipeline") and "t_values" in cp["pipeline"]:
        kwargs["t_values"] = tuple(float(x) for x in cp["pipeline"]["t_values"].replace(",", " ").split())
    return PipelineConfig(**kwargs)


def with_factor(cfg: PipelineConfig, factor: int) -> PipelineConfig:
    """Copy of ``cfg`` whose ``t_values`` split each interval into ``factor`` steps."""
    if factor < 2:
        raise ValueError("factor must be >= 2")
    return replace(cfg, t_values=tuple(k / factor for k in range(1, factor)))
