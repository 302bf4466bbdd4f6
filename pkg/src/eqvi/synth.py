"""Analytic sprite scenes: rendered frames and exact flows at any time.

A sprite's top-left corner follows
``p(t) = p0 + v*t + a*t**2/2 + jerk*t**3/6`` with ``t`` in frames. Scenes
are validated on construction: every sprite stays inside the canvas and
sprites keep a one-pixel gap for ``t`` in ``[-1, 2]``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import sample_bilinear, write_png

T_MIN, T_MAX = -1.0, 2.0
QUAD_TIMES = (-1.0, 0.0, 1.0, 2.0)
GT_TIMES = (0.25, 0.5, 0.75)
MOTION_CLASSES = ("linear", "quadratic", "jerk")
_CHECK_TIMES = np.linspace(T_MIN, T_MAX, 301)


def format_time(t: float) -> str:
    """Compact time label used in file names: -1, 0, 0.25 ..."""
    return f"{float(t):g}"


@functools.lru_cache(maxsize=256)
def _texture(seed: int, size: int, channels: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((size, size, channels))
    tex = ndimage.gaussian_filter(noise, sigma=(1.5, 1.5, 0), mode="wrap")
    tex = 0.5 + 0.2 * (tex - tex.mean()) / tex.std()
    tex = np.clip(tex, 0.02, 0.98)
    tex.setflags(write=False)
    return tex


@dataclass(frozen=True)
class Sprite:
    p0: tuple[float, float]
    v: tuple[float, float] = (0.0, 0.0)
    a: tuple[float, float] = (0.0, 0.0)
    jerk: tuple[float, float] = (0.0, 0.0)
    size: int = 12
    texture_seed: int = 0

    def position(self, t: float) -> np.ndarray:
        """Top-left corner ``(x, y)`` at time ``t``."""
        p0, v, a, j = (np.asarray(q, dtype=np.float64) for q in (self.p0, self.v, self.a, self.jerk))
        return p0 + v * t + a * (t * t / 2.0) + j * (t * t * t / 6.0)

    def texture(self, channels: int) -> np.ndarray:
        return _texture(self.texture_seed, self.size, channels)


@dataclass(frozen=True)
class SpriteScene:
    height: int
    width: int
    sprites: tuple[Sprite, ...] = ()
    background: float = 0.5
    background_seed: int | None = None
    channels: int = 3
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sprites", tuple(self.sprites))
        for s in self.sprites:
            for t in _CHECK_TIMES:
                if not self._inside(s, t):
                    raise ValueError(f"sprite {s} leaves the {self.width}x{self.height} canvas at t={t:.3f}")
        for i, s in enumerate(self.sprites):
            for other in self.sprites[i + 1:]:
                for t in _CHECK_TIMES:
                    if _overlap(s, other, t):
                        raise ValueError(f"sprites overlap at t={t:.3f}")

    def _inside(self, s: Sprite, t: float) -> bool:
        x, y = s.position(t)
        return x >= 0 and y >= 0 and x + s.size <= self.width and y + s.size <= self.height

    def background_image(self) -> np.ndarray:
        shape = (self.height, self.width, self.channels)
        if self.background_seed is None:
            return np.full(shape, float(self.background))
        rng = np.random.default_rng(self.background_seed)
        img = ndimage.gaussian_filter(rng.standard_normal(shape), sigma=(2.0, 2.0, 0), mode="wrap")
        return np.clip(self.background + 0.15 * img / img.std(), 0.0, 1.0)


def _overlap(s1: Sprite, s2: Sprite, t: float, gap: float = 1.0) -> bool:
    p1, p2 = s1.position(t), s2.position(t)
    return bool(np.all(p1 - gap < p2 + s2.size) and np.all(p2 - gap < p1 + s1.size))


def _sprite_layer(scene: SpriteScene, sprite: Sprite, t: float):
    """Premultiplied colour and coverage of one sprite over its bounding box."""
    if not scene._inside(sprite, t):
        raise ValueError(f"sprite leaves the canvas at t={t}")
    px, py = sprite.position(t)
    s = sprite.size
    x_lo, y_lo = max(int(np.floor(px)) - 1, 0), max(int(np.floor(py)) - 1, 0)
    x_hi, y_hi = min(int(np.ceil(px)) + s + 1, scene.width), min(int(np.ceil(py)) + s + 1, scene.height)
    ys, xs = np.mgrid[y_lo:y_hi, x_lo:x_hi].astype(np.float64)
    # one-pixel zero border so clamped sampling fades to nothing outside the sprite
    rgba = np.zeros((s + 2, s + 2, scene.channels + 1))
    rgba[1:-1, 1:-1, :-1] = sprite.texture(scene.channels)
    rgba[1:-1, 1:-1, -1] = 1.0
    sampled = sample_bilinear(rgba, xs - px + 1.0, ys - py + 1.0)
    box = (slice(y_lo, y_hi), slice(x_lo, x_hi))
    return box, sampled[..., :-1], sampled[..., -1]


def render_at(scene: SpriteScene, t: float) -> np.ndarray:
    """Composite every sprite over the background at time ``t``."""
    img = scene.background_image()
    for sprite in scene.sprites:
        box, color, alpha = _sprite_layer(scene, sprite, t)
        img[box] = color + (1.0 - alpha[..., None]) * img[box]
    return img


def sprite_mask(scene: SpriteScene, t: float, erode: int = 0) -> np.ndarray:
    """Boolean map of pixels covered (alpha >= 0.5) by any sprite at ``t``."""
    mask = np.zeros((scene.height, scene.width), dtype=bool)
    for sprite in scene.sprites:
        box, _, alpha = _sprite_layer(scene, sprite, t)
        mask[box] |= alpha >= 0.5
    if erode:
        mask = ndimage.binary_erosion(mask, iterations=erode)
    return mask


def analytic_flow(scene: SpriteScene, t0: float, t1: float) -> np.ndarray:
    """Exact flow from time ``t0`` to ``t1``: sprite displacement on sprite pixels, zero elsewhere."""
    flow = np.zeros((scene.height, scene.width, 2))
    if t0 == t1:
        return flow
    for sprite in scene.sprites:
        box, _, alpha = _sprite_layer(scene, sprite, t0)
        region = flow[box]
        region[alpha >= 0.5] = sprite.position(t1) - sprite.position(t0)
    return flow


def random_scene(
    seed: int,
    motion_class: str = "quadratic",
    height: int = 96,
    width: int = 96,
    n_sprites: int = 1,
    channels: int = 3,
    background: float = 0.5,
    noisy_background: bool = False,
    max_tries: int = 1000,
) -> SpriteScene:
    """Draw a valid scene of the given motion class.

    ``quadratic`` sprites get accelerations of magnitude 4 to 10 px/frame^2;
    ``jerk`` sprites get a jerk whose components share the sign of the
    acceleration and exceed 7 in magnitude, which puts the two-pair
    acceleration mismatch ``|jerk| / 3`` above 2 on both axes.
    """
    if motion_class not in MOTION_CLASSES:
        raise ValueError(f"unknown motion class {motion_class!r}")
    rng = np.random.default_rng(seed)
    sprites: list[Sprite] = []
    times = _CHECK_TIMES
    for _ in range(max_tries):
        if len(sprites) == n_sprites:
            break
        size = int(rng.integers(10, 17))
        v = rng.uniform(-3.0, 3.0, 2)
        a = np.zeros(2)
        j = np.zeros(2)
        if motion_class == "quadratic":
            mag, ang = rng.uniform(4.0, 10.0), rng.uniform(0.0, 2 * np.pi)
            a = mag * np.array([np.cos(ang), np.sin(ang)])
        elif motion_class == "jerk":
            a = rng.choice([-1.0, 1.0], 2) * rng.uniform(1.0, 3.0, 2)
            j = np.sign(a) * rng.uniform(7.0, 10.0, 2)
        offs = v[:, None] * times + a[:, None] * times**2 / 2 + j[:, None] * times**3 / 6
        lo, hi = offs.min(axis=1), offs.max(axis=1)
        room = np.array([width, height]) - size - (hi - lo)
        if np.any(room <= 0.5):
            continue
        p0 = -lo + rng.uniform(0.25, room - 0.25)
        cand = Sprite(
            p0=tuple(float(q) for q in p0),
            v=tuple(float(q) for q in v),
            a=tuple(float(q) for q in a),
            jerk=tuple(float(q) for q in j),
            size=size,
            texture_seed=int(rng.integers(2**31)),
        )
        if any(_overlap(cand, s, t) for s in sprites for t in times):
            continue
        sprites.append(cand)
    if len(sprites) < n_sprites:
        raise ValueError(f"could not place {n_sprites} sprites on a {width}x{height} canvas")
    bg_seed = int(rng.integers(2**31)) if noisy_background else None
    return SpriteScene(height, width, tuple(sprites), background, bg_seed, channels,
                       meta={"seed": seed, "class": motion_class})


def scene_manifest(scene: SpriteScene) -> list[str]:
    lines = [f"{k}={v}" for k, v in scene.meta.items()]
    lines += [
        f"height={scene.height}",
        f"width={scene.width}",
        f"channels={scene.channels}",
        f"background={scene.background!r}",
        f"background_seed={scene.background_seed}",
        f"n_sprites={len(scene.sprites)}",
    ]
    for i, s in enumerate(scene.sprites):
        for name in ("p0", "v", "a", "jerk"):
            x, y = getattr(s, name)
            lines.append(f"sprite{i}.{name}={x!r},{y!r}")
        lines.append(f"sprite{i}.size={s.size}")
        lines.append(f"sprite{i}.texture_seed={s.texture_seed}")
    return lines


def dataset_flow_pairs() -> list[tuple[float, float]]:
    pairs = [(0.0, -1.0), (0.0, 1.0), (0.0, 2.0), (1.0, 2.0), (1.0, 0.0), (1.0, -1.0)]
    pairs += [(anchor, t) for anchor in (0.0, 1.0) for t in GT_TIMES]
    return pairs


def gen_dataset(out_dir, seed: int, motion_class: str, count: int, **scene_kwargs) -> list[Path]:
    """Write ``count`` sequences under ``out_dir`` and return their directories.

    Each ``seq_%04d`` directory holds the four input frames, the ground-truth
    intermediate frames, exact ``.flo`` flows and a ``manifest.txt``.
    """
    from .flow_estimation import save_flo

    if count < 1:
        raise ValueError("count must be at least 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seq_dirs = []
    seeds = np.random.SeedSequence(seed).generate_state(count)
    for i in range(count):
        scene = random_scene(int(seeds[i]), motion_class, **scene_kwargs)
        seq = out / f"seq_{i:04d}"
        seq.mkdir(exist_ok=True)
        for t in QUAD_TIMES:
            write_png(seq / f"frame_t{format_time(t)}.png", render_at(scene, t))
        for t in GT_TIMES:
            write_png(seq / f"gt_t{format_time(t)}.png", render_at(scene, t))
        for t0, t1 in dataset_flow_pairs():
            save_flo(seq / f"flow_{format_time(t0)}_{format_time(t1)}.flo", analytic_flow(scene, t0, t1))
        (seq / "manifest.txt").write_text("\n".join(scene_manifest(scene)) + "\n")
        seq_dirs.append(seq)
    (out / "manifest.txt").write_text(f"seed={seed}\nclass={motion_class}\ncount={count}\n")
    return seq_dirs
