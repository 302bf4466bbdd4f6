"""Coarse-to-fine block matching on a shifted texture."""
import numpy as np
from scipy import ndimage

from eqvi import BlockMatch, estimate_flow

rng = np.random.default_rng(0)
tex = ndimage.gaussian_filter(rng.random((64, 64, 3)), sigma=(1, 1, 0))
tex = (tex - tex.min()) / np.ptp(tex)

for shift in [(0, 0), (3, 0), (-4, 2), (6, -6)]:
    moved = np.roll(tex, shift[::-1], axis=(0, 1))
    flow = estimate_flow(BlockMatch(levels=3, radius=2, patch=5), tex, moved)
    inner = flow[10:-10, 10:-10]
    err = np.hypot(inner[..., 0] - shift[0], inner[..., 1] - shift[1]).mean()
    print(f"shift {shift}: mean flow {inner.reshape(-1, 2).mean(0).round(3)}, EPE {err:.3f}")
