"""Metrics and losses on a pair of frames."""
import numpy as np

from eqvi import evaluate, psnr, ssim
from eqvi.core import build_laplacian_pyramid, reconstruct_laplacian_pyramid

rng = np.random.default_rng(1)
x = rng.random((64, 64, 3)) * 0.9

print("PSNR of a 0.1 offset:", psnr(x, x + 0.1))
print("SSIM(x, x):", ssim(x, x))
print("identical frames:", psnr(x, x), "dB (capped)")

pyr = build_laplacian_pyramid(x, 4)
print("pyramid shapes:", [p.shape for p in pyr])
print("reconstruction error:", np.abs(reconstruct_laplacian_pyramid(pyr) - x).max())

noisy = np.clip(x + rng.normal(scale=0.05, size=x.shape), 0, 1)
for line in evaluate(noisy, x).as_lines():
    print(line)
