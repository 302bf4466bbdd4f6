import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from eqvi.metrics import (
    MetricReport,
    aggregate,
    combined_loss,
    epe,
    evaluate,
    format_kv,
    format_table,
    l1_loss,
    lap_loss,
    psnr,
    ssim,
)


def test_psnr_values(rng):
    a = rng.random((8, 8, 3)) * 0.8
    assert psnr(a, a) == 99.0
    assert abs(psnr(a, a + 0.1) - 20.0) < 1e-6
    assert psnr(np.zeros((4, 4, 1)), np.ones((4, 4, 1))) == 0.0
    b = rng.random((8, 8, 3))
    assert psnr(a, b) == psnr(b, a)
    assert psnr(a, a + 0.05) > psnr(a, a + 0.1) > psnr(a, a + 0.2)
    with pytest.raises(ValueError):
        psnr(a, a[:4])


def test_ssim_identity_and_symmetry(rng):
    a, b = rng.random((20, 24, 3)), rng.random((20, 24, 3))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_constant_images():
    c1, c2 = 0.01**2, 0.03**2
    mx, my = 0.5, 0.6
    expected = (2 * mx * my + c1) / (mx**2 + my**2 + c1) * (c2 / c2)
    assert ssim(np.full((16, 16, 3), mx), np.full((16, 16, 3), my)) == pytest.approx(expected, abs=1e-12)


def test_ssim_matches_skimage(rng):
    a = rng.random((32, 40, 3))
    b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
    ref = structural_similarity(a, b, channel_axis=2, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False, data_range=1.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-6)


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 30, 1)), np.zeros((10, 30, 1)))


def test_losses(rng):
    a = rng.random((32, 32, 3)) * 0.8
    assert l1_loss(a, a) == lap_loss(a, a) == combined_loss(a, a) == 0.0
    assert l1_loss(a, a + 0.1) == pytest.approx(0.1, abs=1e-12)
    # a uniform offset only survives in the coarsest level, weighted by 2^(n-1)
    assert lap_loss(a, a + 0.1, n=5) == pytest.approx(16 * 0.1, abs=1e-9)
    assert lap_loss(a, a + 0.1, n=3) == pytest.approx(4 * 0.1, abs=1e-9)
    b = rng.random((32, 32, 3))
    assert combined_loss(a, b) == l1_loss(a, b) + 10 * lap_loss(a, b)
    assert lap_loss(a, b) > 1e-6
    with pytest.raises(ValueError):
        lap_loss(np.zeros((8, 8, 1)), np.zeros((8, 8, 1)), n=5)


def test_lap_loss_resolution_independent():
    small, big = np.zeros((16, 16, 1)), np.zeros((64, 64, 1))
    assert lap_loss(small, small + 0.2) == pytest.approx(lap_loss(big, big + 0.2), abs=1e-12)


def test_epe():
    f = np.random.default_rng(0).normal(size=(5, 5, 2))
    assert epe(f, f) == 0.0
    assert epe(f, f + [1, 0]) == pytest.approx(1.0)
    assert epe(f, f + [3, 4]) == pytest.approx(5.0)


def test_report_formatting(rng):
    a = rng.random((16, 16, 3))
    r1, r2 = evaluate(a, a), evaluate(a, np.clip(a + 0.1, 0, 1))
    agg = aggregate([r1, r2])
    assert agg.psnr == pytest.approx((r1.psnr + r2.psnr) / 2)
    assert r1.combined == r1.l1 + 10 * r1.lap
    table = format_table({"x.png": r1, "aggregate": agg})
    assert "aggregate" in table and "psnr" in table
    kv = format_kv({"aggregate": agg})
    assert "aggregate.psnr=" in kv and "epe" not in kv
    assert MetricReport(1, 1, 0, 0, 0, epe=0.5).as_lines()[-1] == "epe=0.5"
    assert math.isfinite(agg.ssim)
