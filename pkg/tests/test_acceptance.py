"""Exit criteria. Each test prints one PASS/FAIL line in the terminal summary."""
import contextlib
import filecmp
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from eqvi.core import build_laplacian_pyramid, reconstruct_laplacian_pyramid
from eqvi.flow_estimation import Analytic, BlockMatch, estimate_flow, load_flo, save_flo
from eqvi.flow_ops import backward_warp, reverse_flow
from eqvi.fusion import ConstantMask, fuse
from eqvi.metrics import combined_loss, epe, l1_loss, lap_loss, psnr, ssim
from eqvi.motion import (
    RQFPParams,
    accel_triplet,
    alpha_weight,
    direction_gate,
    linear_predict,
    ls_predict,
    qvi_predict,
    rectified_predict,
)
from eqvi.pipeline import FrameQuad, Interpolator, PipelineConfig, interpolate_one
from eqvi.synth import analytic_flow, random_scene, render_at, sprite_mask
from eqvi.synthesis import RCSN_IN_CHANNELS, RCSNWeights, conv2d, default_rcsn_net, rcsn_forward

from conftest import ACCEPTANCE_KEY, smooth_texture
from test_synthesis import conv_oracle

pytestmark = pytest.mark.acceptance

DESIGN = np.array([[-1.0, 0.5], [1.0, 0.5], [2.0, 2.0]])


@pytest.fixture
def criterion(request):
    @contextlib.contextmanager
    def run(number, text, limit_s):
        start = time.perf_counter()
        ok = False
        try:
            yield
            elapsed = time.perf_counter() - start
            assert elapsed < limit_s, f"took {elapsed:.2f}s, limit {limit_s}s"
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            tag = "PASS" if ok else "FAIL"
            line = f"[{tag}] criterion {number}: {text} ({elapsed:.2f}s / {limit_s}s)"
            request.config.stash[ACCEPTANCE_KEY].append((number, line))
            print(line)

    return run


def scene_quad(scene):
    return FrameQuad(tuple(render_at(scene, t) for t in (-1, 0, 1, 2)))


def test_c1_rqfp_exactness(criterion):
    with criterion(1, "least-squares recovers (v, a); closed form matches pseudo-inverse", 5):
        rng = np.random.default_rng(2020)
        v = rng.uniform(-20, 20, (1000, 2))
        a = rng.uniform(-20, 20, (1000, 2))
        fs = [(-v + a / 2)[:, None], (v + a / 2)[:, None], (2 * v + 2 * a)[:, None]]
        m = ls_predict(*fs)
        assert np.abs(m.v0[:, 0] - v).max() < 1e-5
        assert np.abs(m.a[:, 0] - a).max() < 1e-5
        pinv = np.linalg.pinv(DESIGN)
        rand = [rng.normal(scale=10, size=(1000, 1, 2)) for _ in range(3)]
        x = np.stack(rand, axis=-1) @ pinv.T
        m = ls_predict(*rand)
        assert np.abs(m.v0 - x[..., 0]).max() < 1e-9
        assert np.abs(m.a - x[..., 1]).max() < 1e-9


def test_c2_gate_and_weight(criterion):
    with criterion(2, "alpha(gamma)=0.5, alpha decreasing, jerk -> QVI, gated pixels bitwise QVI", 5):
        p = RQFPParams()
        assert alpha_weight(p.gamma, p) == 0.5
        grid = alpha_weight(np.linspace(0, 5, 10_000), p)
        assert np.all(np.diff(grid) < 0)
        for seed in range(10):
            scene = random_scene(seed, "jerk", n_sprites=2)
            mask = sprite_mask(scene, 0)
            fs = [analytic_flow(scene, 0, t) for t in (-1, 1, 2)]
            trip = accel_triplet(*fs)
            assert np.all(np.abs(trip.a1 - trip.a2)[mask] > 2)
            m, q = rectified_predict(*fs, p), qvi_predict(fs[1], fs[0])
            assert np.abs(m.v0 - q.v0)[mask].max() < 1e-4
            assert np.abs(m.a - q.a)[mask].max() < 1e-4
        rng = np.random.default_rng(5)
        fs = [rng.normal(scale=4, size=(64, 64, 2)) for _ in range(3)]
        closed = ~direction_gate(accel_triplet(*fs))
        m, q = rectified_predict(*fs, p), qvi_predict(fs[1], fs[0])
        assert closed.sum() > 100
        assert np.array_equal(m.v0[closed], q.v0[closed]) and np.array_equal(m.a[closed], q.a[closed])


def test_c3_motion_model_ordering(criterion):
    with criterion(3, "quadratic beats linear on >=49/50 scenes; linear EPE = |a|t(1-t)/2; quadratic EPE < 0.05", 120):
        t = 0.5
        wins = 0
        for seed in range(50):
            scene = random_scene(10_000 + seed, "quadratic")
            src = Analytic(scene)
            quad, gt = scene_quad(scene), render_at(scene, t)
            q_interp = Interpolator(PipelineConfig(flow_source=src))
            l_interp = Interpolator(PipelineConfig(flow_source=src, linear=True))
            q_psnr = psnr(q_interp.run(quad, t).frame, gt)
            l_psnr = psnr(l_interp.run(quad, t).frame, gt)
            wins += q_psnr > l_psnr

            mask = sprite_mask(scene, 0)
            true_f = analytic_flow(scene, 0, t)[mask]
            flows = q_interp.estimate_flows(quad)
            q_f0t, _ = q_interp.intermediate_flows(flows, t)
            l_f0t = linear_predict(analytic_flow(scene, 0, 1), t)
            (sprite,) = scene.sprites
            expected = np.hypot(*sprite.a) * t * (1 - t) / 2
            lin_epe = epe(l_f0t[mask][None], true_f[None])
            assert abs(lin_epe - expected) <= 0.05 * expected, (seed, lin_epe, expected)
            assert epe(q_f0t[mask][None], true_f[None]) < 0.05
        print(f"quadratic wins {wins}/50")
        assert wins >= 49


def test_c4_flow_ops(criterion):
    with criterion(4, "reverse of constant flow, zero-flow warp identity, warp/render consistency", 30):
        for c in [(2, 0), (-3, 1), (0.5, -1.5), (1.25, 2.75)]:
            f = np.zeros((32, 32, 2))
            f[..., 0], f[..., 1] = c
            back, _ = reverse_flow(f)
            assert np.abs(back[6:-6, 6:-6] + np.array(c)).max() < 1e-4
        img = smooth_texture(1)
        assert np.array_equal(backward_warp(img, np.zeros((64, 64, 2))), img)
        for seed in range(10):
            scene = random_scene(seed, ("linear", "quadratic", "jerk")[seed % 3], n_sprites=2)
            for t0, t1 in ((0, 1), (0, -1), (1, 2), (0, 0.5)):
                mask = sprite_mask(scene, t0, erode=2)
                warped = backward_warp(render_at(scene, t1), analytic_flow(scene, t0, t1))
                assert np.abs(warped - render_at(scene, t0))[mask].mean() < 0.02


def test_c5_metric_oracles(criterion):
    with criterion(5, "PSNR 20 dB, SSIM(x,x)=1, lap(x,x)=0, combined=l1+10lap, pyramid error < 1e-5", 10):
        rng = np.random.default_rng(11)
        x = rng.random((64, 64, 3)) * 0.9
        assert abs(psnr(x, x + 0.1) - 20.0) <= 1e-6
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)
        assert lap_loss(x, x) == 0.0
        y = rng.random((64, 64, 3))
        assert combined_loss(x, y) == l1_loss(x, y) + 10 * lap_loss(x, y)
        for n in range(1, 7):
            img = rng.random((64 + n, 70 - n, 3))
            rec = reconstruct_laplacian_pyramid(build_laplacian_pyramid(img, n))
            assert np.abs(rec - img).max() < 1e-5


def test_c6_convolution(criterion):
    with criterion(6, "conv2d matches nested loops on 20 shapes; zero RCSN identity; 146 channels enforced", 30):
        r = np.random.default_rng(6)
        for _ in range(20):
            k = int(r.choice([1, 3, 5, 7]))
            stride, pad = int(r.integers(1, 3)), int(r.integers(0, k // 2 + 1))
            h, w = int(r.integers(k, 12)), int(r.integers(k, 12))
            cin, cout = int(r.integers(1, 5)), int(r.integers(1, 5))
            x = r.normal(size=(h, w, cin))
            wt = r.normal(size=(cout, cin, k, k)).astype(np.float32)
            b = r.normal(size=cout).astype(np.float32)
            assert np.abs(conv2d(x, wt, b, stride, pad) - conv_oracle(x, wt, b, stride, pad)).max() < 1e-5
        parts = [r.random((16, 16, c)) for c in (3, 3, 6, 6, 64, 64)]
        blended = 0.5 * (parts[0] + parts[1])
        assert np.array_equal(rcsn_forward(blended, *parts, default_rcsn_net(seed=None)), blended)
        assert RCSN_IN_CHANNELS == 146
        with pytest.raises(ValueError):
            rcsn_forward(blended, *parts[:-1], parts[-1][..., :63], default_rcsn_net(seed=None))


def test_c7_fusion(criterion):
    with criterion(7, "fusion envelope, Constant(1.0) two-scale == single-scale, M=0/M=1 endpoints", 30):
        r = np.random.default_rng(7)
        a, b = r.random((32, 32, 3)), r.random((32, 32, 3))
        for _ in range(20):
            out = fuse(r.random((32, 32, 1)), a, b)
            assert np.all(out >= np.minimum(a, b) - 1e-15) and np.all(out <= np.maximum(a, b) + 1e-15)
        assert np.array_equal(fuse(np.ones((32, 32, 1)), a, b), a)
        assert np.array_equal(fuse(np.zeros((32, 32, 1)), a, b), b)
        scene = random_scene(77, "quadratic", n_sprites=2)
        quad, src = scene_quad(scene), Analytic(scene)
        single = interpolate_one(quad, 0.5, PipelineConfig(flow_source=src))
        two = interpolate_one(quad, 0.5, PipelineConfig(flow_source=src, ms_fusion=ConstantMask(1.0)))
        assert single.tobytes() == two.tobytes()


def test_c8_block_matching(criterion):
    with criterion(8, "block-matching EPE < 0.5 for integer shifts up to 6px, 3 levels", 60):
        src = BlockMatch(levels=3, radius=2, patch=5)
        for seed in range(3):
            tex = smooth_texture(100 + seed)
            for dx in range(-6, 7, 2):
                for dy in (-6, 0, 3, 6):
                    Ib = np.roll(tex, (dy, dx), axis=(0, 1))
                    f = estimate_flow(src, tex, Ib)
                    inner = f[10:-10, 10:-10]
                    err = np.hypot(inner[..., 0] - dx, inner[..., 1] - dy).mean()
                    assert err < 0.5, (seed, dx, dy, err)


def _run_cli(args, threads):
    env = dict(os.environ)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = str(threads)
    subprocess.run([sys.executable, "-m", "eqvi.cli", *args], check=True, env=env, capture_output=True)


def _same_tree(a: Path, b: Path) -> bool:
    names_a = sorted(p.name for p in a.iterdir())
    names_b = sorted(p.name for p in b.iterdir())
    if names_a != names_b:
        return False
    match, mismatch, errors = filecmp.cmpfiles(a, b, names_a, shallow=False)
    return not mismatch and not errors


def test_c9_determinism_and_io(criterion, tmp_path):
    with criterion(9, "CLI byte-identical across runs and thread counts; .flo bit-exact; eval 99 dB cap", 120):
        data = tmp_path / "data"
        _run_cli(["synth", str(data), "--class", "quadratic", "--count", "1", "--seed", "9",
                  "--height", "64", "--width", "64", "--sprites", "2"], 1)
        RCSNWeights.seeded(3).save(tmp_path / "w.bin")
        cfg = tmp_path / "cfg.ini"
        cfg.write_text("[rcsn]\nweights = w.bin\n[fusion]\npredictor = warperror\n")
        seq = data / "seq_0000"
        outs = []
        for run, (threads, workers) in enumerate([(1, 1), (1, 1), (4, 4)]):
            out = tmp_path / f"out{run}"
            _run_cli(["interpolate", str(seq), str(out), "--factor", "4", "--pattern", "frame_t*.png",
                      "--config", str(cfg), "--workers", str(workers)], threads)
            outs.append(out)
        assert len(list(outs[0].glob("*.png"))) == 4 + 3 * 3
        assert _same_tree(outs[0], outs[1])
        assert _same_tree(outs[0], outs[2])

        rng = np.random.default_rng(9)
        for shape in ((1, 1), (7, 5), (64, 64)):
            flow = rng.normal(scale=30, size=shape + (2,)).astype(np.float32)
            save_flo(tmp_path / "f.flo", flow)
            assert load_flo(tmp_path / "f.flo").tobytes() == flow.tobytes()

        report = tmp_path / "report.txt"
        _run_cli(["eval", str(seq), str(seq), "--out", str(report)], 1)
        kv = dict(line.split("=", 1) for line in report.read_text().splitlines())
        assert float(kv["aggregate.psnr"]) == 99.0
