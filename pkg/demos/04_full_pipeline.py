"""Interpolate the middle frame of a synthetic quad three ways."""
from eqvi import (
    Analytic, ConstantMask, FrameQuad, PipelineConfig, RCSNWeights, WarpErrorMask,
    interpolate_one, psnr, random_scene, render_at,
)

scene = random_scene(seed=11, motion_class="quadratic", n_sprites=2)
quad = FrameQuad(tuple(render_at(scene, t) for t in (-1, 0, 1, 2)))
gt = render_at(scene, 0.5)
src = Analytic(scene)

configs = {
    "linear": PipelineConfig(flow_source=src, linear=True),
    "quadratic": PipelineConfig(flow_source=src),
    "quadratic + two-scale": PipelineConfig(flow_source=src, ms_fusion=WarpErrorMask()),
    "constant M=1": PipelineConfig(flow_source=src, ms_fusion=ConstantMask(1.0)),
    # untrained residual net: small random residuals, so expect a small loss, not a gain
    "quadratic + rcsn": PipelineConfig(flow_source=src, rcsn=RCSNWeights.seeded(0)),
}
for name, cfg in configs.items():
    print(f"{name:<24} {psnr(interpolate_one(quad, 0.5, cfg), gt):6.2f} dB")

# block matching instead of exact flows
print(f"{'block matching':<24} {psnr(interpolate_one(quad, 0.5, PipelineConfig()), gt):6.2f} dB")
