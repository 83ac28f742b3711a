"""Guidance-term spread versus diffusion level.

When the fake score is off by a smooth bounded field, re-noising the same
clean points with more forward-diffusion noise explores more of the mismatch:
the per-coordinate std of the score difference grows with t'. This is the
property that motivates normalizing rewards within groups that share t'.

Run:  python3 demos/03_variance_curve.py
"""
import numpy as np

from dmreward import (RngStream, gmm_sample, noisy_logdensity_score,
                      ring_spec, rs_variance_curve)
from dmreward.harness.svg import emit_plot

spec = ring_spec()
stream = RngStream(0)
x0 = gmm_sample(spec, stream.child("x0"), 64)


def perturbed_fake(x, tp):
    return noisy_logdensity_score(spec, x, tp) + 0.5 * np.sin(x)


curve = rs_variance_curve(spec, perturbed_fake, x0,
                          [0.1, 0.3, 0.5, 0.7, 0.9], 512, stream.child("rs"))
print("t'    mean per-coordinate std of the score difference")
for tp, s in curve:
    bar = "#" * int(60 * s / max(v for _, v in curve))
    print(f"{tp:.1f}   {s:.4f}  {bar}")

emit_plot({"std of score difference": curve}, "variance_curve.svg",
          "Guidance spread vs diffusion level", "t'", "std")
print("wrote variance_curve.svg")
