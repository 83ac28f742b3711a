"""The distillation gradient as a policy gradient.

The per-dimension distillation reward is constructed so that the on-policy
score-function estimator reproduces the direct distillation gradient exactly
(not in expectation — per draw). This runs the randomized identity suite
across dimensions and prints the worst relative error.

Run:  python3 demos/02_gradient_equivalence.py
"""
from dmreward.diagnostics import equivalence_suite

cases = equivalence_suite(n_instances=32, dims=(1, 2, 8), seed=0)
worst = max(c.rel_err for c in cases)
print(f"{len(cases)} random (teacher, student, fake) instances")
for d in (1, 2, 8):
    errs = [c.rel_err for c in cases if c.dim == d]
    print(f"  d={d}: max rel err {max(errs):.3e} over {len(errs)} cases")
print(f"worst overall: {worst:.3e}  ({'OK' if worst < 1e-6 else 'BROKEN'})")
