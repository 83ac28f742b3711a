"""Self-check routines: the reward/policy-gradient equivalence suite and the
score-variance curve setup used by the diagnose command."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import MlpArch, RngStream, random_params
from .schedule import coeffs
from .teacher import GmmSpec, noisy_logdensity_score
from .nets import AdamState, NetState, fake_score
from .policy import TransitionBatch, dmd_gradient_oracle, policy_grad_rdm
from .rewards import rdm_exact, score_difference


@dataclass
class EquivalenceCase:
    dim: int
    t_index: int
    rel_err: float


def _random_gmm(stream: RngStream, d: int, k: int = 3) -> GmmSpec:
    w = stream.uniform(0.5, 1.5, k)
    w = w / w.sum()
    means = stream.normal((k, d)) * 2.0
    variances = stream.uniform(0.1, 1.0, k)
    return GmmSpec(w, means, variances)


def equivalence_suite(n_instances: int = 32, dims=(1, 2, 8),
                      seed: int = 0, grid_times=(1.0, 0.75, 0.5, 0.25, 0.0),
                      ) -> list[EquivalenceCase]:
    """Check that the score-function estimator driven by the exact
    per-dimension reward reproduces the negated direct distillation gradient.

    For each random instance (teacher mixture, student and fake networks,
    state, transition noise, diffused level) the two gradients are compared
    elementwise; rel_err is max |a + b| / (|a| + |b| + 1e-12) over parameters,
    where a is the policy gradient and b the distillation-loss gradient.
    """
    cases = []
    root = RngStream(seed)
    for i in range(n_instances):
        for d in dims:
            s = root.child("equiv", i, d)
            spec = _random_gmm(s.child("gmm"), d)
            arch = MlpArch(d, 1, 16, 2)
            student = random_params(arch, s.child("student"), 0.3)
            fake_params = random_params(arch, s.child("fake"), 0.3)
            fake = NetState(fake_params, AdamState.zeros_like(fake_params))
            for t_idx in range(len(grid_times) - 1):
                t, t_next = grid_times[t_idx], grid_times[t_idx + 1]
                if t_next <= 0.0:
                    continue  # deterministic step carries no density
                sc = coeffs(t_next)
                x_t = s.normal((1, d)) * 1.5
                eps_x = s.normal((1, d))
                tprime = float(s.uniform(0.1, 0.9))
                fnoise = s.normal((1, d))

                # shared randomness: the transition outcome and diffused sample
                from .numerics import mlp_forward_batch
                pred = mlp_forward_batch(student, x_t, t, 0)
                mu = sc.alpha * pred
                x_next = mu + sc.sigma * eps_x
                ap, sp = 1.0 - tprime, tprime
                x_tp = ap * pred + sp * fnoise
                r_s = score_difference(noisy_logdensity_score(spec, x_tp, tprime),
                                       fake_score(fake, x_tp, tprime))
                r_dm, degenerate = rdm_exact(r_s, x_next, mu, sc)
                assert not degenerate.any()

                batch = TransitionBatch(x_t, np.array([t]), np.array([0]),
                                        x_next, np.array([t_next]))
                pg = policy_grad_rdm(student, batch, r_dm)
                oracle = dmd_gradient_oracle(student, spec, fake, x_t,
                                             np.array([t]), 0, tprime, fnoise)
                worst = 0.0
                for a, b in zip(pg.grads.flat(), oracle.flat()):
                    err = np.abs(a + b) / (np.abs(a) + np.abs(b) + 1e-12)
                    worst = max(worst, float(err.max()))
                cases.append(EquivalenceCase(d, t_idx, worst))
    return cases
