"""Policy-gradient estimators for the student generator.

Four routes into the same parameters:

  * dmd_gradient_oracle   direct distillation gradient (score difference
                          contracted against the generator Jacobian),
  * policy_grad_rdm       score-function estimator driven by the per-dimension
                          distillation reward; with the exact reward it equals
                          the negated oracle on identical randomness,
  * grpo_surrogate        clipped importance-sampling surrogate over a group,
  * ddpo_full_trajectory  REINFORCE over whole trajectories with a scalar
                          terminal reward (plain and IS variants).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import MlpGrad, MlpParams, mlp_backward_batch, mlp_forward_batch
from .schedule import alpha_sigma, transition_logprob_per_dim
from .teacher import GmmSpec, noisy_logdensity_score
from .nets import NetState, fake_score


class PolicyError(ValueError):
    pass


@dataclass
class GrpoConfig:
    eta: float = 0.5          # clip range
    inner_updates: int = 1    # generator updates per sampling round
    group_size: int = 8
    ratio_mode: str = "dim"   # "dim" (per-dimension ratios) or "sample"

    def __post_init__(self):
        if self.eta <= 0.0:
            raise PolicyError("eta must be > 0")
        if self.inner_updates < 1 or self.group_size < 2:
            raise PolicyError("inner_updates >= 1 and group_size >= 2 required")
        if self.ratio_mode not in ("dim", "sample"):
            raise PolicyError(f"unknown ratio mode '{self.ratio_mode}'")


@dataclass
class PolicyGradEstimate:
    grads: MlpGrad
    value: float
    mean_ratio: float = 1.0
    clip_fraction: float = 0.0


@dataclass
class TransitionBatch:
    """One stochastic transition for n samples: state, timestep, outcome."""

    x_t: np.ndarray     # (n, d)
    t: np.ndarray       # (n,)
    c: np.ndarray       # (n,) condition ids
    x_next: np.ndarray  # (n, d)
    t_next: np.ndarray  # (n,)

    def __post_init__(self):
        self.x_t = np.atleast_2d(np.asarray(self.x_t, dtype=np.float64))
        n = self.x_t.shape[0]
        self.t = np.broadcast_to(np.asarray(self.t, dtype=np.float64), (n,))
        self.c = np.broadcast_to(np.asarray(self.c, dtype=np.int64), (n,))
        self.x_next = np.atleast_2d(np.asarray(self.x_next, dtype=np.float64))
        self.t_next = np.broadcast_to(np.asarray(self.t_next, dtype=np.float64), (n,))

    @property
    def n(self) -> int:
        return self.x_t.shape[0]

    def next_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        return alpha_sigma(self.t_next)


def _mu_and_logp(params: MlpParams, batch: TransitionBatch):
    """Transition mean and per-dim log-density under the given parameters."""
    alpha, sigma = batch.next_coeffs()
    pred = mlp_forward_batch(params, batch.x_t, batch.t, batch.c)
    mu = alpha[:, None] * pred
    logp = transition_logprob_per_dim(batch.x_next, mu, sigma[:, None])
    return pred, mu, logp, alpha, sigma


def dmd_gradient_oracle(student: MlpParams, spec: GmmSpec, fake: NetState,
                        x_t, t, c, tprime: float, noise) -> MlpGrad:
    """Direct distillation gradient, averaged over the batch.

    The student output is re-noised to level t' with the given noise; the
    score difference (analytic teacher minus fake-network score) is contracted
    against the generator Jacobian at x_t. Returns the gradient of the loss,
    i.e. the descent direction is minus this.
    """
    batch_x = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    n = batch_x.shape[0]
    pred = mlp_forward_batch(student, batch_x, t, c)
    alpha_p, sigma_p = alpha_sigma(tprime)
    x_tp = alpha_p * pred + sigma_p * np.asarray(noise, dtype=np.float64)
    r_s = noisy_logdensity_score(spec, x_tp, tprime) - fake_score(fake, x_tp, tprime, c)
    return mlp_backward_batch(student, batch_x, t, c, -r_s / n)


def policy_grad_rdm(student: MlpParams, batch: TransitionBatch,
                    r_dm: np.ndarray) -> PolicyGradEstimate:
    """On-policy score-function estimator with a per-dimension reward:

        grad of mean_i sum_k r_dm[i,k] logp_theta[i,k].

    The reward is a constant; only the log-density carries the parameter
    dependence, and its per-dim gradient is (x_next - mu) alpha / sigma^2
    times the generator Jacobian row.
    """
    r_dm = np.atleast_2d(np.asarray(r_dm, dtype=np.float64))
    if r_dm.shape != batch.x_next.shape:
        raise PolicyError("reward field shape mismatch")
    _, mu, logp, alpha, sigma = _mu_and_logp(student, batch)
    upstream = r_dm * (batch.x_next - mu) * (alpha / sigma ** 2)[:, None] / batch.n
    grads = mlp_backward_batch(student, batch.x_t, batch.t, batch.c, upstream)
    value = float(np.sum(r_dm * logp) / batch.n)
    return PolicyGradEstimate(grads, value)


def grpo_surrogate(student: MlpParams, theta_old: MlpParams, batch: TransitionBatch,
                   a_sum: np.ndarray, cfg: GrpoConfig) -> PolicyGradEstimate:
    """Clipped surrogate over one transition batch.

    value = mean over samples and dims of min(r A, clip(r, 1-eta, 1+eta) A),
    with the advantage a constant. Ratios are per dimension by default (so the
    distillation equivalence holds exactly at r = 1); "sample" mode forms one
    joint ratio per sample instead. Returns the gradient of the surrogate
    (ascent direction) plus ratio diagnostics.
    """
    a_sum = np.atleast_2d(np.asarray(a_sum, dtype=np.float64))
    if a_sum.shape != batch.x_next.shape:
        raise PolicyError("advantage shape mismatch")
    _, mu_new, logp_new, alpha, sigma = _mu_and_logp(student, batch)
    _, _, logp_old, _, _ = _mu_and_logp(theta_old, batch)
    n, d = a_sum.shape

    delta = logp_new - logp_old
    if cfg.ratio_mode == "sample":
        ratio = np.exp(delta.sum(axis=1, keepdims=True)) * np.ones((1, d))
    else:
        ratio = np.exp(delta)
    if not np.all(np.isfinite(ratio)):
        raise PolicyError("non-finite importance ratio")

    clipped = np.clip(ratio, 1.0 - cfg.eta, 1.0 + cfg.eta)
    arm_plain = ratio * a_sum
    arm_clip = clipped * a_sum
    value = float(np.minimum(arm_plain, arm_clip).mean())

    # gradient flows only through the unclipped arm when it attains the min
    active = arm_plain <= arm_clip
    coeff = np.where(active, a_sum * ratio, 0.0)
    dlogp = (batch.x_next - mu_new) * (alpha / sigma ** 2)[:, None]
    if cfg.ratio_mode == "sample":
        # d ratio/d theta = ratio * sum_k dlogp_k; coefficient sums over dims
        upstream = coeff.sum(axis=1, keepdims=True) * dlogp / (n * d)
    else:
        upstream = coeff * dlogp / (n * d)
    grads = mlp_backward_batch(student, batch.x_t, batch.t, batch.c, upstream)

    clip_frac = float(np.mean((ratio < 1.0 - cfg.eta) | (ratio > 1.0 + cfg.eta)))
    return PolicyGradEstimate(grads, value, float(ratio.mean()), clip_frac)


def score_function_grad(student: MlpParams, batch: TransitionBatch,
                        a_sum: np.ndarray) -> PolicyGradEstimate:
    """Plain REINFORCE-style gradient of mean over samples and dims of
    A[i,k] logp[i,k]; the r = 1 reduction of the surrogate."""
    a_sum = np.atleast_2d(np.asarray(a_sum, dtype=np.float64))
    _, mu, logp, alpha, sigma = _mu_and_logp(student, batch)
    n, d = a_sum.shape
    upstream = a_sum * (batch.x_next - mu) * (alpha / sigma ** 2)[:, None] / (n * d)
    grads = mlp_backward_batch(student, batch.x_t, batch.t, batch.c, upstream)
    return PolicyGradEstimate(grads, float(np.mean(a_sum * logp)))


def ddpo_full_trajectory(student: MlpParams, steps: list[TransitionBatch],
                         rewards: np.ndarray,
                         theta_old: MlpParams | None = None) -> PolicyGradEstimate:
    """REINFORCE over full trajectories with a per-sample terminal reward.

    Each element of `steps` holds one stochastic transition for all n
    trajectories; the gradient is mean_i r_i sum_t grad log p(x_{t-1}|x_t).
    With theta_old given, each step term is reweighted by the per-sample joint
    likelihood ratio (importance-sampling variant).
    """
    rewards = np.asarray(rewards, dtype=np.float64).reshape(-1)
    n = rewards.shape[0]
    grads = None
    value = 0.0
    ratios = []
    for batch in steps:
        if batch.n != n:
            raise PolicyError("trajectory count mismatch across steps")
        _, mu, logp, alpha, sigma = _mu_and_logp(student, batch)
        if theta_old is not None:
            _, _, logp_old, _, _ = _mu_and_logp(theta_old, batch)
            ratio = np.exp((logp - logp_old).sum(axis=1))
        else:
            ratio = np.ones(n)
        ratios.append(ratio)
        coeff = rewards * ratio  # (n,)
        upstream = coeff[:, None] * (batch.x_next - mu) * (alpha / sigma ** 2)[:, None] / n
        g = mlp_backward_batch(student, batch.x_t, batch.t, batch.c, upstream)
        if grads is None:
            grads = g
        else:
            grads.add_(g)
        value += float(np.sum(coeff[:, None] * logp) / n)
    if grads is None:
        raise PolicyError("no stochastic steps supplied")
    return PolicyGradEstimate(grads, value, float(np.mean(ratios)))
