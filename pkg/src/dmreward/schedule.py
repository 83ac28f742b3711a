"""Linear (rectified-flow) noise schedule, forward diffusion, the student's
stochastic transition kernel, and its per-dimension log-density.

The per-dimension log-density is the stored primitive: per-sample likelihood
ratios are sums over dimensions, and the per-dimension pairing of advantage
and score-function term is what makes the distillation-gradient identity hold
coordinate by coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleCoeffs:
    t: float
    alpha: float
    sigma: float


def coeffs(t: float) -> ScheduleCoeffs:
    """Linear schedule: alpha = 1 - t, sigma = t."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ScheduleError(f"t={t} outside [0, 1]")
    return ScheduleCoeffs(t, 1.0 - t, t)


def alpha_sigma(t) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized schedule coefficients for an array of timesteps."""
    t = np.asarray(t, dtype=np.float64)
    if np.any((t < 0.0) | (t > 1.0)):
        raise ScheduleError("t outside [0, 1]")
    return 1.0 - t, t.copy()


def forward_diffuse(x0: np.ndarray, tprime: float, noise: np.ndarray) -> np.ndarray:
    """x_t' = alpha(t') x0 + sigma(t') noise."""
    c = coeffs(tprime)
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    return c.alpha * x0 + c.sigma * noise


def transition_sample(mean_x0: np.ndarray, t_next: float,
                      noise: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One SDE transition: returns (x_next, mu) with mu = alpha(t_next) mean_x0.

    mu is returned alongside the sample because the reward denominators need
    the residual x_next - mu.
    """
    c = coeffs(t_next)
    mean_x0 = np.asarray(mean_x0, dtype=np.float64)
    mu = c.alpha * mean_x0
    x_next = mu + c.sigma * np.asarray(noise, dtype=np.float64)
    return x_next, mu


def transition_logprob_per_dim(x_next: np.ndarray, mu: np.ndarray,
                               sigma) -> np.ndarray:
    """Elementwise Gaussian log-density of the transition kernel.

    Each coordinate k contributes -0.5 log(2 pi sigma^2) - (x[k]-mu[k])^2/(2 sigma^2);
    the joint isotropic log-density is the sum over k. sigma may be a scalar or
    an array broadcastable against x_next, and must be positive everywhere: the
    deterministic final step has no density and never enters a ratio.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0.0):
        raise ScheduleError("sigma must be > 0 (degenerate transition kernel)")
    x_next = np.asarray(x_next, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    return -0.5 * np.log(2.0 * np.pi * sigma * sigma) \
        - (x_next - mu) ** 2 / (2.0 * sigma * sigma)


@dataclass(frozen=True)
class TimeGrid:
    """Generator timesteps, strictly decreasing from 1.0 (noise) to 0.0 (data).

    `times` has T+1 entries; transitions with t_next > 0 are stochastic, the
    final denoise to t=0 is deterministic and excluded from likelihood terms.
    """

    times: tuple[float, ...]
    tprime_min: float = 0.02
    tprime_max: float = 0.98

    def __post_init__(self):
        ts = self.times
        if len(ts) < 2 or ts[0] != 1.0 or ts[-1] != 0.0:
            raise ScheduleError("grid must run from t=1.0 down to t=0.0")
        if any(nxt >= prev for prev, nxt in zip(ts[:-1], ts[1:])):
            raise ScheduleError("grid times must be strictly decreasing")
        if not (0.0 < self.tprime_min < self.tprime_max < 1.0):
            raise ScheduleError("t' range must satisfy 0 < min < max < 1")

    @property
    def n_transitions(self) -> int:
        return len(self.times) - 1

    def stochastic_steps(self) -> list[int]:
        """Indices i of transitions times[i] -> times[i+1] with sigma > 0."""
        return [i for i in range(self.n_transitions) if self.times[i + 1] > 0.0]


def default_grid(steps: int = 4, tprime_min: float = 0.02,
                 tprime_max: float = 0.98) -> TimeGrid:
    """Uniform grid: 4 steps gives t in {1.0, 0.75, 0.5, 0.25, 0.0}."""
    ts = tuple(round(1.0 - i / steps, 12) for i in range(steps + 1))
    return TimeGrid(ts, tprime_min, tprime_max)
