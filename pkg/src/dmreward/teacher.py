"""Analytic teacher: an isotropic Gaussian mixture with closed-form noisy
marginals, scores, and posterior-mean denoisers.

Diffusing the mixture N(m_k, v_k I) to noise level (alpha, sigma) gives the
mixture N(alpha m_k, (alpha^2 v_k + sigma^2) I), so the noisy score and the
posterior-mean (Tweedie) denoiser are exact. These stand in for a pretrained
multi-step diffusion model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream
from .schedule import alpha_sigma


class TeacherError(ValueError):
    pass


@dataclass(frozen=True)
class GmmSpec:
    """Mixture weights (K,), means (K, d), isotropic variances (K,)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        v = np.asarray(self.variances, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)
        if w.ndim != 1 or m.shape[0] != w.shape[0] or v.shape != w.shape:
            raise TeacherError("inconsistent component shapes")
        if np.any(w <= 0.0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise TeacherError("weights must be positive and sum to 1")
        if np.any(v <= 0.0):
            raise TeacherError("variances must be positive")

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def ring_spec(k: int = 8, radius: float = 4.0, variance: float = 0.05) -> GmmSpec:
    """Equal-weight ring of k Gaussians in 2-D: the standard mode-seeking stress case."""
    ang = 2.0 * np.pi * np.arange(k) / k
    means = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return GmmSpec(np.full(k, 1.0 / k), means, np.full(k, variance))


def gmm_sample(spec: GmmSpec, stream: RngStream, n: int = 1) -> np.ndarray:
    """Draw n samples from the mixture, shape (n, d)."""
    comp = stream._gen.choice(spec.n_components, size=n, p=spec.weights)
    eps = stream.normal((n, spec.dim))
    return spec.means[comp] + np.sqrt(spec.variances[comp])[:, None] * eps


def _noisy_component_stats(spec: GmmSpec, x: np.ndarray, tprime):
    """Noisy-marginal component means/variances, broadcast against the batch.

    tprime may be a scalar or a per-sample array (n,); returns
    (x (n, d), alpha (n, 1), sigma (n, 1), mu_t (n, K, d), var_t (n, K)).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    tp = np.broadcast_to(np.asarray(tprime, dtype=np.float64), (n,))
    alpha, sigma = alpha_sigma(tp)
    var_t = alpha[:, None] ** 2 * spec.variances[None, :] + sigma[:, None] ** 2
    if np.any(var_t <= 0.0):
        raise TeacherError("singular noisy marginal (t'=0 with v=0)")
    mu_t = alpha[:, None, None] * spec.means[None, :, :]
    return x, alpha[:, None], sigma[:, None], mu_t, var_t


def _noisy_logcomp(spec: GmmSpec, x, mu_t, var_t) -> np.ndarray:
    """Per-component joint log-density terms, (n, K)."""
    sq = ((x[:, None, :] - mu_t) ** 2).sum(axis=2)
    return (np.log(spec.weights)[None, :]
            - 0.5 * spec.dim * np.log(2.0 * np.pi * var_t)
            - sq / (2.0 * var_t))


def noisy_logdensity(spec: GmmSpec, x: np.ndarray, tprime) -> np.ndarray:
    """log p_t'(x) of the diffused mixture, batched: x (n, d) -> (n,)."""
    x, _, _, mu_t, var_t = _noisy_component_stats(spec, x, tprime)
    logcomp = _noisy_logcomp(spec, x, mu_t, var_t)
    m = logcomp.max(axis=1, keepdims=True)
    return (m[:, 0] + np.log(np.exp(logcomp - m).sum(axis=1)))


def noisy_responsibilities(spec: GmmSpec, x: np.ndarray, tprime) -> np.ndarray:
    """Posterior component probabilities under the noisy marginal, (n, K)."""
    x, _, _, mu_t, var_t = _noisy_component_stats(spec, x, tprime)
    logcomp = _noisy_logcomp(spec, x, mu_t, var_t)
    logcomp -= logcomp.max(axis=1, keepdims=True)
    r = np.exp(logcomp)
    return r / r.sum(axis=1, keepdims=True)


def noisy_logdensity_score(spec: GmmSpec, x: np.ndarray, tprime) -> np.ndarray:
    """grad_x log p_t'(x), batched (n, d); exact via responsibilities."""
    x, _, _, mu_t, var_t = _noisy_component_stats(spec, x, tprime)
    r = noisy_responsibilities(spec, x, tprime)  # (n, K)
    per_comp = (mu_t - x[:, None, :]) / var_t[:, :, None]
    return (r[:, :, None] * per_comp).sum(axis=1)


def posterior_mean_denoiser(spec: GmmSpec, x: np.ndarray, tprime) -> np.ndarray:
    """E[x0 | x_t'] = (x + sigma^2 score(x)) / alpha (Tweedie form), batched.

    tprime may be a scalar or a per-sample array (n,)."""
    x, alpha, sigma, _, _ = _noisy_component_stats(spec, x, tprime)
    if np.any(alpha == 0.0):
        raise TeacherError("denoiser undefined at alpha = 0")
    return (x + sigma ** 2 * noisy_logdensity_score(spec, x, tprime)) / alpha
