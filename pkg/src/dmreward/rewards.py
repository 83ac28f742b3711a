"""Reward and advantage machinery: score-difference guidance, the exact and
sign-normalized distillation rewards, amplitude weights, group normalization,
auxiliary rewards, and the weighted advantage sum.

Dense fields are (G, d) arrays over a group of G samples; sparse rewards are
(G,) per-sample scalars broadcast across coordinates when summed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schedule import ScheduleCoeffs
from .teacher import GmmSpec, noisy_responsibilities


class RewardError(ValueError):
    pass


@dataclass
class RewardField:
    """Per-dimension rewards (dense) or per-sample scalars (sparse)."""

    dense: np.ndarray | None = None   # (G, d)
    sparse: np.ndarray | None = None  # (G,)


@dataclass
class AdvantageField:
    """Group-normalized field plus the statistics used, kept for audit."""

    values: np.ndarray
    group_mean: np.ndarray
    group_std: np.ndarray
    guard_count: int = 0


def score_difference(teacher_out: np.ndarray, fake_out: np.ndarray) -> np.ndarray:
    """Directional guidance term: teacher minus fake, elementwise."""
    a = np.asarray(teacher_out, dtype=np.float64)
    b = np.asarray(fake_out, dtype=np.float64)
    if a.shape != b.shape:
        raise RewardError(f"shape mismatch {a.shape} vs {b.shape}")
    return a - b


def rdm_exact(r_s: np.ndarray, x_next: np.ndarray, mu: np.ndarray,
              sc: ScheduleCoeffs) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-dimension distillation reward:

        R = r_s / (x_next - mu) * sigma^2 / alpha.

    Returns (reward, degenerate_mask); positions with |x_next - mu| < 1e-12
    are flagged and set to 0 there (callers fall back to the sign-normalized
    variant; the event has probability zero under the sampling kernel).
    """
    r_s = np.asarray(r_s, dtype=np.float64)
    resid = np.asarray(x_next, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    if sc.alpha == 0.0:
        raise RewardError("alpha = 0 in exact reward")
    degenerate = np.abs(resid) < 1e-12
    safe = np.where(degenerate, 1.0, resid)
    out = r_s / safe * (sc.sigma ** 2 / sc.alpha)
    out[degenerate] = 0.0
    return out, degenerate


def sign(x: np.ndarray) -> np.ndarray:
    """sign(x) = 1 if x > 0 else -1 (zero maps to -1)."""
    return np.where(np.asarray(x) > 0.0, 1.0, -1.0)


def rdm_practice(teacher_x0: np.ndarray, fake_x0: np.ndarray, pred_x0: np.ndarray,
                 x_next: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, int]:
    """Sign-normalized practical reward with the amplitude factor
    d / ||teacher_x0 - pred_x0||_1 (L1 taken per sample over coordinates).

    Returns (reward (G, d), clamp_count) where clamp_count reports samples whose
    L1 factor hit the 1e-12 guard.
    """
    teacher_x0 = np.atleast_2d(np.asarray(teacher_x0, dtype=np.float64))
    fake_x0 = np.atleast_2d(np.asarray(fake_x0, dtype=np.float64))
    pred_x0 = np.atleast_2d(np.asarray(pred_x0, dtype=np.float64))
    if not (teacher_x0.shape == fake_x0.shape == pred_x0.shape):
        raise RewardError("x0 field shapes disagree")
    d = teacher_x0.shape[1]
    l1 = np.abs(teacher_x0 - pred_x0).sum(axis=1)  # (G,)
    clamped = l1 < 1e-12
    factor = d / np.where(clamped, 1e-12, l1)
    resid_sign = sign(np.asarray(x_next) - np.asarray(mu))
    out = (teacher_x0 - fake_x0) / resid_sign * factor[:, None]
    return out, int(clamped.sum())


def wdm_weight(x_next: np.ndarray, mu: np.ndarray, sc: ScheduleCoeffs) -> np.ndarray:
    """Amplitude-restoring weight 1/(|x_next - mu| + 1e-7) * sigma^2 / alpha."""
    if sc.alpha == 0.0:
        raise RewardError("alpha = 0 in weight")
    resid = np.abs(np.asarray(x_next, dtype=np.float64) - np.asarray(mu, dtype=np.float64))
    return (1.0 / (resid + 1e-7)) * (sc.sigma ** 2 / sc.alpha)


def beta_dm(w_dm: np.ndarray) -> np.ndarray:
    """Sample-wise adaptive weight: per-row mean of |w_dm| over coordinates."""
    w = np.atleast_2d(np.asarray(w_dm, dtype=np.float64))
    return np.abs(w).mean(axis=1)


def group_normalize(values: np.ndarray, eps_std: float = 1e-8) -> AdvantageField:
    """Standardize over the group axis (axis 0), population convention.

    Works on dense (G, d) fields and sparse (G,) scalars alike. Positions with
    group std below eps_std get advantage exactly 0 for every member (counted
    in guard_count).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] < 2:
        raise RewardError("group normalization needs G >= 2")
    mean = v.mean(axis=0)
    std = v.std(axis=0)  # population: divisor G
    guard = std < eps_std
    out = np.where(guard, 0.0, (v - mean) / np.where(guard, 1.0, std))
    return AdvantageField(out, mean, std, int(np.sum(guard)))


def external_reward(kind: str, params: dict, x0: np.ndarray,
                    spec: GmmSpec | None = None) -> np.ndarray:
    """Sparse reward on the final sample, batched: x0 (G, d) -> (G,).

    kinds:
      radial        -||x0 - center||^2
      halfspace     a . x0
      mode_affinity log responsibility of component `component` under the
                    teacher's data-level posterior (needs spec)
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    if kind == "radial":
        c = np.asarray(params.get("center", np.zeros(x0.shape[1])), dtype=np.float64)
        return -np.sum((x0 - c) ** 2, axis=1)
    if kind == "halfspace":
        a = np.asarray(params["normal"], dtype=np.float64)
        return x0 @ a
    if kind == "mode_affinity":
        if spec is None:
            raise RewardError("mode_affinity reward needs a teacher spec")
        k = int(params.get("component", 0))
        # evaluate responsibilities at a near-data noise level to avoid t'=0
        r = noisy_responsibilities(spec, x0, 1e-6)
        return np.log(np.maximum(r[:, k], 1e-300))
    raise RewardError(f"unknown reward kind '{kind}'")


def weighted_add(a_dm: np.ndarray, w_dm: np.ndarray, beta: np.ndarray,
                 aux: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """Total advantage: w_dm * A_dm + sum_j beta * w_j * A_oj.

    beta is either per-sample (G,) or per-position (G, d); each sparse A_oj
    (G,) broadcasts uniformly across that sample's coordinates.
    """
    a_dm = np.atleast_2d(np.asarray(a_dm, dtype=np.float64))
    w_dm = np.atleast_2d(np.asarray(w_dm, dtype=np.float64))
    if a_dm.shape != w_dm.shape:
        raise RewardError("advantage / weight shape mismatch")
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim == 1:
        beta = beta[:, None]
    out = w_dm * a_dm
    for w_j, a_oj in aux:
        a_oj = np.asarray(a_oj, dtype=np.float64)
        if a_oj.shape != (a_dm.shape[0],):
            raise RewardError("auxiliary advantage must be per-sample (G,)")
        out = out + beta * w_j * a_oj[:, None]
    return out
