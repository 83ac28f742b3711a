"""Student generator and fake denoiser: parameter state, AdamW updates with
gradient-norm clipping, the denoising update for the fake network, and
versioned checkpoints.

Both networks share the MLP architecture from `numerics`. They initialize to
the residual-identity configuration plus a small random perturbation: with an
analytic teacher there are no weights to copy, and an identity denoiser is
the closest desk-scale analog of starting from the teacher.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import (MlpArch, MlpGrad, MlpParams, RngStream,
                       global_grad_norm, mlp_forward_batch, mlp_backward_batch,
                       zero_params)
from .schedule import coeffs, forward_diffuse

CHECKPOINT_FORMAT_VERSION = 1


class NetsError(ValueError):
    pass


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    grad_clip: float = 1.0  # global norm threshold; <= 0 disables


@dataclass
class AdamState:
    """First/second moment accumulators plus step count, shape-congruent."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @staticmethod
    def zeros_like(params: MlpParams) -> "AdamState":
        return AdamState([np.zeros_like(a) for a in params.flat()],
                         [np.zeros_like(a) for a in params.flat()])


@dataclass
class NetState:
    """Parameters plus optimizer state for one network."""

    params: MlpParams
    opt: AdamState

    def copy(self) -> "NetState":
        p = self.params.copy()
        return NetState(p, AdamState([a.copy() for a in self.opt.m],
                                     [a.copy() for a in self.opt.v],
                                     self.opt.step))


StudentState = NetState
FakeScoreState = NetState


def init_state(arch: MlpArch, stream: RngStream, perturb: float = 1e-2) -> NetState:
    """Residual identity plus N(0, perturb^2) noise on every parameter."""
    params = zero_params(arch)
    for a in params.flat():
        a += perturb * stream.normal(a.shape)
    return NetState(params, AdamState.zeros_like(params))


def clip_grad_norm(grad: MlpGrad, max_norm: float) -> float:
    """Scale grad in place to global norm max_norm if it exceeds it.

    Direction is preserved exactly. Returns the pre-clip norm.
    """
    norm = global_grad_norm(grad)
    if max_norm > 0.0 and norm > max_norm:
        grad.scale_(max_norm / norm)
    return norm


def adam_step(state: NetState, grad: MlpGrad, cfg: AdamConfig) -> bool:
    """One decoupled-weight-decay Adam update. Non-finite grads skip the step
    (returns False); otherwise returns True."""
    flats = grad.flat()
    if not all(np.all(np.isfinite(g)) for g in flats):
        return False
    opt = state.opt
    opt.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** opt.step
    bc2 = 1.0 - b2 ** opt.step
    for p, g, m, v in zip(state.params.flat(), flats, opt.m, opt.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        if cfg.weight_decay:
            p -= cfg.lr * cfg.weight_decay * p
        p -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)
    return True


def generate_step(student: NetState, x_t: np.ndarray, t, c=0) -> np.ndarray:
    """Student denoising prediction x0_hat = G(x_t, t, c), batched."""
    return mlp_forward_batch(student.params, x_t, t, c)


def fake_denoise(fake: NetState, x_tprime: np.ndarray, tprime, c=0) -> np.ndarray:
    """Fake denoiser prediction at noise level t', batched."""
    return mlp_forward_batch(fake.params, x_tprime, tprime, c)


def fake_score(fake: NetState, x_tprime: np.ndarray, tprime: float, c=0) -> np.ndarray:
    """Score implied by the fake denoiser via the Tweedie inversion:
    s(x) = (alpha x0_hat(x) - x) / sigma^2."""
    sc = coeffs(float(tprime))
    if sc.sigma == 0.0:
        raise NetsError("fake score undefined at sigma = 0")
    x = np.atleast_2d(np.asarray(x_tprime, dtype=np.float64))
    x0_hat = fake_denoise(fake, x, tprime, c)
    return (sc.alpha * x0_hat - x) / sc.sigma ** 2


def fake_denoise_update(fake: NetState, x0_batch: np.ndarray, tprimes: np.ndarray,
                        noises: np.ndarray, cfg: AdamConfig, c=0) -> float:
    """One denoising step on the fake network: diffuse the (detached) x0 batch
    and regress the denoiser output back onto x0. Returns the pre-step loss.

    The x0 batch must already be detached from the student; nothing here can
    touch student parameters.
    """
    x0 = np.atleast_2d(np.asarray(x0_batch, dtype=np.float64))
    n = x0.shape[0]
    if n == 0:
        raise NetsError("empty denoising batch")
    tprimes = np.broadcast_to(np.asarray(tprimes, dtype=np.float64), (n,))
    alphas = 1.0 - tprimes
    sigmas = tprimes
    x_tp = alphas[:, None] * x0 + sigmas[:, None] * np.asarray(noises)
    pred = fake_denoise(fake, x_tp, tprimes, c)
    resid = pred - x0
    loss = float(np.mean(np.sum(resid ** 2, axis=1)))
    grad = mlp_backward_batch(fake.params, x_tp, tprimes, c, 2.0 * resid / n)
    clip_grad_norm(grad, cfg.grad_clip)
    adam_step(fake, grad, cfg)
    return loss


def save_checkpoint(state: NetState, path) -> None:
    """Versioned .npz dump: header JSON plus flat parameter/moment arrays."""
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "data_dim": state.params.arch.data_dim,
        "cond_width": state.params.arch.cond_width,
        "hidden": state.params.arch.hidden,
        "depth": state.params.arch.depth,
        "opt_step": state.opt.step,
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for i, w in enumerate(state.params.weights):
        arrays[f"w{i}"] = w
    for i, b in enumerate(state.params.biases):
        arrays[f"b{i}"] = b
    for i, m in enumerate(state.opt.m):
        arrays[f"m{i}"] = m
    for i, v in enumerate(state.opt.v):
        arrays[f"v{i}"] = v
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path) -> NetState:
    with np.load(path) as z:
        header = json.loads(bytes(z["header"]).decode())
        if header["format_version"] != CHECKPOINT_FORMAT_VERSION:
            raise NetsError(f"unsupported checkpoint version {header['format_version']}")
        arch = MlpArch(header["data_dim"], header["cond_width"],
                       header["hidden"], header["depth"])
        n_layers = arch.depth + 1
        ws = [z[f"w{i}"].copy() for i in range(n_layers)]
        bs = [z[f"b{i}"].copy() for i in range(n_layers)]
        n_flat = 2 * n_layers
        m = [z[f"m{i}"].copy() for i in range(n_flat)]
        v = [z[f"v{i}"].copy() for i in range(n_flat)]
        params = MlpParams(arch, ws, bs)
        return NetState(params, AdamState(m, v, header["opt_step"]))
