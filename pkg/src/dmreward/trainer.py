"""Training loop: trajectory sampling, fake-denoiser tracking, reward and
advantage computation with shared (t, t') draws per group, clipped-surrogate
generator updates, and replayable rounds.

Randomness is keyed hierarchically by (seed, round, purpose, group), so a
round is a pure function of (state, config, round index): identical configs
replay bit-exactly and resuming from a checkpoint continues the same stream.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import (MlpArch, RngStream, mlp_backward_batch,
                       mlp_forward_batch)
from .schedule import TimeGrid, alpha_sigma, default_grid
from .teacher import (GmmSpec, gmm_sample, noisy_logdensity_score,
                      posterior_mean_denoiser, ring_spec)
from .nets import (AdamConfig, AdamState, NetState, adam_step, clip_grad_norm,
                   fake_denoise, fake_denoise_update, fake_score,
                   generate_step, init_state)
from .rewards import (beta_dm, external_reward, group_normalize, rdm_exact,
                      rdm_practice, score_difference, weighted_add, wdm_weight)
from .policy import GrpoConfig, TransitionBatch, grpo_surrogate
from .metrics import MetricsRow, energy_distance, mode_coverage


class TrainerError(ValueError):
    pass


@dataclass
class AuxRewardSpec:
    kind: str
    weight: float
    params: dict = field(default_factory=dict)


@dataclass
class TrainConfig:
    spec: GmmSpec = field(default_factory=ring_spec)
    grid: TimeGrid = field(default_factory=default_grid)
    n_groups: int = 4
    group_size: int = 8
    iterations: int = 3000
    warmup: int = 500
    pretrain: int = 300
    fake_updates: int = 5
    fake_batch: int = 64             # extra trajectories per round simulated
                                     # only to train the fake network
    aux_rewards: list[AuxRewardSpec] = field(default_factory=list)
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    gn: bool = True
    share_t: bool = True
    share_tprime: bool = True
    beta_mode: str = "sample"        # sample | pixel | off
    shared_noise_init: bool = True   # group members share x_T (policy phase)
    reward_mode: str = "practice"    # practice | exact
    student_opt: AdamConfig = field(default_factory=AdamConfig)
    fake_opt: AdamConfig = field(default_factory=AdamConfig)
    lr_final_scale: float = 1.0      # linear student-lr decay over the
                                     # post-warmup rounds; 1.0 = constant
    hidden: int = 64
    depth: int = 2
    cond_width: int = 1
    init_perturb: float = 1e-2
    seed: int = 0
    eval_every: int = 500
    eval_samples: int = 4096
    ckpt_every: int = 0              # 0 = final checkpoint only
    reference_samples: np.ndarray | None = None
    track_wall_time: bool = False

    def __post_init__(self):
        if self.beta_mode not in ("sample", "pixel", "off"):
            raise TrainerError(f"unknown beta mode '{self.beta_mode}'")
        if self.reward_mode not in ("practice", "exact"):
            raise TrainerError(f"unknown reward mode '{self.reward_mode}'")
        if min(self.n_groups, self.group_size, self.iterations + 1,
               self.eval_every, self.eval_samples) < 1:
            raise TrainerError("counts must be positive")
        if not 0.0 < self.lr_final_scale <= 1.0:
            raise TrainerError("lr_final_scale must be in (0, 1]")
        if self.pretrain < 0:
            raise TrainerError("pretrain must be >= 0")
        if self.fake_updates < 1:
            raise TrainerError("fake_updates must be >= 1")
        if self.fake_batch < 0:
            raise TrainerError("fake_batch must be >= 0")
        self.grpo.group_size = self.group_size

    @property
    def arch(self) -> MlpArch:
        return MlpArch(self.spec.dim, self.cond_width, self.hidden, self.depth)


@dataclass
class Trajectory:
    """View of one backward-simulation run with everything the rewards need."""

    cond: int
    times: np.ndarray     # (T+1,)
    states: np.ndarray    # (T+1, d)
    noises: np.ndarray    # (T, d), zero on the deterministic final step
    preds: np.ndarray     # (T, d) predicted x0 at each step
    mus: np.ndarray       # (T, d) transition means


@dataclass
class TrajectoryGroup:
    """G trajectories with one condition, stored batched: arrays lead with
    the step axis, then the group axis."""

    cond: int
    times: np.ndarray     # (T+1,)
    states: np.ndarray    # (T+1, G, d)
    noises: np.ndarray    # (T, G, d)
    preds: np.ndarray     # (T, G, d)
    mus: np.ndarray       # (T, G, d)

    @property
    def size(self) -> int:
        return self.states.shape[1]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(self.cond, self.times, self.states[:, i],
                          self.noises[:, i], self.preds[:, i], self.mus[:, i])


@dataclass
class TrainerState:
    student: NetState
    fake: NetState
    iteration: int = 0
    samples: int = 0
    rollbacks: int = 0


def _pretrain_on_teacher(net: NetState, cfg: TrainConfig, stream: RngStream,
                         opt: AdamConfig, batch: int = 128) -> None:
    """Regress the network onto the teacher's exact posterior-mean denoiser
    at the generator timesteps. The analogue of initializing a distillation
    student from the teacher weights: a well-posed least-squares fit that
    starts both networks covering every mode."""
    times = np.asarray(cfg.grid.times[:-1])
    for i in range(cfg.pretrain):
        s = stream.child("step", i)
        x0 = gmm_sample(cfg.spec, s.child("x0"), batch)
        t = times[s.child("t").integers(0, len(times), batch)]
        alpha, sigma = alpha_sigma(t)
        x_t = alpha[:, None] * x0 + sigma[:, None] * s.child("eps").normal(x0.shape)
        # at t = 1 the state carries no signal and the posterior mean is the
        # mixture mean; the analytic denoiser is undefined there (alpha = 0)
        pure_noise = t >= 1.0
        target = np.empty_like(x0)
        if pure_noise.any():
            target[pure_noise] = cfg.spec.weights @ cfg.spec.means
        if (~pure_noise).any():
            target[~pure_noise] = posterior_mean_denoiser(
                cfg.spec, x_t[~pure_noise], t[~pure_noise])
        pred = mlp_forward_batch(net.params, x_t, t, 0)
        grad = mlp_backward_batch(net.params, x_t, t, 0, (pred - target) / batch)
        clip_grad_norm(grad, opt.grad_clip)
        adam_step(net, grad, opt)
    net.opt = AdamState.zeros_like(net.params)


def init_trainer_state(cfg: TrainConfig) -> TrainerState:
    root = RngStream(cfg.seed)
    student = init_state(cfg.arch, root.child("init", "student"), cfg.init_perturb)
    fake = init_state(cfg.arch, root.child("init", "fake"), cfg.init_perturb)
    if cfg.pretrain > 0:
        _pretrain_on_teacher(student, cfg, root.child("pretrain", "student"),
                             cfg.student_opt)
        _pretrain_on_teacher(fake, cfg, root.child("pretrain", "fake"),
                             cfg.fake_opt)
    return TrainerState(student, fake)


def sample_group(student: NetState, cfg: TrainConfig, stream: RngStream,
                 cond: int = 0) -> TrajectoryGroup:
    """Backward-simulate G trajectories from pure noise with the student frozen.

    With shared_noise_init all members start from one initial draw; the
    per-step sampling noises are always independent.
    """
    g, d = cfg.group_size, cfg.spec.dim
    times = np.asarray(cfg.grid.times)
    n_steps = cfg.grid.n_transitions
    if cfg.shared_noise_init:
        x = np.repeat(stream.normal((1, d)), g, axis=0)
    else:
        x = stream.normal((g, d))
    states = np.empty((n_steps + 1, g, d))
    noises = np.zeros((n_steps, g, d))
    preds = np.empty((n_steps, g, d))
    mus = np.empty((n_steps, g, d))
    states[0] = x
    for i in range(n_steps):
        t, t_next = times[i], times[i + 1]
        pred = generate_step(student, x, t, cond)
        alpha, sigma = 1.0 - t_next, t_next
        mu = alpha * pred
        if sigma > 0.0:
            noises[i] = stream.normal((g, d))
        x = mu + sigma * noises[i]
        preds[i], mus[i], states[i + 1] = pred, mu, x
    return TrajectoryGroup(cond, times, states, noises, preds, mus)


def sample_student_x0(student: NetState, cfg: TrainConfig, n: int,
                      stream: RngStream, cond: int = 0) -> np.ndarray:
    """Final samples from the full few-step SDE sampler, shape (n, d)."""
    d = cfg.spec.dim
    times = cfg.grid.times
    x = stream.normal((n, d))
    for i in range(cfg.grid.n_transitions):
        t_next = times[i + 1]
        pred = generate_step(student, x, times[i], cond)
        x = (1.0 - t_next) * pred
        if t_next > 0.0:
            x = x + t_next * stream.normal((n, d))
    return x


def _student_pred_pool(student: NetState, cfg: TrainConfig, n: int,
                       stream: RngStream, cond: int = 0) -> np.ndarray:
    """Predictions from n extra student trajectories at every transition step,
    stacked into one (n * n_transitions, d) pool. Used only as fake-network
    training data, so trajectories are simulated without bookkeeping."""
    times = np.asarray(cfg.grid.times)
    d = cfg.spec.dim
    x = stream.normal((n, d))
    preds = []
    for i in range(cfg.grid.n_transitions):
        t_next = times[i + 1]
        pred = generate_step(student, x, times[i], cond)
        preds.append(pred)
        x = (1.0 - t_next) * pred
        if t_next > 0.0:
            x = x + t_next * stream.normal((n, d))
    return np.concatenate(preds, axis=0)


def _gather_transitions(grp: TrajectoryGroup, idx: np.ndarray):
    """Per-member transition views at step indices idx (G,)."""
    g = grp.size
    rows = np.arange(g)
    x_t = grp.states[idx, rows]
    x_next = grp.states[idx + 1, rows]
    pred = grp.preds[idx, rows]
    mu = grp.mus[idx, rows]
    t = grp.times[idx]
    t_next = grp.times[idx + 1]
    return x_t, x_next, pred, mu, t, t_next


def _denoise_both(cfg: TrainConfig, fake: NetState, x_tp: np.ndarray,
                  tprime: np.ndarray, cond: int):
    """Teacher and fake denoiser outputs; both accept per-member t' values."""
    teacher_x0 = posterior_mean_denoiser(cfg.spec, x_tp, tprime)
    fake_x0 = fake_denoise(fake, x_tp, tprime, cond)
    return teacher_x0, fake_x0


@dataclass
class _GroupRewardResult:
    batch: TransitionBatch
    a_sum: np.ndarray
    rs_abs: float
    beta_mean: float
    aux_mean: float


def _group_rewards(state: TrainerState, cfg: TrainConfig, grp: TrajectoryGroup,
                   stream: RngStream) -> _GroupRewardResult:
    """Shared (t, t') draw, distillation + auxiliary rewards, group
    normalization, and the weighted advantage sum for one group."""
    g = grp.size
    stoch = cfg.grid.stochastic_steps()
    if cfg.share_t:
        idx = np.full(g, stoch[int(stream.integers(0, len(stoch)))])
    else:
        idx = np.asarray(stoch)[stream.integers(0, len(stoch), g)]
    if cfg.share_tprime:
        tprime = np.full(g, float(stream.uniform(cfg.grid.tprime_min,
                                                 cfg.grid.tprime_max)))
    else:
        tprime = stream.uniform(cfg.grid.tprime_min, cfg.grid.tprime_max, g)

    x_t, x_next, pred, mu, t, t_next = _gather_transitions(grp, idx)
    alpha_n, sigma_n = alpha_sigma(t_next)

    fnoise = stream.normal((g, cfg.spec.dim))
    alpha_p, sigma_p = alpha_sigma(tprime)
    x_tp = alpha_p[:, None] * pred + sigma_p[:, None] * fnoise
    teacher_x0, fake_x0 = _denoise_both(cfg, state.fake, x_tp, tprime, grp.cond)

    # score difference implied by the two denoisers, tracked as a diagnostic
    s_diff = score_difference(
        (alpha_p[:, None] * teacher_x0 - x_tp) / sigma_p[:, None] ** 2,
        (alpha_p[:, None] * fake_x0 - x_tp) / sigma_p[:, None] ** 2)
    rs_abs = float(np.mean(np.abs(s_diff)))

    resid_weight = (1.0 / (np.abs(x_next - mu) + 1e-7)) \
        * (sigma_n ** 2 / alpha_n)[:, None]
    if cfg.reward_mode == "practice":
        r_dm, _ = rdm_practice(teacher_x0, fake_x0, pred, x_next, mu)
        w_dm = resid_weight
    else:
        # exact reward already carries sigma^2 / (alpha (x_next - mu))
        r_dm = np.empty((g, cfg.spec.dim))
        for i in range(g):
            r_dm[i], _ = rdm_exact(s_diff[i], x_next[i], mu[i],
                                   _coeffs_row(t_next[i]))
        w_dm = np.ones_like(r_dm)

    a_dm = group_normalize(r_dm).values if cfg.gn else r_dm

    if cfg.beta_mode == "sample":
        beta = beta_dm(w_dm)
    elif cfg.beta_mode == "pixel":
        beta = w_dm
    else:
        beta = np.ones(g)

    x0_final = grp.states[-1]
    aux_terms = []
    aux_raw = np.nan
    in_warmup = state.iteration < cfg.warmup
    for j, rw in enumerate(cfg.aux_rewards):
        r_o = external_reward(rw.kind, rw.params, x0_final, cfg.spec)
        if j == 0:
            aux_raw = float(r_o.mean())
        a_o = group_normalize(r_o).values if cfg.gn else r_o
        aux_terms.append((0.0 if in_warmup else rw.weight, a_o))

    a_sum = weighted_add(a_dm, w_dm, beta, aux_terms)
    batch = TransitionBatch(x_t, t, np.full(g, grp.cond), x_next, t_next)
    return _GroupRewardResult(batch, a_sum, rs_abs, float(np.mean(np.abs(beta))),
                              aux_raw)


def _coeffs_row(t_next: float):
    from .schedule import coeffs
    return coeffs(float(t_next))


def _decayed_opt(state: TrainerState, cfg: TrainConfig) -> AdamConfig:
    """Student optimizer with the learning rate linearly annealed from full
    strength at the end of warmup to lr_final_scale * lr at the last round."""
    span = cfg.iterations - 1 - cfg.warmup
    if cfg.lr_final_scale >= 1.0 or span <= 0:
        return cfg.student_opt
    progress = min(1.0, max(0, state.iteration - cfg.warmup) / span)
    scale = 1.0 + (cfg.lr_final_scale - 1.0) * progress
    return replace(cfg.student_opt, lr=cfg.student_opt.lr * scale)


def train_round(state: TrainerState, cfg: TrainConfig) -> dict:
    """One full round of the training procedure:

      1. sample N trajectory groups (student frozen),
      2. one denoising update of the fake network on detached predictions,
      3. per group: shared (t, t') draw, rewards, group normalization,
         weighted advantage sum,
      4. inner loop of clipped-surrogate generator updates against a frozen
         parameter snapshot, reusing the same (t, t'),
      5. metrics; any non-finite intermediate rolls the round back.

    Rounds before the warmup horizon replace steps 3-4 with a direct
    distillation update (cold start).
    """
    stream = RngStream(cfg.seed).child("round", state.iteration)
    snap_student = state.student.copy()
    snap_fake = state.fake.copy()
    try:
        with np.errstate(over="raise", invalid="raise"):
            return _train_round_body(state, cfg, stream)
    except FloatingPointError:
        state.student = snap_student
        state.fake = snap_fake
        state.rollbacks += 1
        return {"fake_loss": np.nan, "rs_abs_mean": np.nan,
                "beta_dm_mean": np.nan, "aux_reward_mean": np.nan,
                "clip_frac": np.nan, "clip_frac_first": np.nan,
                "ratio_mean": np.nan, "surrogate": np.nan, "rolled_back": True}


def _distill_update(state: TrainerState, cfg: TrainConfig, groups,
                    stream: RngStream) -> dict:
    """Cold-start round: a direct distillation step on the student.

    The score difference at a re-noised prediction is contracted against the
    generator Jacobian — no surrogate, no advantages. Used for the first
    `warmup` iterations so reinforcement starts from a student that already
    tracks the teacher.
    """
    total = None
    rs_abs = []
    stoch = cfg.grid.stochastic_steps()
    times = np.asarray(cfg.grid.times)
    for g, grp in enumerate(groups):
        ds = stream.child("distill", g)
        idx = stoch[int(ds.integers(0, len(stoch)))]
        x_t = grp.states[idx]
        pred = grp.preds[idx]
        tprime = float(ds.uniform(cfg.grid.tprime_min, cfg.grid.tprime_max))
        alpha_p, sigma_p = alpha_sigma(tprime)
        x_tp = alpha_p * pred + sigma_p * ds.normal(pred.shape)
        r_s = score_difference(
            noisy_logdensity_score(cfg.spec, x_tp, tprime),
            fake_score(state.fake, x_tp, tprime, grp.cond))
        rs_abs.append(float(np.mean(np.abs(r_s))))
        n_total = len(groups) * grp.size
        grad = mlp_backward_batch(state.student.params, x_t,
                                  np.full(grp.size, times[idx]), grp.cond,
                                  -r_s / n_total)
        if total is None:
            total = grad
        else:
            total.add_(grad)
    clip_grad_norm(total, cfg.student_opt.grad_clip)
    adam_step(state.student, total, cfg.student_opt)
    return {
        "fake_loss": np.nan,
        "rs_abs_mean": float(np.mean(rs_abs)),
        "beta_dm_mean": np.nan,
        "aux_reward_mean": np.nan,
        "clip_frac": 0.0,
        "clip_frac_first": 0.0,
        "ratio_mean": 1.0,
        "surrogate": np.nan,
        "rolled_back": False,
    }


def _train_round_body(state: TrainerState, cfg: TrainConfig,
                  stream: RngStream) -> dict:
    # a shared initial draw only matters for group-relative statistics, which
    # the warmup distillation never forms; independent draws during warmup
    # keep its per-round sample diversity at the full N*G
    cfg_sample = (cfg if state.iteration >= cfg.warmup
                  else replace(cfg, shared_noise_init=False))
    groups = [sample_group(state.student, cfg_sample,
                           stream.child("sample", g), cond=g % cfg.cond_width)
              for g in range(cfg.n_groups)]

    # fake-network denoising step on detached predictions with its own draws
    fs = stream.child("fake")
    stoch = np.asarray(cfg.grid.stochastic_steps())
    x0_parts, conds = [], []
    for grp in groups:
        pick = stoch[fs.integers(0, len(stoch), grp.size)]
        x0_parts.append(grp.preds[pick, np.arange(grp.size)])
        conds.append(np.full(grp.size, grp.cond))
    if cfg.fake_batch > 0:
        extra = _student_pred_pool(state.student, cfg, cfg.fake_batch,
                                   fs.child("pool"))
        x0_parts.append(extra)
        conds.append(np.zeros(extra.shape[0], dtype=np.int64))
    x0_det = np.concatenate(x0_parts, axis=0)
    conds = np.concatenate(conds)
    n = x0_det.shape[0]
    # several denoising updates per round keep the fake network tracking the
    # student closely; a lagging fake biases the score difference everywhere
    for _ in range(cfg.fake_updates):
        tprimes = fs.uniform(cfg.grid.tprime_min, cfg.grid.tprime_max, n)
        fake_loss = fake_denoise_update(state.fake, x0_det, tprimes,
                                        fs.normal(x0_det.shape), cfg.fake_opt,
                                        c=conds)

    if state.iteration < cfg.warmup:
        out = _distill_update(state, cfg, groups, stream)
        out["fake_loss"] = fake_loss
        if not (state.student.params.all_finite()
                and state.fake.params.all_finite()):
            raise FloatingPointError("non-finite intermediate")
        return out

    if state.iteration == cfg.warmup and cfg.warmup > 0:
        # Fresh optimizer moments for the policy phase: the second-moment
        # estimates accumulated on warmup-scale gradients would otherwise
        # amplify the first policy updates by orders of magnitude.
        state.student.opt = AdamState.zeros_like(state.student.params)

    results = [_group_rewards(state, cfg, grp, stream.child("reward", g))
               for g, grp in enumerate(groups)]

    big = TransitionBatch(
        np.concatenate([r.batch.x_t for r in results]),
        np.concatenate([r.batch.t for r in results]),
        np.concatenate([r.batch.c for r in results]),
        np.concatenate([r.batch.x_next for r in results]),
        np.concatenate([r.batch.t_next for r in results]))
    a_sum = np.concatenate([r.a_sum for r in results])

    theta_old = state.student.params.copy()
    student_opt = _decayed_opt(state, cfg)
    clip_fracs, ratio_means, values = [], [], []
    for _ in range(cfg.grpo.inner_updates):
        est = grpo_surrogate(state.student.params, theta_old, big, a_sum,
                             cfg.grpo)
        grad = est.grads
        grad.scale_(-1.0)  # ascend the surrogate
        clip_grad_norm(grad, student_opt.grad_clip)
        adam_step(state.student, grad, student_opt)
        clip_fracs.append(est.clip_fraction)
        ratio_means.append(est.mean_ratio)
        values.append(est.value)

    out = {
        "fake_loss": fake_loss,
        "rs_abs_mean": float(np.mean([r.rs_abs for r in results])),
        "beta_dm_mean": float(np.mean([r.beta_mean for r in results])),
        "aux_reward_mean": float(np.nanmean([r.aux_mean for r in results]))
        if cfg.aux_rewards else np.nan,
        "clip_frac": float(np.mean(clip_fracs)),
        "clip_frac_first": float(clip_fracs[0]),
        "ratio_mean": float(np.mean(ratio_means)),
        "surrogate": float(np.mean(values)),
        "rolled_back": False,
    }
    if not (state.student.params.all_finite()
            and state.fake.params.all_finite()
            and np.isfinite(out["surrogate"])):
        raise FloatingPointError("non-finite intermediate")
    return out


def evaluate(state: TrainerState, cfg: TrainConfig,
             round_metrics: dict | None, wall_ms: float = 0.0) -> MetricsRow:
    """Distribution metrics at the current iteration."""
    stream = RngStream(cfg.seed).child("eval", state.iteration)
    student_x0 = sample_student_x0(state.student, cfg, cfg.eval_samples,
                                   stream.child("student"))
    teacher_x0 = gmm_sample(cfg.spec, stream.child("teacher"), cfg.eval_samples)
    ed = energy_distance(student_x0, teacher_x0)
    ed_sd = np.nan
    if cfg.reference_samples is not None:
        ed_sd = energy_distance(student_x0, cfg.reference_samples)
    cov = mode_coverage(student_x0, cfg.spec)
    rm = round_metrics or {}
    return MetricsRow(
        iteration=state.iteration,
        energy_dist=float(ed),
        energy_dist_sd=float(ed_sd),
        coverage=cov,
        aux_reward_mean=float(rm.get("aux_reward_mean", np.nan)),
        rs_abs_mean=float(rm.get("rs_abs_mean", np.nan)),
        clip_frac=float(rm.get("clip_frac", np.nan)),
        ratio_mean=float(rm.get("ratio_mean", np.nan)),
        beta_dm_mean=float(rm.get("beta_dm_mean", np.nan)),
        samples=state.samples,
        wall_ms=wall_ms,
    )


class RunSinks:
    """I/O boundary: the trainer emits through these, the harness implements
    file-backed versions. The defaults are no-ops."""

    def on_metrics(self, row: MetricsRow) -> None:
        pass

    def on_round(self, iteration: int, round_metrics: dict) -> None:
        pass

    def save_checkpoint(self, iteration: int, student: NetState,
                        fake: NetState, rng_info: dict) -> None:
        pass

    def on_incident(self, iteration: int, message: str) -> None:
        pass


def run(cfg: TrainConfig, sinks: RunSinks | None = None,
        state: TrainerState | None = None) -> tuple[TrainerState, list[dict]]:
    """Loop train_round for the configured iteration count with periodic
    evaluation and checkpointing. Returns the final state and the per-round
    metrics history. A preexisting state (e.g. from a checkpoint) resumes at
    its recorded iteration."""
    sinks = sinks or RunSinks()
    if state is None:
        state = init_trainer_state(cfg)
    start = time.monotonic()
    history: list[dict] = []

    def _wall() -> float:
        return (time.monotonic() - start) * 1000.0 if cfg.track_wall_time else 0.0

    if state.iteration == 0:
        sinks.on_metrics(evaluate(state, cfg, None, _wall()))
    last = None
    for _ in range(state.iteration, cfg.iterations):
        last = train_round(state, cfg)
        state.iteration += 1
        state.samples += cfg.n_groups * cfg.group_size
        history.append(last)
        if last["rolled_back"]:
            sinks.on_incident(state.iteration, "round rolled back (non-finite)")
        sinks.on_round(state.iteration, last)
        at_end = state.iteration == cfg.iterations
        if state.iteration % cfg.eval_every == 0 or at_end:
            sinks.on_metrics(evaluate(state, cfg, last, _wall()))
        if at_end or (cfg.ckpt_every and state.iteration % cfg.ckpt_every == 0):
            sinks.save_checkpoint(state.iteration, state.student, state.fake,
                                  {"seed": cfg.seed, "iteration": state.iteration,
                                   "samples": state.samples})
    return state, history
