"""Flat `key = value` experiment configuration with [section] headers.

The resolved form is a dict keyed by "section.key" strings; typed accessors
convert at the point of use and report the offending line on parse errors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nets import AdamConfig
from ..policy import GrpoConfig
from ..schedule import default_grid
from ..teacher import GmmSpec, ring_spec
from ..trainer import AuxRewardSpec, TrainConfig


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG_TEXT = """\
# ring-of-Gaussians benchmark, 4-step generator
[teacher]
kind = ring
components = 8
radius = 4.0
variance = 0.05

[grid]
steps = 4
tprime_min = 0.02
tprime_max = 0.98

[train]
iterations = 3000
warmup = 500
pretrain = 300
fake_updates = 5
fake_batch = 64
n_groups = 4
group_size = 8
gn = on
share_t = on
share_tprime = on
beta_mode = sample
shared_noise_init = on
reward_mode = practice
seed = 0
eval_every = 500
eval_samples = 4096
ckpt_every = 0
hidden = 64
depth = 2
cond_width = 1
init_perturb = 0.01
track_wall_time = off

[grpo]
eta = 0.5
inner_updates = 1
ratio_mode = dim

[opt]
student_lr = 0.001
fake_lr = 0.001
lr_final_scale = 1.0
beta1 = 0.9
beta2 = 0.999
grad_clip = 1.0
weight_decay = 0.0
"""


def parse_config_text(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"{source}:{lineno}: empty section name")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key or not section:
            raise ConfigError(f"{source}:{lineno}: key outside a section")
        out[f"{section}.{key}"] = value.strip()
    return out


def load_config(path: str | Path | None, overrides: list[str] = ()) -> dict[str, str]:
    """Defaults, optionally replaced by a file, then `--set key=value` overrides."""
    cfg = parse_config_text(DEFAULT_CONFIG_TEXT, "<defaults>")
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        cfg.update(parse_config_text(p.read_text(), str(p)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        key = key.strip()
        if "." not in key:
            raise ConfigError(f"--set key must be 'section.key', got '{key}'")
        cfg[key] = value.strip()
    return cfg


def _get(cfg, key, conv, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing config key '{key}'")
        return default
    try:
        return conv(cfg[key])
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(f"config key '{key}': bad value '{cfg[key]}' ({e})")


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"expected on/off, got '{v}'")


def _floats(v: str) -> np.ndarray:
    return np.array([float(x) for x in v.split()])


def build_teacher(cfg: dict[str, str]) -> GmmSpec:
    kind = _get(cfg, "teacher.kind", str, "ring")
    if kind == "ring":
        return ring_spec(_get(cfg, "teacher.components", int, 8),
                         _get(cfg, "teacher.radius", float, 4.0),
                         _get(cfg, "teacher.variance", float, 0.05))
    if kind == "custom":
        w = _get(cfg, "teacher.weights", _floats)
        v = _get(cfg, "teacher.variances", _floats)
        flat = _get(cfg, "teacher.means", _floats)
        k = w.shape[0]
        if flat.shape[0] % k:
            raise ConfigError("teacher.means length must be a multiple of "
                              "the component count")
        return GmmSpec(w, flat.reshape(k, -1), v)
    raise ConfigError(f"unknown teacher kind '{kind}'")


def build_train_config(cfg: dict[str, str]) -> TrainConfig:
    spec = build_teacher(cfg)
    grid = default_grid(_get(cfg, "grid.steps", int, 4),
                        _get(cfg, "grid.tprime_min", float, 0.02),
                        _get(cfg, "grid.tprime_max", float, 0.98))
    grpo = GrpoConfig(eta=_get(cfg, "grpo.eta", float, 0.5),
                      inner_updates=_get(cfg, "grpo.inner_updates", int, 1),
                      ratio_mode=_get(cfg, "grpo.ratio_mode", str, "dim"))
    beta1 = _get(cfg, "opt.beta1", float, 0.9)
    beta2 = _get(cfg, "opt.beta2", float, 0.999)
    clip = _get(cfg, "opt.grad_clip", float, 1.0)
    decay = _get(cfg, "opt.weight_decay", float, 0.0)
    student_opt = AdamConfig(lr=_get(cfg, "opt.student_lr", float, 1e-3),
                             beta1=beta1, beta2=beta2, weight_decay=decay,
                             grad_clip=clip)
    fake_opt = AdamConfig(lr=_get(cfg, "opt.fake_lr", float, 1e-3),
                          beta1=beta1, beta2=beta2, weight_decay=decay,
                          grad_clip=clip)

    aux = []
    i = 1
    while f"reward.{i}.kind" in cfg:
        kind = cfg[f"reward.{i}.kind"]
        weight = _get(cfg, f"reward.{i}.weight", float, 10.0)
        params: dict = {}
        if f"reward.{i}.center" in cfg:
            params["center"] = _get(cfg, f"reward.{i}.center", _floats)
        if f"reward.{i}.normal" in cfg:
            params["normal"] = _get(cfg, f"reward.{i}.normal", _floats)
        if f"reward.{i}.component" in cfg:
            params["component"] = _get(cfg, f"reward.{i}.component", int)
        aux.append(AuxRewardSpec(kind, weight, params))
        i += 1

    reference = None
    if "eval.reference_samples" in cfg:
        reference = np.load(cfg["eval.reference_samples"])

    return TrainConfig(
        spec=spec, grid=grid, grpo=grpo,
        n_groups=_get(cfg, "train.n_groups", int, 4),
        group_size=_get(cfg, "train.group_size", int, 8),
        iterations=_get(cfg, "train.iterations", int, 3000),
        warmup=_get(cfg, "train.warmup", int, 500),
        pretrain=_get(cfg, "train.pretrain", int, 300),
        fake_updates=_get(cfg, "train.fake_updates", int, 5),
        fake_batch=_get(cfg, "train.fake_batch", int, 64),
        aux_rewards=aux,
        gn=_get(cfg, "train.gn", _bool, True),
        share_t=_get(cfg, "train.share_t", _bool, True),
        share_tprime=_get(cfg, "train.share_tprime", _bool, True),
        beta_mode=_get(cfg, "train.beta_mode", str, "sample"),
        shared_noise_init=_get(cfg, "train.shared_noise_init", _bool, True),
        reward_mode=_get(cfg, "train.reward_mode", str, "practice"),
        student_opt=student_opt, fake_opt=fake_opt,
        lr_final_scale=_get(cfg, "opt.lr_final_scale", float, 1.0),
        hidden=_get(cfg, "train.hidden", int, 64),
        depth=_get(cfg, "train.depth", int, 2),
        cond_width=_get(cfg, "train.cond_width", int, 1),
        init_perturb=_get(cfg, "train.init_perturb", float, 1e-2),
        seed=_get(cfg, "train.seed", int, 0),
        eval_every=_get(cfg, "train.eval_every", int, 500),
        eval_samples=_get(cfg, "train.eval_samples", int, 4096),
        ckpt_every=_get(cfg, "train.ckpt_every", int, 0),
        reference_samples=reference,
        track_wall_time=_get(cfg, "train.track_wall_time", _bool, False),
    )


def serialize_config(cfg: dict[str, str]) -> str:
    """Resolved config in the same flat format, sorted for diffability."""
    by_section: dict[str, list[tuple[str, str]]] = {}
    for full_key, value in sorted(cfg.items()):
        section, key = full_key.split(".", 1)
        by_section.setdefault(section, []).append((key, value))
    lines = []
    for section, items in by_section.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in items)
        lines.append("")
    return "\n".join(lines)
