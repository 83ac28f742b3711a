"""Command-line entry point: train | ablate | diagnose | plot.

All file I/O lives here; the library modules emit through the sink objects
defined by the trainer.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import sys
import time
from pathlib import Path

import numpy as np

from ..numerics import RngStream
from ..metrics import MetricsRow, rs_variance_curve
from ..nets import fake_score, save_checkpoint
from ..teacher import gmm_sample, noisy_logdensity_score
from ..trainer import RunSinks, TrainConfig, init_trainer_state, run
from ..diagnostics import equivalence_suite
from .config import ConfigError, build_train_config, load_config, serialize_config
from .svg import emit_plot


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def metrics_header(n_modes: int) -> list[str]:
    cov = [f"coverage_{k}" for k in range(n_modes)]
    return (["iter", "energy_dist", "energy_dist_sd"] + cov
            + ["aux_reward_mean", "rs_abs_mean", "clip_frac", "ratio_mean",
               "beta_dm_mean", "samples", "wall_ms"])


class FileSinks(RunSinks):
    """CSV metrics, checkpoint directories, and an incident log under out_dir."""

    def __init__(self, out_dir: Path, cfg: TrainConfig):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.rows: list[MetricsRow] = []
        self.aux_curve: list[tuple[int, float]] = []
        self._csv = open(self.out_dir / "metrics.csv", "w", newline="")
        self._writer = csv.writer(self._csv, lineterminator="\n")
        self._writer.writerow(metrics_header(cfg.spec.n_components))
        self._csv.flush()

    def on_metrics(self, row: MetricsRow) -> None:
        self.rows.append(row)
        self._writer.writerow(
            [row.iteration, _fmt(row.energy_dist), _fmt(row.energy_dist_sd)]
            + [_fmt(c) for c in row.coverage]
            + [_fmt(row.aux_reward_mean), _fmt(row.rs_abs_mean),
               _fmt(row.clip_frac), _fmt(row.ratio_mean),
               _fmt(row.beta_dm_mean), row.samples, _fmt(row.wall_ms)])
        self._csv.flush()

    def on_round(self, iteration: int, rm: dict) -> None:
        if self.cfg.aux_rewards:
            self.aux_curve.append((iteration, rm["aux_reward_mean"]))

    def save_checkpoint(self, iteration, student, fake, rng_info) -> None:
        d = self.out_dir / "ckpt" / str(iteration)
        d.mkdir(parents=True, exist_ok=True)
        save_checkpoint(student, d / "student")
        save_checkpoint(fake, d / "fake")
        with open(d / "rng", "w") as f:
            for k, v in rng_info.items():
                f.write(f"{k} = {v}\n")

    def on_incident(self, iteration: int, message: str) -> None:
        with open(self.out_dir / "incidents.log", "a") as f:
            f.write(f"iter {iteration}: {message}\n")

    def close(self) -> None:
        self._csv.close()


def _write_plots(sinks: FileSinks) -> None:
    rows = sinks.rows
    if not rows:
        return
    emit_plot({"energy distance": [(r.iteration, r.energy_dist) for r in rows]},
              sinks.out_dir / "energy_dist.svg", "Distribution distance",
              "iteration", "energy distance")
    cov = {f"mode {k}": [(r.iteration, r.coverage[k]) for r in rows]
           for k in range(sinks.cfg.spec.n_components)}
    emit_plot(cov, sinks.out_dir / "coverage.svg", "Mode coverage",
              "iteration", "fraction")
    diag = {"mean |score diff|": [(r.iteration, r.rs_abs_mean) for r in rows],
            "clip fraction": [(r.iteration, r.clip_frac) for r in rows]}
    emit_plot(diag, sinks.out_dir / "diagnostics.svg", "Training diagnostics",
              "iteration", "value")
    if sinks.aux_curve:
        emit_plot({"aux reward": sinks.aux_curve},
                  sinks.out_dir / "aux_reward.svg", "Auxiliary reward",
                  "iteration", "mean reward")


def _write_summary(sinks: FileSinks, wall_s: float, rollbacks: int) -> None:
    rows = sinks.rows
    final = rows[-1]
    lines = [f"iterations = {final.iteration}",
             f"final_energy_dist = {_fmt(final.energy_dist)}",
             f"final_coverage = {' '.join(_fmt(c) for c in final.coverage)}",
             f"samples = {final.samples}",
             f"rollbacks = {rollbacks}",
             f"wall_seconds = {wall_s:.1f}"]
    (sinks.out_dir / "summary.txt").write_text("\n".join(lines) + "\n")


def run_experiment(cfg_dict: dict[str, str], out_dir: Path) -> FileSinks:
    """One full training run with file outputs; returns the sinks."""
    cfg = build_train_config(cfg_dict)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved").write_text(serialize_config(cfg_dict))
    sinks = FileSinks(out_dir, cfg)
    t0 = time.monotonic()
    state, _ = run(cfg, sinks)
    _write_plots(sinks)
    _write_summary(sinks, time.monotonic() - t0, state.rollbacks)
    sinks.close()
    return sinks


def cmd_train(args) -> int:
    cfg_dict = load_config(args.config, args.set or [])
    run_experiment(cfg_dict, Path(args.out))
    return 0


def cmd_ablate(args) -> int:
    if not args.grid:
        print("ablate: at least one --grid key=v1,v2 axis is required",
              file=sys.stderr)
        return 2
    base = load_config(args.config, args.set or [])
    axes: list[tuple[str, list[str]]] = []
    for item in args.grid:
        key, _, values = item.partition("=")
        vals = [v for v in values.split(",") if v]
        if not key or not vals:
            print(f"ablate: bad --grid '{item}'", file=sys.stderr)
            return 2
        axes.append((key.strip(), vals))

    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    results = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        tag = "_".join(f"{k.split('.')[-1]}-{v}" for (k, _), v in zip(axes, combo))
        cfg_dict = dict(base)
        for (key, _), value in zip(axes, combo):
            cfg_dict[key] = value
        try:
            sinks = run_experiment(cfg_dict, out_root / tag)
            final = sinks.rows[-1]
            results.append((tag, dict(zip((k for k, _ in axes), combo)), final))
        except Exception as e:  # record and continue with the other runs
            print(f"run {tag} failed: {e}", file=sys.stderr)
            with open(out_root / "failures.log", "a") as f:
                f.write(f"{tag}: {e}\n")

    with open(out_root / "comparison.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["run"] + [k for k, _ in axes]
                   + ["final_energy_dist", "final_aux_reward"])
        for tag, setting, final in results:
            w.writerow([tag] + [setting[k] for k, _ in axes]
                       + [_fmt(final.energy_dist), _fmt(final.aux_reward_mean)])

    # one grouped plot per ablation axis: final energy distance vs axis value
    for i, (key, vals) in enumerate(axes):
        series: dict[str, list[tuple[float, float]]] = {}
        for tag, setting, final in results:
            label = ", ".join(f"{k.split('.')[-1]}={setting[k]}"
                              for k, _ in axes if k != key) or "all"
            series.setdefault(label, []).append(
                (vals.index(setting[key]), final.energy_dist))
        emit_plot(series, out_root / f"ablation_{key.split('.')[-1]}.svg",
                  f"Final energy distance vs {key}", key, "energy distance")
    return 0 if len(results) == len(list(itertools.product(*(v for _, v in axes)))) else 1


def cmd_diagnose(args) -> int:
    cfg_dict = load_config(args.config, args.set or [])
    cfg = build_train_config(cfg_dict)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    # score-difference variance versus diffused timestep, against the freshly
    # initialized fake network
    state = init_trainer_state(cfg)
    stream = RngStream(cfg.seed).child("diagnose")
    x0 = gmm_sample(cfg.spec, stream.child("x0"), 64)
    curve = rs_variance_curve(
        cfg.spec, lambda x, tp: fake_score(state.fake, x, tp),
        x0, [0.1, 0.3, 0.5, 0.7, 0.9], 256, stream)
    with open(out_dir / "rs_variance.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["tprime", "rs_std"])
        for tp, s in curve:
            w.writerow([_fmt(tp), _fmt(s)])
    emit_plot({"std of score difference": curve}, out_dir / "rs_variance.svg",
              "Score-difference spread vs diffused timestep",
              "t'", "mean per-coordinate std")

    cases = equivalence_suite(n_instances=8, seed=cfg.seed)
    worst = max(c.rel_err for c in cases)
    ok = worst < 1e-6
    print(f"gradient equivalence: {'PASS' if ok else 'FAIL'} "
          f"(max rel err {worst:.3e} over {len(cases)} cases)")
    print(f"variance curve written to {out_dir / 'rs_variance.csv'}")
    return 0 if ok else 1


def cmd_plot(args) -> int:
    path = Path(args.metrics)
    if not path.exists():
        print(f"plot: metrics file not found: {path}", file=sys.stderr)
        return 2
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
    if not rows:
        print(f"plot: no data rows in {path}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for col in rows[0].keys():
        if col == "iter":
            continue
        pts = [(float(r["iter"]), float(r[col])) for r in rows]
        emit_plot({col: pts}, out_dir / f"{col}.svg", col, "iteration", col)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dmreward",
        description="Distillation-as-reward training on analytic mixture teachers")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="config file path")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--out", default="out", help="output directory")

    sp = sub.add_parser("train", help="run one training experiment")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("ablate", help="run a cross-product of config settings")
    common(sp)
    sp.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                    help="ablation axis (repeatable)")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("diagnose", help="variance curve and gradient checks")
    common(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("plot", help="render SVG charts from a metrics.csv")
    sp.add_argument("metrics", help="path to metrics.csv")
    sp.add_argument("--out", default="out", help="output directory")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(str(e), file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
