"""Driving the harness programmatically: a tiny ablation grid.

Runs the command-line entry point in-process over a group-normalization
on/off grid at a toy round count, then prints the comparison table it wrote.
The same thing from a shell:

    dmreward ablate --grid train.gn=on,off --out out/ablate \\
        --set train.iterations=200

Run:  python3 demos/06_ablation_cli.py
"""
import tempfile
from pathlib import Path

from dmreward.harness.cli import main

out = Path(tempfile.mkdtemp(prefix="dmreward_ablate_"))
rc = main([
    "ablate", "--out", str(out), "--grid", "train.gn=on,off",
    "--set", "train.iterations=200", "--set", "train.warmup=100",
    "--set", "train.eval_every=100", "--set", "train.eval_samples=512",
])
print(f"exit code {rc}; outputs under {out}\n")
print((out / "comparison.csv").read_text())
for sub in sorted(out.iterdir()):
    if sub.is_dir():
        print(f"{sub.name}/: {', '.join(sorted(p.name for p in sub.iterdir()))}")
