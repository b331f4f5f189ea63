#!/usr/bin/env python3
"""Desk-scale experiment: generate, extract, train and evaluate each detector, then benchmark.

    python scripts/run_desk_benchmark.py --workdir runs/desk

Set RAFR_THREADS to use more than one process.
"""

import argparse
import json
import sys
from pathlib import Path

from rafgesture.cli import main
from rafgesture.experiment import DeskScaleConfig, run_desk_scale


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workdir", default="runs/desk")
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--detectors", default="raf,fft,fft-doppler")
    p.add_argument("--bench-repetitions", type=int, default=3)
    return p.parse_args(argv)


def run(args):
    dets = tuple(d.strip() for d in args.detectors.split(",") if d.strip())
    cfg = DeskScaleConfig(per_class=args.per_class, seed=args.seed, noise=args.noise,
                          n_seeds=args.seeds, detectors=dets, keep_dataset=True)
    wd = Path(args.workdir)
    res = run_desk_scale(wd, cfg)
    for det, rep in res.reports.items():
        print(f"{det:12s} mean gesture accuracy {100 * rep['mean']:.2f}% +- {100 * rep['std']:.2f}%")
    if {"raf", "fft"} <= set(dets):
        print(f"RAF vs FFT-detect gap: {100 * abs(res.accuracy('raf') - res.accuracy('fft')):.2f} pp")

    # bench expects one model directory per variant
    models = wd / "bench_models"
    models.mkdir(exist_ok=True)
    for det in dets:
        link = models / det
        if not link.exists():
            link.symlink_to((wd / f"models_{det}").resolve())
    code = main(["bench", "--dataset", str(wd / "gestures.rafd"), "--models", str(models),
                 "--variants", ",".join(dets), "--repetitions", str(args.bench_repetitions),
                 "--out", str(wd / "bench.csv")])
    print((wd / "bench.csv").read_text(), end="")
    (wd / "summary.json").write_text(json.dumps(res.reports, indent=2) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(run(parse_args()))
