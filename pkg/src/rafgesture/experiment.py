"""Desk-scale end-to-end run driven through the command-line interface."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .cli import main, sha256


@dataclass
class DeskScaleConfig:
    per_class: int = 100
    seed: int = 42
    noise: float = 0.05
    n_seeds: int = 10
    detectors: tuple = ("raf", "fft")
    epochs: int = 150
    keep_dataset: bool = False


@dataclass
class DeskScaleResult:
    workdir: Path
    reports: dict = field(default_factory=dict)  # detector -> eval_report.json content
    hashes: dict = field(default_factory=dict)  # relative path -> sha256

    def accuracy(self, detector: str) -> float:
        return self.reports[detector]["mean"]


def _run(argv):
    code = main([str(a) for a in argv])
    if code != 0:
        raise RuntimeError(f"rafgesture {argv[0]} exited with code {code}")


def run_desk_scale(workdir, cfg: DeskScaleConfig = DeskScaleConfig()) -> DeskScaleResult:
    """generate -> features -> train -> eval for each detector; returns reports and file hashes."""
    wd = Path(workdir).resolve()
    wd.mkdir(parents=True, exist_ok=True)
    # relative paths keep manifests identical between work directories
    cwd = os.getcwd()
    os.chdir(wd)
    try:
        res = _run_all(cfg)
    finally:
        os.chdir(cwd)
    res.workdir = wd
    for p in sorted(wd.rglob("*")):
        if p.is_file():
            res.hashes[str(p.relative_to(wd))] = sha256(p)
    return res


def _run_all(cfg: DeskScaleConfig) -> DeskScaleResult:
    wd = Path(".")
    data = wd / "gestures.rafd"
    _run(["generate", "--out", data, "--per-class", cfg.per_class, "--seed", cfg.seed, "--noise", cfg.noise])
    res = DeskScaleResult(wd)
    for det in cfg.detectors:
        feats, scaler, models = wd / f"features_{det}.csv", wd / f"scaler_{det}.json", wd / f"models_{det}"
        _run(["features", "--in", data, "--out", feats, "--scaler", scaler, "--detector", det])
        _run(["train", "--features", feats, "--scaler", scaler, "--out", models,
              "--seeds", cfg.n_seeds, "--epochs", cfg.epochs])
        _run(["eval", "--models", models, "--features", feats])
        res.reports[det] = json.loads((models / "eval_report.json").read_text())
    if not cfg.keep_dataset:
        os.remove(data)
    return res
