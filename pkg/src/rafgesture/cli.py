"""Command-line entry point: generate, features, train, eval, bench, inspect.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import container
from .bench import bench_csv, op_count_dict, op_counts, run_benchmark
from .dsp import preprocess_frames
from .features import (FEATURE_NAMES, FeatureScaler, fit_scaler, read_features_csv,
                       write_features_csv)
from .nn import GruModel, NonFiniteGradient, TrainConfig, evaluate, train
from .pipeline import PipelineVariant, extract_dataset, make_splits, process_recording, worker_count
from .radar import GestureClass, RadarConfig, random_gesture_params, synth_gesture_recording
from .raf import RafConfig, detect_frames

log = logging.getLogger("rafgesture")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def add_output(self, path):
        self.outputs[str(path)] = sha256(path)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


def _splits_path(dataset) -> Path:
    return Path(str(dataset) + ".splits.json")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out / "manifest.json" if out.is_dir() else Path(str(out) + ".manifest.json")


def load_splits(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError as exc:
        raise container.DataError(f"split index not found: {path}") from exc
    for k in ("train", "val", "test", "labels"):
        if k not in d:
            raise container.DataError(f"split index lacks {k!r}")
    return d


def _raf_config(args) -> RafConfig:
    return RafConfig(alpha=args.alpha, v_th=args.v_th, input_gain=args.input_gain)


def _add_raf_flags(p):
    d = RafConfig()
    p.add_argument("--alpha", type=float, default=d.alpha, help="RAF decay rate")
    p.add_argument("--v-th", type=float, default=d.v_th, help="RAF spike threshold")
    p.add_argument("--input-gain", type=float, default=d.input_gain, help="RAF input drive gain")


# --- generate -------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.per_class <= 0:
        raise UsageError("empty dataset")
    radar = RadarConfig(n_frames=args.n_frames)
    rng = np.random.default_rng(args.seed)
    labels = []
    out = Path(args.out)
    with container.DatasetWriter(out) as w:
        for kind in GestureClass:
            for _ in range(args.per_class):
                params = random_gesture_params(rng, args.noise)
                if args.no_body:
                    params = type(params)(**{**asdict(params), "body_range": None})
                rec_seed = int(rng.integers(2**31))
                w.write(synth_gesture_recording(radar, kind, params, seed=rec_seed))
                labels.append(int(kind))
    splits = make_splits(labels, args.seed)
    splits.update(seed=args.seed, ratios=[0.58, 0.17, 0.25], labels=labels)
    sp = _splits_path(out)
    with open(sp, "w", encoding="utf-8") as fh:
        json.dump(splits, fh)
        fh.write("\n")
    m = RunManifest("generate", {"radar": asdict(radar), "per_class": args.per_class, "noise": args.noise,
                                 "body": not args.no_body}, [args.seed])
    m.add_output(out)
    m.add_output(sp)
    m.write(_manifest_path(out))
    print(f"wrote {len(labels)} recordings to {out} "
          f"(train {len(splits['train'])} / val {len(splits['val'])} / test {len(splits['test'])})")
    return 0


# --- features -------------------------------------------------------------

def cmd_features(args) -> int:
    variant = PipelineVariant.parse(args.detector)
    raf_cfg = _raf_config(args)
    splits_file = Path(args.splits) if args.splits else _splits_path(args.input)
    splits = load_splits(splits_file)
    n = container.dataset_size(args.input)
    if n == 0:
        raise container.DataError("dataset holds no recordings")
    if n != len(splits["labels"]):
        raise container.DataError("split index does not match the dataset")
    d = extract_dataset(container.iter_recordings(args.input), [variant], raf_cfg=raf_cfg)[variant]
    if d.labelling_failures:
        log.warning("%d gesture recordings had no gesture frame and were labelled all-Background",
                    d.labelling_failures)
    write_features_csv(args.out, range(n), d.features, d.labels)
    scaler = fit_scaler(d.features[np.array(splits["train"])])
    scaler.save(args.scaler)
    m = RunManifest("features", {"raf": asdict(raf_cfg), "detector": variant.value,
                                 "labelling_failures": d.labelling_failures},
                    inputs={"dataset": str(args.input), "splits": str(splits_file)})
    m.add_output(args.out)
    m.add_output(args.scaler)
    m.write(_manifest_path(args.out))
    print(f"wrote features for {n} recordings ({variant.value}) to {args.out}")
    return 0


# --- train ----------------------------------------------------------------

def _resolve_splits(args, features_path) -> dict:
    if args.splits:
        return load_splits(args.splits)
    mp = _manifest_path(features_path)
    if not mp.exists():
        raise container.DataError("no --splits given and no features manifest to find it")
    return load_splits(RunManifest.read(mp).inputs["splits"])


def _load_training_data(features_path, scaler_path, splits):
    ids, feats, labels = read_features_csv(features_path)
    if list(ids) != list(range(len(splits["labels"]))):
        raise container.DataError("features file does not cover the split index")
    scaler = FeatureScaler.load(scaler_path) if scaler_path else fit_scaler(feats[splits["train"]])
    return feats, labels, np.asarray(splits["labels"]), scaler


def _train_one(job):
    seed, cfg, X, Y, Xv, Yv, rv, scaler = job
    return train((X, Y), (Xv, Yv, rv), cfg, seed=seed, scaler=scaler)


def cmd_train(args) -> int:
    splits = _resolve_splits(args, args.features)
    feats, labels, rec_labels, scaler = _load_training_data(args.features, args.scaler, splits)
    cfg = TrainConfig(lr=args.lr, weight_decay=args.weight_decay, batch_size=args.batch_size,
                      max_epochs=args.epochs, patience=args.patience, n_seeds=args.seeds)
    tr, va = np.array(splits["train"]), np.array(splits["val"])
    X = scaler.transform(feats)
    seeds = [args.seed_base + i for i in range(args.seeds)]
    jobs = [(s, cfg, X[tr], labels[tr], X[va], labels[va], rec_labels[va], scaler) for s in seeds]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = RunManifest("train", {"train": asdict(cfg)}, seeds,
                    inputs={"features": str(args.features), "scaler": str(args.scaler or "")})
    for s, (model, hist) in zip(seeds, results):
        mp = out / f"model_seed{s}.json"
        model.save(mp, {"seed": s, "best_epoch": hist.best_epoch})
        lp = out / f"train_log_seed{s}.csv"
        hist.to_csv(lp)
        m.add_output(mp)
        m.add_output(lp)
        print(f"seed {s}: best epoch {hist.best_epoch}, val loss {hist.val_loss[hist.best_epoch]:.4f}, "
              f"{hist.epochs_run} epochs{' (early stop)' if hist.stopped_early else ''}")
    m.write(out / "manifest.json")
    return 0


# --- eval -----------------------------------------------------------------

def _model_files(models_dir) -> list:
    files = sorted(Path(models_dir).glob("model_*.json"))
    if not files:
        raise container.DataError(f"no model files in {models_dir}")
    return files


def cmd_eval(args) -> int:
    splits = _resolve_splits(args, args.features)
    ids, feats, _ = read_features_csv(args.features)
    te = np.array(splits["test"])
    rec_labels = np.asarray(splits["labels"])[te]
    files = _model_files(args.models)
    models = [GruModel.load(f) for f in files]
    report = evaluate(models, feats[te], rec_labels)
    out = Path(args.out or args.models)
    out.mkdir(parents=True, exist_ok=True)
    for f, cm in zip(files, report.confusions):
        with open(out / f"confusion_{f.stem.removeprefix('model_')}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\predicted"] + [g.name for g in GestureClass])
            for g, row in zip(GestureClass, cm):
                w.writerow([g.name] + [int(v) for v in row])
    rep = {"models": [f.name for f in files], "accuracies": report.accuracies,
           "mean": report.mean, "std": report.std, "n_test_recordings": int(len(te))}
    with open(out / "eval_report.json", "w", encoding="utf-8") as fh:
        json.dump(rep, fh, indent=2)
        fh.write("\n")
    print(report.summary())
    return 0


# --- bench ----------------------------------------------------------------

def cmd_bench(args) -> int:
    variants = [PipelineVariant.parse(v) for v in args.variants.split(",") if v.strip()]
    if not variants:
        raise UsageError("no variants selected")
    n = container.dataset_size(args.dataset)
    timing = [container.read_recording(args.dataset, i) for i in range(min(args.timing_recordings, n))]
    models = features = labels = None
    if args.models:
        models = {}
        for v in variants:
            sub = Path(args.models) / v.cli_name
            models[v] = [GruModel.load(f) for f in _model_files(sub)]
        splits = load_splits(args.splits or _splits_path(args.dataset))
        te = set(splits["test"])
        test_recs = (r for i, r in enumerate(container.iter_recordings(args.dataset)) if i in te)
        extracted = extract_dataset(test_recs, variants)
        features = {v: extracted[v].features for v in variants}
        labels = extracted[variants[0]].recording_labels
    rows = run_benchmark(timing, variants, args.repetitions, models, features, labels)
    text = bench_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# --- inspect --------------------------------------------------------------

def cmd_inspect(args) -> int:
    n = container.dataset_size(args.dataset)
    if not 0 <= args.recording < n:
        raise container.DataError(f"recording {args.recording} out of range (dataset holds {n})")
    rec = container.read_recording(args.dataset, args.recording)
    raf_cfg = _raf_config(args)
    _, counts, first = detect_frames(preprocess_frames(rec.frames()), raf_cfg)
    res = process_recording(rec, PipelineVariant.RAF_GOERTZEL, raf_cfg=raf_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"raster_{args.recording}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "neuron", "spike_count", "first_spike_step"])
        for f in range(counts.shape[0]):
            for k in range(counts.shape[1]):
                w.writerow([f, k, int(counts[f, k]), "" if first[f, k] < 0 else int(first[f, k])])
    with open(out / f"features_{args.recording}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", *FEATURE_NAMES, "label"])
        for f, (row, lab) in enumerate(zip(res.features, res.labels)):
            w.writerow([f, *(repr(float(v)) for v in row), int(lab)])
    print(f"recording {args.recording} ({rec.label.name}): gesture frame {res.gesture_frame}")
    return 0


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rafgesture", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic RAFD dataset and split index")
    g.add_argument("--out", required=True)
    g.add_argument("--per-class", type=int, default=100)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--n-frames", type=int, default=100)
    g.add_argument("--no-body", action="store_true", help="omit the static body reflection")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("features", help="extract per-frame features and fit the scaler")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--scaler", required=True)
    f.add_argument("--detector", default="raf", choices=["raf", "fft", "fft-doppler"])
    f.add_argument("--splits")
    _add_raf_flags(f)
    f.set_defaults(func=cmd_features)

    d = TrainConfig()
    t = sub.add_parser("train", help="train one GRU per seed")
    t.add_argument("--features", required=True)
    t.add_argument("--scaler")
    t.add_argument("--splits")
    t.add_argument("--out", required=True)
    t.add_argument("--seeds", type=int, default=d.n_seeds)
    t.add_argument("--seed-base", type=int, default=0)
    t.add_argument("--lr", type=float, default=d.lr)
    t.add_argument("--weight-decay", type=float, default=d.weight_decay)
    t.add_argument("--batch-size", type=int, default=d.batch_size)
    t.add_argument("--epochs", type=int, default=d.max_epochs)
    t.add_argument("--patience", type=int, default=d.patience)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="recording-level accuracy of trained models on the test split")
    e.add_argument("--models", required=True)
    e.add_argument("--features", required=True)
    e.add_argument("--splits")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="op counts, timing and accuracy per pipeline variant")
    b.add_argument("--dataset", required=True)
    b.add_argument("--models", help="directory with one sub-directory of models per variant (raf, fft, fft-doppler)")
    b.add_argument("--variants", default="raf,fft,fft-doppler")
    b.add_argument("--repetitions", type=int, default=3)
    b.add_argument("--timing-recordings", type=int, default=5)
    b.add_argument("--splits")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("inspect", help="spike raster and feature trajectory of one recording")
    i.add_argument("--dataset", required=True)
    i.add_argument("--recording", type=int, required=True)
    i.add_argument("--out", required=True)
    _add_raf_flags(i)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonFiniteGradient, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (container.DataError, OSError, IndexError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
