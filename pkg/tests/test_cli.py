import csv
import json
import shutil

import numpy as np
import pytest

from rafgesture.cli import RunManifest, load_splits, main, sha256
from rafgesture.container import dataset_size, read_labels
from rafgesture.features import read_features_csv
from rafgesture.nn import GruModel

FRAMES = 40


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--out", str(d / "d.rafd"), "--per-class", "4", "--seed", "3",
                 "--n-frames", str(FRAMES)]) == 0
    for det in ("raf", "fft", "fft-doppler"):
        assert main(["features", "--in", str(d / "d.rafd"), "--out", str(d / f"f_{det}.csv"),
                     "--scaler", str(d / f"s_{det}.json"), "--detector", det]) == 0
    assert main(["train", "--features", str(d / "f_raf.csv"), "--scaler", str(d / "s_raf.json"),
                 "--out", str(d / "m"), "--seeds", "2", "--epochs", "3"]) == 0
    return d


def test_generate_outputs(work):
    assert dataset_size(work / "d.rafd") == 24
    labels = [int(x) for x in read_labels(work / "d.rafd")]
    splits = load_splits(work / "d.rafd.splits.json")
    assert splits["labels"] == labels
    assert sorted(splits["train"] + splits["val"] + splits["test"]) == list(range(24))
    m = RunManifest.read(work / "d.rafd.manifest.json")
    assert m.seeds == [3] and m.outputs[str(work / "d.rafd")] == sha256(work / "d.rafd")
    assert "timestamp" not in json.dumps(m.__dict__)


def test_generate_is_deterministic(work, tmp_path):
    assert main(["generate", "--out", str(tmp_path / "d.rafd"), "--per-class", "4", "--seed", "3",
                 "--n-frames", str(FRAMES)]) == 0
    assert sha256(tmp_path / "d.rafd") == sha256(work / "d.rafd")


def test_features_outputs(work):
    ids, feats, labels = read_features_csv(work / "f_raf.csv")
    assert feats.shape == (24, FRAMES, 5)
    assert (labels[:4] == 0).all()  # Background recordings come first
    assert (labels[4:] > 0).any(axis=1).all()
    scaler = json.loads((work / "s_raf.json").read_text())
    assert len(scaler["mean"]) == 5
    m = RunManifest.read(str(work / "f_raf.csv") + ".manifest.json")
    assert m.config["raf"]["alpha"] == 0.018 and m.config["raf"]["v_th"] == 0.02


def test_features_share_labels_across_detectors(work):
    _, _, a = read_features_csv(work / "f_raf.csv")
    _, _, b = read_features_csv(work / "f_fft.csv")
    _, _, c = read_features_csv(work / "f_fft-doppler.csv")
    assert np.array_equal(a, b) and np.array_equal(a, c)


def test_raf_flags_change_detection(work, tmp_path):
    assert main(["features", "--in", str(work / "d.rafd"), "--out", str(tmp_path / "f.csv"),
                 "--scaler", str(tmp_path / "s.json"), "--v-th", "50"]) == 0
    _, feats, _ = read_features_csv(tmp_path / "f.csv")
    assert not feats.any()  # threshold out of reach: nothing detected


def test_train_outputs(work):
    out = work / "m"
    for s in (0, 1):
        m = GruModel.load(out / f"model_seed{s}.json")
        assert m.params.size == 1206 and m.scaler is not None
        log = (out / f"train_log_seed{s}.csv").read_text().splitlines()
        assert log[0] == "epoch,train_loss,val_loss,val_acc" and len(log) == 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["seeds"] == [0, 1]
    assert man["config"]["train"]["lr"] == 1.58e-3 and man["config"]["train"]["batch_size"] == 32


def test_train_is_deterministic(work, tmp_path):
    assert main(["train", "--features", str(work / "f_raf.csv"), "--scaler", str(work / "s_raf.json"),
                 "--out", str(tmp_path / "m"), "--seeds", "2", "--epochs", "3"]) == 0
    for s in (0, 1):
        assert sha256(tmp_path / "m" / f"model_seed{s}.json") == sha256(work / "m" / f"model_seed{s}.json")


def test_eval(work, capsys):
    assert main(["eval", "--models", str(work / "m"), "--features", str(work / "f_raf.csv")]) == 0
    assert capsys.readouterr().out.startswith("mean accuracy ")
    rep = json.loads((work / "m" / "eval_report.json").read_text())
    assert len(rep["accuracies"]) == 2
    with open(work / "m" / "confusion_seed0.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 7 and len(rows[0]) == 7


def test_bench_rows(work, capsys):
    assert main(["bench", "--dataset", str(work / "d.rafd"), "--repetitions", "1",
                 "--timing-recordings", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "variant,detect_ops,feature_ops,median_us_per_frame,accuracy"
    assert len(lines) == 4
    assert [l.split(",")[1:3] for l in lines[1:]] == [["6144", "32"], ["12288", "32"], ["12288", "160"]]
    assert main(["bench", "--dataset", str(work / "d.rafd"), "--variants", "raf", "--repetitions", "1",
                 "--timing-recordings", "1"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_bench_with_models(work, tmp_path):
    (tmp_path / "models").mkdir()
    shutil.copytree(work / "m", tmp_path / "models" / "raf")
    out = tmp_path / "bench.csv"
    assert main(["bench", "--dataset", str(work / "d.rafd"), "--models", str(tmp_path / "models"),
                 "--variants", "raf", "--repetitions", "1", "--timing-recordings", "1", "--out", str(out)]) == 0
    acc = out.read_text().splitlines()[1].split(",")[-1]
    assert 0.0 <= float(acc) <= 1.0
    assert main(["bench", "--dataset", str(work / "d.rafd"), "--models", str(tmp_path / "models"),
                 "--variants", "fft", "--repetitions", "1", "--timing-recordings", "1"]) == 3


def test_inspect(work):
    out = work / "insp"
    assert main(["inspect", "--dataset", str(work / "d.rafd"), "--recording", "6", "--out", str(out)]) == 0
    with open(out / "raster_6.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["frame", "neuron", "spike_count", "first_spike_step"]
    assert len(rows) - 1 == FRAMES * 32
    with open(out / "features_6.csv") as fh:
        assert len(list(csv.reader(fh))) == FRAMES + 1


def test_inspect_background_raster_silent(work):
    out = work / "insp_bg"
    assert main(["inspect", "--dataset", str(work / "d.rafd"), "--recording", "0", "--out", str(out)]) == 0
    with open(out / "raster_0.csv") as fh:
        counts = [int(r["spike_count"]) for r in csv.DictReader(fh)]
    assert sum(counts) == 0


def test_exit_codes(work, tmp_path):
    assert main(["generate", "--out", str(tmp_path / "e.rafd"), "--per-class", "0"]) == 2
    assert main(["inspect", "--dataset", str(work / "d.rafd"), "--recording", "99", "--out", str(tmp_path)]) == 3
    assert main(["inspect", "--dataset", str(tmp_path / "missing.rafd"), "--recording", "0",
                 "--out", str(tmp_path)]) == 3
    assert main(["features", "--in", str(work / "d.rafd"), "--out", str(tmp_path / "f.csv"),
                 "--scaler", str(tmp_path / "s.json"), "--splits", str(tmp_path / "none.json")]) == 3
    assert main(["eval", "--models", str(tmp_path), "--features", str(work / "f_raf.csv")]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["features", "--in", "x", "--out", "y", "--scaler", "z", "--detector", "cnn"])
    assert exc.value.code == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_code(work, tmp_path):
    code = main(["train", "--features", str(work / "f_raf.csv"), "--scaler", str(work / "s_raf.json"),
                 "--out", str(tmp_path / "m"), "--seeds", "1", "--epochs", "2", "--lr", "1e308"])
    assert code == 4


def test_bad_usage_exit_code(work, tmp_path):
    code = main(["train", "--features", str(work / "f_raf.csv"), "--out", str(tmp_path / "m"),
                 "--seeds", "1", "--epochs", "0"])
    assert code == 2
