"""GRU sequence classifier with hand-written BPTT, NLL loss, Adam and early-stopping training.

The cell uses separate input and hidden biases for every gate:

    r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
    z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
    n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h

followed by a linear head and log-softmax at every time step.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import FeatureScaler
from .radar import GestureClass

log = logging.getLogger(__name__)

N_CLASSES = len(GestureClass)


def param_count(model_or_input=None, hidden_size: int = 16, n_classes: int = 6, dual_bias: bool = True) -> int:
    """Trainable parameter count of a GRU + linear head.

    Accepts a :class:`GruModel` or the three sizes.
    """
    if isinstance(model_or_input, GruModel):
        return model_or_input.params.size
    i = 5 if model_or_input is None else int(model_or_input)
    h, c = hidden_size, n_classes
    biases = 2 * h if dual_bias else h
    return 3 * (h * i + h * h + biases) + c * h + c


def _layout(i: int, h: int, c: int):
    return (("W_ir", (h, i)), ("W_iz", (h, i)), ("W_in", (h, i)),
            ("W_hr", (h, h)), ("W_hz", (h, h)), ("W_hn", (h, h)),
            ("b_ir", (h,)), ("b_iz", (h,)), ("b_in", (h,)),
            ("b_hr", (h,)), ("b_hz", (h,)), ("b_hn", (h,)),
            ("W_out", (c, h)), ("b_out", (c,)))


class GruModel:
    """All parameters live in one flat float64 vector; named tensors are views into it."""

    def __init__(self, input_size: int = 5, hidden_size: int = 16, n_classes: int = N_CLASSES,
                 params: Optional[np.ndarray] = None, scaler: Optional[FeatureScaler] = None):
        self.input_size, self.hidden_size, self.n_classes = input_size, hidden_size, n_classes
        self.layout = _layout(input_size, hidden_size, n_classes)
        n = sum(math.prod(s) for _, s in self.layout)
        if params is None:
            params = np.zeros(n)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {params.shape}")
        self.params = params.copy()
        self.scaler = scaler

    @classmethod
    def initialise(cls, seed: int, input_size: int = 5, hidden_size: int = 16,
                   n_classes: int = N_CLASSES) -> "GruModel":
        m = cls(input_size, hidden_size, n_classes)
        bound = 1.0 / math.sqrt(hidden_size)
        m.params[:] = np.random.default_rng(seed).uniform(-bound, bound, m.params.size)
        return m

    def tensors(self, flat: Optional[np.ndarray] = None) -> dict:
        flat = self.params if flat is None else flat
        out, o = {}, 0
        for name, shape in self.layout:
            size = math.prod(shape)
            out[name] = flat[o:o + size].reshape(shape)
            o += size
        return out

    def blocks(self, flat: Optional[np.ndarray] = None):
        """Gate-stacked views (W_i [3H,I], W_h [3H,H], b_i, b_h, W_out, b_out)."""
        flat = self.params if flat is None else flat
        i, h, c = self.input_size, self.hidden_size, self.n_classes
        o = 0
        parts = []
        for shape in ((3 * h, i), (3 * h, h), (3 * h,), (3 * h,), (c, h), (c,)):
            size = math.prod(shape)
            parts.append(flat[o:o + size].reshape(shape))
            o += size
        return parts

    def copy(self) -> "GruModel":
        return GruModel(self.input_size, self.hidden_size, self.n_classes, self.params, self.scaler)

    def to_dict(self, extra: Optional[dict] = None) -> dict:
        d = {
            "config": {"input_size": self.input_size, "hidden_size": self.hidden_size,
                       "n_classes": self.n_classes, "layout": [n for n, _ in self.layout]},
            "parameters": {k: v.ravel().tolist() for k, v in self.tensors().items()},
        }
        if self.scaler is not None:
            d["scaler"] = json.loads(self.scaler.to_json())
        if extra:
            d["config"].update(extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GruModel":
        cfg = d["config"]
        m = cls(cfg["input_size"], cfg["hidden_size"], cfg["n_classes"])
        t = m.tensors()
        for name, _ in m.layout:
            t[name][...] = np.asarray(d["parameters"][name], dtype=np.float64).reshape(t[name].shape)
        if "scaler" in d:
            m.scaler = FeatureScaler.from_dict(d["scaler"])
        return m

    def save(self, path, extra: Optional[dict] = None):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(extra), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "GruModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    s = logits - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def _forward(model: GruModel, X: np.ndarray):
    W_i, W_h, b_i, b_h, W_out, b_out = model.blocks()
    B, T, _ = X.shape
    H = model.hidden_size
    gi = X @ W_i.T + b_i
    hs = np.zeros((B, T + 1, H))
    r = np.empty((B, T, H))
    z = np.empty((B, T, H))
    n = np.empty((B, T, H))
    ghn = np.empty((B, T, H))
    h = hs[:, 0]
    for t in range(T):
        gh = h @ W_h.T + b_h
        g = gi[:, t]
        r[:, t] = _sigmoid(g[:, :H] + gh[:, :H])
        z[:, t] = _sigmoid(g[:, H:2 * H] + gh[:, H:2 * H])
        ghn[:, t] = gh[:, 2 * H:]
        n[:, t] = np.tanh(g[:, 2 * H:] + r[:, t] * ghn[:, t])
        h = (1.0 - z[:, t]) * n[:, t] + z[:, t] * h
        hs[:, t + 1] = h
    logp = _log_softmax(hs[:, 1:] @ W_out.T + b_out)
    return logp, (X, hs, r, z, n, ghn)


def _as_batch(sequence):
    X = np.asarray(sequence, dtype=np.float64)
    return X[None] if X.ndim == 2 else X


def gru_forward(model: GruModel, sequence: np.ndarray) -> np.ndarray:
    """Per-step log-probabilities, [T][C] for one sequence or [B][T][C] for a batch."""
    X = _as_batch(sequence)
    if X.shape[-1] != model.input_size:
        raise ValueError(f"expected {model.input_size} input features, got {X.shape[-1]}")
    logp, _ = _forward(model, X)
    return logp[0] if np.ndim(sequence) == 2 else logp


def hidden_states(model: GruModel, sequence: np.ndarray) -> np.ndarray:
    _, cache = _forward(model, _as_batch(sequence))
    return cache[1][:, 1:]


def nll_loss(log_probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean over steps of -log p(label); batches average the per-sequence losses."""
    lp = np.asarray(log_probs)
    y = np.asarray(labels)
    if np.any(y < 0) or np.any(y >= lp.shape[-1]):
        raise ValueError("label out of range")
    picked = np.take_along_axis(lp, y[..., None], axis=-1)[..., 0]
    return float(-picked.mean(axis=-1).mean())


def loss_and_grad(model: GruModel, X: np.ndarray, Y: np.ndarray):
    """Batch NLL loss and its gradient as a flat vector in the parameter layout."""
    X = _as_batch(X)
    Y = np.asarray(Y)
    Y = Y[None] if Y.ndim == 1 else Y
    W_i, W_h, b_i, b_h, W_out, b_out = model.blocks()
    B, T, I = X.shape
    H, C = model.hidden_size, model.n_classes
    logp, (_, hs, r, z, n, ghn) = _forward(model, X)
    loss = nll_loss(logp, Y)

    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, Y[..., None], np.take_along_axis(dlogits, Y[..., None], -1) - 1.0, -1)
    dlogits /= B * T
    h_out = hs[:, 1:]
    dW_out = dlogits.reshape(-1, C).T @ h_out.reshape(-1, H)
    db_out = dlogits.sum(axis=(0, 1))
    dh_out = dlogits @ W_out

    dgi = np.empty((B, T, 3 * H))
    dW_h = np.zeros((3 * H, H))
    db_h = np.zeros(3 * H)
    dh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dh_out[:, t]
        hp = hs[:, t]
        rt, zt, nt = r[:, t], z[:, t], n[:, t]
        dn = dh * (1.0 - zt)
        dz = dh * (hp - nt)
        da_n = dn * (1.0 - nt * nt)
        da_z = dz * zt * (1.0 - zt)
        da_r = da_n * ghn[:, t] * rt * (1.0 - rt)
        dgh = np.concatenate((da_r, da_z, da_n * rt), axis=1)
        dgi[:, t] = np.concatenate((da_r, da_z, da_n), axis=1)
        dW_h += dgh.T @ hp
        db_h += dgh.sum(axis=0)
        dh = dh * zt + dgh @ W_h
    dW_i = dgi.reshape(-1, 3 * H).T @ X.reshape(-1, I)
    db_i = dgi.sum(axis=(0, 1))
    grad = np.concatenate([dW_i.ravel(), dW_h.ravel(), db_i, db_h, dW_out.ravel(), db_out])
    return loss, grad


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1.58e-3
    weight_decay: float = 1.6e-5
    batch_size: int = 32
    max_epochs: int = 150
    patience: int = 10
    n_seeds: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden_size: int = 16

    def __post_init__(self):
        for name in ("lr", "batch_size", "max_epochs", "patience", "n_seeds", "hidden_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, cfg: TrainConfig = TrainConfig()):
    """One Adam update with L2 weight decay folded into the gradient. Returns ``(params, state)``."""
    if not np.all(np.isfinite(grads)):
        bad = int(np.count_nonzero(~np.isfinite(grads)))
        raise NonFiniteGradient(f"{bad} non-finite gradient entries at step {state.t + 1}")
    g = grads + cfg.weight_decay * params
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    return params - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps), AdamState(m, v, t)


def recording_prediction(log_probs: np.ndarray) -> GestureClass:
    """Majority vote over frames not predicted as BACKGROUND.

    Ties go to the class with the larger summed log-probability over its own
    voting frames.
    """
    lp = np.asarray(log_probs)
    pred = lp.argmax(axis=-1)
    votes = pred[pred != GestureClass.BACKGROUND]
    if votes.size == 0:
        return GestureClass.BACKGROUND
    counts = np.bincount(votes, minlength=lp.shape[-1])
    tied = np.flatnonzero(counts == counts.max())
    if tied.size == 1:
        return GestureClass(int(tied[0]))
    score = [lp[pred == c, c].sum() for c in tied]
    return GestureClass(int(tied[int(np.argmax(score))]))


def gesture_accuracy(predicted: Sequence[int], actual: Sequence[int]) -> float:
    """Recording-level accuracy over gesture (non-BACKGROUND) recordings."""
    p, a = np.asarray(predicted), np.asarray(actual)
    mask = a != GestureClass.BACKGROUND
    if not mask.any():
        raise ValueError("no gesture recordings to score")
    return float(np.mean(p[mask] == a[mask]))


def predict_recordings(model: GruModel, X: np.ndarray, batch: int = 256) -> np.ndarray:
    out = []
    for s in range(0, len(X), batch):
        logp = gru_forward(model, X[s:s + batch])
        out.extend(int(recording_prediction(lp)) for lp in logp)
    return np.array(out, dtype=np.int64)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,val_loss,val_acc\n")
            for e, (a, b, c) in enumerate(zip(self.train_loss, self.val_loss, self.val_acc)):
                fh.write(f"{e},{a!r},{b!r},{c!r}\n")


def _sequence_loss(model: GruModel, X, Y, batch: int = 256) -> float:
    total = 0.0
    for s in range(0, len(X), batch):
        lp = gru_forward(model, X[s:s + batch])
        total += nll_loss(lp, Y[s:s + batch]) * len(lp)
    return total / len(X)


def train(train_set, val_set, cfg: TrainConfig = TrainConfig(), seed: int = 0,
          scaler: Optional[FeatureScaler] = None):
    """Mini-batch Adam with early stopping on validation loss.

    ``train_set`` is ``(X, Y)`` and ``val_set`` is ``(X, Y, recording_labels)``;
    features must already be scaled. Returns ``(best_model, history)``.
    """
    X, Y = (np.asarray(a) for a in train_set[:2])
    Xv, Yv, rec_v = (np.asarray(a) for a in val_set[:3])
    if len(X) == 0 or len(Xv) == 0:
        raise ValueError("empty training or validation split")
    rng = np.random.default_rng(seed)
    model = GruModel.initialise(int(rng.integers(2**32)), X.shape[-1], cfg.hidden_size, N_CLASSES)
    model.scaler = scaler
    state = AdamState.zeros(model.params.size)
    hist = TrainHistory()
    best, best_loss, since = model.copy(), math.inf, 0
    has_gestures = np.any(rec_v != GestureClass.BACKGROUND)
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(X))
        seen, total = 0, 0.0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grad = loss_and_grad(model, X[idx], Y[idx])
            try:
                model.params, state = adam_step(model.params, grad, state, cfg)
            except NonFiniteGradient as exc:
                log.warning("epoch %d aborted: %s", epoch, exc)
                break
            total += loss * len(idx)
            seen += len(idx)
        hist.train_loss.append(total / max(seen, 1))
        val_loss = _sequence_loss(model, Xv, Yv)
        hist.val_loss.append(val_loss)
        hist.val_acc.append(gesture_accuracy(predict_recordings(model, Xv), rec_v) if has_gestures else math.nan)
        if val_loss < best_loss:
            best, best_loss, since = model.copy(), val_loss, 0
            hist.best_epoch = epoch
        else:
            since += 1
            if since >= cfg.patience:
                hist.stopped_early = True
                break
    if not math.isfinite(best_loss):
        raise NonFiniteGradient("validation loss never became finite")
    return best, hist


@dataclass
class EvalReport:
    accuracies: list
    confusions: list

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def summary(self) -> str:
        return f"mean accuracy {100 * self.mean:.2f}% +- {100 * self.std:.2f}% over {len(self.accuracies)} models"


def confusion_matrix(predicted, actual, n_classes: int = N_CLASSES) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(actual), np.asarray(predicted)), 1)
    return cm


def evaluate(models: Sequence[GruModel], features: np.ndarray, recording_labels: np.ndarray) -> EvalReport:
    """Recording-level gesture accuracy of each model; features are unscaled (each model's scaler applies)."""
    if len(models) == 0:
        raise ValueError("no models to evaluate")
    if len(features) == 0:
        raise ValueError("empty test set")
    accs, cms = [], []
    for m in models:
        x = m.scaler.transform(features) if m.scaler is not None else features
        pred = predict_recordings(m, x)
        accs.append(gesture_accuracy(pred, recording_labels))
        cms.append(confusion_matrix(pred, recording_labels, m.n_classes))
    return EvalReport(accs, cms)


def train_config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
