"""LSTM regressor from (actuation, raw strain) streams to degree of curvature.

Network: input normalisation -> input dropout (train only) -> one LSTM layer
-> dense output in degrees. Gate blocks in ``W``/``b`` are stacked in the
order input, forget, cell, output; ``W`` acts on ``[x; h_prev]``.

Training uses truncated BPTT over consecutive windows of ``seq_len`` steps.
The training split is cut into ``batch_size`` contiguous lanes that are
walked in parallel, carrying (h, c) from one window into the next so the
network sees the same long-stream state it will see at inference time.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

import numpy as np

UNI_FEATURES = ("duty_A", "raw_A")
BI_FEATURES = ("duty_A", "duty_B", "raw_A", "raw_B")


class DimensionMismatch(ValueError):
    pass


class Diverged(FloatingPointError):
    pass


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------- datasets


@dataclass
class Dataset:
    """A recorded frame stream with ground truth and contiguous splits.

    Columns are equal-length arrays. ``splits`` maps split name to a slice.
    ``session`` numbers the experiment each frame came from.
    """

    mode: str
    t: np.ndarray
    raw_A: np.ndarray
    raw_B: np.ndarray
    duty_A: np.ndarray
    duty_B: np.ndarray
    q_deg: np.ndarray
    session: np.ndarray | None = None
    splits: dict = field(default_factory=dict)
    # skin read counters (A, B) accumulated while recording
    reads: tuple = (0, 0)

    def __len__(self):
        return len(self.t)

    @property
    def features(self):
        return UNI_FEATURES if self.mode == "uni" else BI_FEATURES

    def inputs(self, sl=slice(None)) -> np.ndarray:
        return np.stack([getattr(self, f)[sl] for f in self.features], axis=1).astype(float)

    def split(self, name: str):
        """(inputs, targets) for one split."""
        sl = self.splits[name]
        return self.inputs(sl), self.q_deg[sl].astype(float)

    def with_splits(self, val_fraction: float = 0.15) -> "Dataset":
        self.splits = split_contiguous(len(self), val_fraction)
        return self


def split_contiguous(n: int, val_fraction: float = 0.15) -> dict:
    """train / val_alpha / val_beta as consecutive chunks (70/15/15 default)."""
    n_val = math.floor(val_fraction * n + 0.5)
    n_train = n - 2 * n_val
    if n_train <= 0 or n_val == 0:
        raise ValueError(f"dataset of {n} frames is too small to split")
    return {
        "train": slice(0, n_train),
        "val_alpha": slice(n_train, n_train + n_val),
        "val_beta": slice(n_train + n_val, n),
    }


def frames_to_inputs(frames, mode: str) -> np.ndarray:
    names = UNI_FEATURES if mode == "uni" else BI_FEATURES
    return np.array([[getattr(f, k) for k in names] for f in frames], dtype=float)


# ---------------------------------------------------------------- model


@dataclass
class LstmModel:
    input_dim: int
    hidden: int
    W: np.ndarray  # (4H, D + H)
    b: np.ndarray  # (4H,)
    W_out: np.ndarray  # (H,)
    b_out: np.ndarray  # (1,)
    dropout_rate: float = 0.1
    in_lo: np.ndarray | None = None
    in_hi: np.ndarray | None = None
    out_offset: float = 0.0
    out_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    PARAM_NAMES = ("W", "b", "W_out", "b_out")

    @classmethod
    def init(cls, input_dim: int, hidden: int = 30, seed=0, dropout_rate: float = 0.1):
        """Glorot-uniform weights, zero biases except forget gate = 1."""
        rng = np.random.default_rng(seed)
        fan = input_dim + hidden
        lim = math.sqrt(6.0 / (fan + 4 * hidden))
        W = rng.uniform(-lim, lim, size=(4 * hidden, fan))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        lim_out = math.sqrt(6.0 / (hidden + 1))
        W_out = rng.uniform(-lim_out, lim_out, size=hidden)
        return cls(
            input_dim,
            hidden,
            W,
            b,
            W_out,
            np.zeros(1),
            dropout_rate,
            np.zeros(input_dim),
            np.ones(input_dim),
        )

    @classmethod
    def zeros(cls, input_dim: int, hidden: int, b_out: float = 0.0):
        return cls(
            input_dim,
            hidden,
            np.zeros((4 * hidden, input_dim + hidden)),
            np.zeros(4 * hidden),
            np.zeros(hidden),
            np.array([float(b_out)]),
            in_lo=np.full(input_dim, -1.0),
            in_hi=np.ones(input_dim),
        )

    def params(self) -> dict:
        return {k: getattr(self, k) for k in self.PARAM_NAMES}

    def copy(self) -> "LstmModel":
        return copy.deepcopy(self)

    def fit_normalisation(self, X: np.ndarray, y: np.ndarray) -> None:
        """Input min/max -> [-1, 1]; output mean/std. From the train split only."""
        lo, hi = X.min(axis=0), X.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        self.in_lo, self.in_hi = lo.astype(float), hi.astype(float)
        self.out_offset = float(np.mean(y))
        self.out_scale = float(np.std(y)) or 1.0

    def normalise(self, X: np.ndarray) -> np.ndarray:
        if X.shape[-1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} input features, got {X.shape[-1]}")
        return 2.0 * (X - self.in_lo) / (self.in_hi - self.in_lo) - 1.0

    # ---- persistence

    def to_dict(self) -> dict:
        return {
            "format": "softskin-lstm/1",
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "gate_order": ["input", "forget", "cell", "output"],
            "dropout_rate": self.dropout_rate,
            "normalisation": {
                "in_lo": self.in_lo.tolist(),
                "in_hi": self.in_hi.tolist(),
                "out_offset": self.out_offset,
                "out_scale": self.out_scale,
            },
            # row-major flattening; W has shape (4*hidden, input_dim + hidden)
            "weights": {k: np.ravel(v).tolist() for k, v in self.params().items()},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LstmModel":
        D, H = d["input_dim"], d["hidden"]
        w = d["weights"]
        norm = d["normalisation"]
        return cls(
            D,
            H,
            np.array(w["W"]).reshape(4 * H, D + H),
            np.array(w["b"]),
            np.array(w["W_out"]),
            np.array(w["b_out"]),
            d["dropout_rate"],
            np.array(norm["in_lo"]),
            np.array(norm["in_hi"]),
            norm["out_offset"],
            norm["out_scale"],
            d.get("meta", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "LstmModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def lstm_cell(model: LstmModel, x, h_prev, c_prev):
    """One LSTM step. Works on single vectors or (B, .) batches."""
    H = model.hidden
    z = np.concatenate([x, h_prev], axis=-1) @ model.W.T + model.b
    i = _sigmoid(z[..., :H])
    f = _sigmoid(z[..., H : 2 * H])
    g = np.tanh(z[..., 2 * H : 3 * H])
    o = _sigmoid(z[..., 3 * H :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: kept units are scaled by 1/(1-rate)."""
    if rate <= 0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _forward_cached(model, Xn, h0, c0, mask):
    """Forward over a (T, B, D) normalised window; returns outputs and cache."""
    T, B, _ = Xn.shape
    H = model.hidden
    Wt = model.W.T
    h, c = h0, c0
    cache = []
    hs = np.empty((T, B, H))
    for t in range(T):
        x = Xn[t] if mask is None else Xn[t] * mask[t]
        zin = np.concatenate([x, h], axis=1)
        z = zin @ Wt + model.b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c_prev = c
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[t] = h
        cache.append((zin, i, f, g, o, c_prev, tc))
    y = model.out_scale * (hs @ model.W_out + model.b_out[0]) + model.out_offset
    return y, hs, (h, c), cache


def forward(model: LstmModel, X, mode: str = "infer", rng=None, state=None):
    """Predict degrees of curvature for a raw input stream.

    ``X`` is (T, D) or (T, B, D) in raw units. ``mode='train'`` applies input
    dropout drawn from ``rng``. Starts from zero state unless ``state`` given.
    Returns predictions shaped (T,) or (T, B).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty (T, D) input sequence")
    single = X.ndim == 2
    if single:
        X = X[:, None, :]
    Xn = model.normalise(X)
    T, B, D = Xn.shape
    mask = None
    if mode == "train":
        if rng is None:
            raise ValueError("train mode needs an rng")
        mask = dropout_mask(Xn.shape, model.dropout_rate, rng)
    h0, c0 = state if state is not None else (np.zeros((B, model.hidden)),) * 2
    y, *_ = _forward_cached(model, Xn, h0, c0, mask)
    return y[:, 0] if single else y


def predict_sessions(model: LstmModel, X, session=None) -> np.ndarray:
    """Streaming predictions over (T, D) inputs, restarting from zero state
    wherever ``session`` changes value."""
    if session is None or len(session) == 0:
        return forward(model, X)
    starts = np.flatnonzero(np.diff(session)) + 1
    return np.concatenate([forward(model, part) for part in np.split(np.asarray(X, dtype=float), starts)])


def l2_penalty(model: LstmModel, l2: float) -> float:
    return l2 * (float(np.sum(model.W**2)) + float(np.sum(model.W_out**2)))


def loss(model: LstmModel, X, y, l2: float = 0.0, mask=None, state=None) -> float:
    """MSE (degrees^2) over every step of every sequence plus L2 on weights.

    ``X`` is a raw (T, B, D) window, ``y`` (T, B) targets.
    """
    Xn = model.normalise(np.asarray(X, dtype=float))
    T, B, _ = Xn.shape
    h0, c0 = state if state is not None else (np.zeros((B, model.hidden)),) * 2
    pred, *_ = _forward_cached(model, Xn, h0, c0, mask)
    return float(np.mean((pred - y) ** 2)) + l2_penalty(model, l2)


def backward(model: LstmModel, X, y, l2: float = 0.0, mask=None, state=None):
    """Loss and exact BPTT gradients for one window.

    Returns (loss, grads, final_state). Gradients do not flow into the
    initial state (truncated BPTT).
    """
    Xn = model.normalise(np.asarray(X, dtype=float))
    T, B, D = Xn.shape
    H = model.hidden
    h0, c0 = state if state is not None else (np.zeros((B, H)),) * 2
    pred, hs, final, cache = _forward_cached(model, Xn, h0, c0, mask)
    err = pred - y
    n = err.size
    value = float(np.mean(err**2)) + l2_penalty(model, l2)

    dpred = 2.0 * err / n  # (T, B)
    dlin = model.out_scale * dpred
    gW_out = np.einsum("tb,tbh->h", dlin, hs) + 2.0 * l2 * model.W_out
    gb_out = np.array([dlin.sum()])
    dh_out = dlin[:, :, None] * model.W_out  # (T, B, H)

    gW = 2.0 * l2 * model.W
    gb = np.zeros_like(model.b)
    W_h = model.W[:, D:]
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dz = np.empty((B, 4 * H))
    for t in range(T - 1, -1, -1):
        zin, i, f, g, o, c_prev, tc = cache[t]
        dh = dh_out[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H :] = dh * tc * o * (1.0 - o)
        gW += dz.T @ zin
        gb += dz.sum(axis=0)
        dh_next = dz @ W_h
        dc_next = dc * f
    grads = {"W": gW, "b": gb, "W_out": gW_out, "b_out": gb_out}
    return value, grads, final


# ---------------------------------------------------------------- optimiser


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(opt: AdamState, params: dict, grads: dict, lr: float | None = None) -> None:
    """In-place Adam update with bias correction."""
    lr = opt.lr if lr is None else lr
    opt.t += 1
    b1, b2 = opt.beta1, opt.beta2
    corr1 = 1.0 - b1**opt.t
    corr2 = 1.0 - b2**opt.t
    for k, p in params.items():
        g = grads[k]
        if k not in opt.m:
            opt.m[k] = np.zeros_like(p)
            opt.v[k] = np.zeros_like(p)
        m, v = opt.m[k], opt.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / corr1) / (np.sqrt(v / corr2) + opt.eps)


# ---------------------------------------------------------------- training


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"shapes differ: {pred.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 1e-4
    val_frequency: int = 25
    patience: int = 5
    seq_len: int = 100
    batch_size: int = 16
    max_epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        for name in ("lr", "eps", "val_frequency", "patience", "seq_len", "batch_size", "max_epochs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")


class EarlyStopping:
    """Stop after ``patience`` consecutive checks without improvement."""

    def __init__(self, patience: int = 5):
        self.patience = patience
        self.best = math.inf
        self.best_check = None
        self.counter = 0
        self.checks = 0

    def update(self, score: float) -> bool:
        """Record a validation score; True means this score is a new best."""
        self.checks += 1
        if score < self.best:
            self.best = score
            self.best_check = self.checks
            self.counter = 0
            return True
        self.counter += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.counter >= self.patience


def _lanes(X, y, n_lanes):
    """Reshape a stream into ``n_lanes`` contiguous parallel lanes (T, B, .)."""
    L = len(X) // n_lanes
    if L == 0:
        raise ValueError("split shorter than the number of lanes")
    Xl = X[: L * n_lanes].reshape(n_lanes, L, -1).transpose(1, 0, 2)
    yl = y[: L * n_lanes].reshape(n_lanes, L).T
    return Xl, yl


def evaluate_lanes(model: LstmModel, X, y, n_lanes: int = 16) -> float:
    """Fast RMSE estimate: the stream is run as parallel lanes from zero state."""
    Xl, yl = _lanes(X, y, n_lanes)
    return rmse(forward(model, Xl), yl)


@dataclass
class TrainResult:
    model: LstmModel
    history: list
    best_val_alpha: float
    val_beta: float
    iterations: int
    stopped_early: bool


def train(model: LstmModel, dataset: Dataset, config: TrainConfig = TrainConfig(), log=None):
    """Train with Adam, input dropout and L2, early-stopped on val_alpha.

    Every ``val_frequency`` iterations the val_alpha RMSE is measured; after
    ``patience`` checks without improvement training stops and the best
    weights are restored. val_beta RMSE is reported for hidden-unit
    selection. Both validation scores stream each split from zero state,
    restarting at session boundaries.
    """
    model = model.copy()
    X_tr, y_tr = dataset.split("train")
    X_a, y_a = dataset.split("val_alpha")
    X_b, y_b = dataset.split("val_beta")
    s_a, s_b = (None, None) if dataset.session is None else (
        dataset.session[dataset.splits["val_alpha"]], dataset.session[dataset.splits["val_beta"]])
    model.fit_normalisation(X_tr, y_tr)

    rng = np.random.default_rng(config.seed)
    opt = AdamState(config.lr, config.beta1, config.beta2, config.eps)
    stopper = EarlyStopping(config.patience)
    best = model.copy()
    history = []
    Xl, yl = _lanes(X_tr, y_tr, config.batch_size)
    n_steps = Xl.shape[0]
    B, H, S = config.batch_size, model.hidden, config.seq_len

    it = 0
    since_check = []
    stopped = False
    for epoch in range(config.max_epochs):
        start = int(rng.integers(0, S))
        state = (np.zeros((B, H)), np.zeros((B, H)))
        for s0 in range(start, n_steps - S + 1, S):
            Xw = Xl[s0 : s0 + S]
            yw = yl[s0 : s0 + S]
            mask = dropout_mask(Xw.shape, model.dropout_rate, rng)
            value, grads, state = backward(model, Xw, yw, config.l2, mask, state)
            if not math.isfinite(value):
                raise Diverged(f"loss became {value} at iteration {it}")
            adam_step(opt, model.params(), grads)
            since_check.append(value - l2_penalty(model, config.l2))
            it += 1
            if it % config.val_frequency == 0:
                val = rmse(predict_sessions(model, X_a, s_a), y_a)
                if stopper.update(val):
                    best = model.copy()
                rec = {
                    "iteration": it,
                    "epoch": epoch,
                    "train_rmse": math.sqrt(max(np.mean(since_check), 0.0)),
                    "val_alpha_rmse": val,
                }
                history.append(rec)
                if log is not None:
                    log(rec)
                since_check = []
                if stopper.should_stop:
                    stopped = True
                    break
        if stopped:
            break

    if not stopped and it % config.val_frequency != 0:
        # the budget ran out between checks; score the final weights too
        if stopper.update(rmse(predict_sessions(model, X_a, s_a), y_a)):
            best = model.copy()

    best.meta = {
        "iterations": it,
        "best_check": stopper.best_check,
        "best_val_alpha_rmse": stopper.best,
        "config": vars(config).copy(),
        "features": list(dataset.features),
    }
    val_beta = rmse(predict_sessions(best, X_b, s_b), y_b)
    best.meta["val_beta_rmse"] = val_beta
    return TrainResult(best, history, stopper.best, val_beta, it, stopped)


class StreamingEstimator:
    """Frame-by-frame inference carrying the LSTM state between calls."""

    def __init__(self, model: LstmModel, mode: str):
        self.model = model
        self.features = UNI_FEATURES if mode == "uni" else BI_FEATURES
        if len(self.features) != model.input_dim:
            raise DimensionMismatch(
                f"{mode} mode uses {len(self.features)} inputs, model has {model.input_dim}"
            )
        self.reset()

    def reset(self):
        self.h = np.zeros(self.model.hidden)
        self.c = np.zeros(self.model.hidden)

    def update(self, frame) -> float:
        m = self.model
        x = m.normalise(np.array([getattr(frame, k) for k in self.features], dtype=float))
        self.h, self.c = lstm_cell(m, x, self.h, self.c)
        return float(m.out_scale * (self.h @ m.W_out + m.b_out[0]) + m.out_offset)
