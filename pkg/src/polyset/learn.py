"""Small feed-forward regressor trained with Adam on mean-squared error.

Everything is plain numpy in float64: ReLU hidden layers, identity
output, reverse-mode gradients written out by hand, early stopping on the
validation loss.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericError, ShapeError, TrainingError

__all__ = [
    "MlpModel",
    "TrainConfig",
    "AdamState",
    "Standardizer",
    "TrainReport",
    "init_mlp",
    "forward",
    "loss_and_gradients",
    "adam_step",
    "fit_regressor",
    "prepare_features",
    "train",
    "r_squared",
    "smape",
    "model_to_dict",
    "model_from_dict",
]

logger = logging.getLogger(__name__)


@dataclass
class MlpModel:
    """Weights are stored ``(fan_in, fan_out)`` so a batch maps as ``X @ W + b``."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.layer_dims = [int(d) for d in self.layer_dims]
        if len(self.layer_dims) < 2 or self.layer_dims[-1] != 1:
            raise ShapeError("layer_dims must run from the input size to a single output")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("need one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[i], self.layer_dims[i + 1]) or b.shape != (self.layer_dims[i + 1],):
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape} do not match {self.layer_dims}")

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        self.weights = [np.array(p, dtype=float) for p in params[0::2]]
        self.biases = [np.array(p, dtype=float) for p in params[1::2]]

    def copy(self) -> "MlpModel":
        return MlpModel(list(self.layer_dims), [w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(layer_dims: Sequence[int], rng: np.random.Generator) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(list(layer_dims), weights, biases)


def _forward_cache(model: MlpModel, X: np.ndarray):
    if X.ndim != 2 or X.shape[1] != model.layer_dims[0]:
        raise ShapeError(f"expected input of width {model.layer_dims[0]}, got shape {X.shape}")
    acts = [X]
    pre = []
    h = X
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite activation in layer {i}")
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return pre, acts


def forward(model: MlpModel, x):
    """Network output for one input vector (float) or a batch (1-D array)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    _, acts = _forward_cache(model, x[None, :] if single else x)
    out = acts[-1][:, 0]
    return float(out[0]) if single else out


def loss_and_gradients(model: MlpModel, X, y):
    """Return ``(mse, grads)`` with ``grads`` ordered like ``model.params``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.size:
        raise ShapeError("batch must be a non-empty (n, d) matrix with n targets")
    pre, acts = _forward_cache(model, X)
    resid = acts[-1][:, 0] - y
    mse = float(np.mean(resid * resid))
    delta = (2.0 / y.size) * resid[:, None]
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0.0)
    return mse, grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 25
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    target: str = "mz1"
    standardize_features: bool = True
    # RBF block of PolySet inputs enters as log10(max(F, floor)); None keeps it linear
    rbf_log_floor: float | None = 1e-12
    # standardized-target MSE above this counts as divergence
    divergence_threshold: float = 1e8

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        for name in ("learning_rate", "beta1", "beta2", "epsilon"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be > 0")
        if not (self.beta1 < 1.0 and self.beta2 < 1.0):
            raise DomainError("beta1 and beta2 must be < 1")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 0:
            raise DomainError("batch_size and patience must be >= 1, max_epochs >= 0")
        if self.target not in ("mz", "mz1"):
            raise DomainError("target must be 'mz' or 'mz1'")
        if self.rbf_log_floor is not None and not self.rbf_log_floor > 0.0:
            raise DomainError("rbf_log_floor must be > 0 or None")
        if not self.divergence_threshold > 0.0:
            raise DomainError("divergence_threshold must be > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              cfg: TrainConfig) -> list[np.ndarray]:
    """One bias-corrected Adam update; returns new parameters and advances ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("parameter, gradient and optimizer state lists differ in length")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.m[i].shape:
            raise ShapeError(f"shape mismatch at parameter {i}: {p.shape} vs {g.shape}")
        with np.errstate(over="ignore", invalid="ignore"):
            state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
            state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
            new = p - cfg.learning_rate * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + cfg.epsilon)
        if not (np.all(np.isfinite(state.v[i])) and np.all(np.isfinite(new))):
            raise NumericError(f"non-finite optimizer state at parameter {i}")
        out.append(new)
    return out


@dataclass
class Standardizer:
    """Per-feature and target z-scoring, fitted on the training split only."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    constant_features: list[int] = field(default_factory=list)

    @classmethod
    def fit(cls, X, y, features: bool = True) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = [int(i) for i in np.flatnonzero(std <= 1e-12 * np.maximum(1.0, np.abs(mean)))]
        std[constant] = 1.0
        if not features:
            mean = np.zeros_like(mean)
            std = np.ones_like(std)
        y_std = float(y.std())
        return cls(mean, std, float(y.mean()), y_std if y_std > 0.0 else 1.0, constant)

    def transform_x(self, X):
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_std

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def inverse_y(self, z):
        return np.asarray(z, dtype=float) * self.y_std + self.y_mean

    def to_dict(self) -> dict:
        return {"x_mean": self.x_mean.tolist(), "x_std": self.x_std.tolist(), "y_mean": self.y_mean,
                "y_std": self.y_std, "constant_features": self.constant_features}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.array(d["x_mean"], dtype=float), np.array(d["x_std"], dtype=float),
                   float(d["y_mean"]), float(d["y_std"]), list(d.get("constant_features", [])))


@dataclass
class TrainReport:
    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int
    metrics: dict
    representation: str = ""
    target: str = "mz1"
    test_ids: list[int] = field(default_factory=list)
    test_true: list[float] = field(default_factory=list)
    test_pred: list[float] = field(default_factory=list)
    wall_clock: float = 0.0

    def metrics_dict(self) -> dict:
        """Everything except timing, so reruns compare equal."""
        return {"representation": self.representation, "target": self.target, "best_epoch": self.best_epoch,
                "epochs_run": len(self.val_loss), **self.metrics}

    def learning_curve_csv(self) -> str:
        rows = ["epoch,train_mse,val_mse"]
        rows += [f"{i + 1},{tr!r},{va!r}" for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss))]
        return "\n".join(rows) + "\n"


def r_squared(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.size < 2:
        raise ShapeError("r_squared needs two equal-length vectors of length >= 2")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DomainError("r_squared is undefined for a constant target")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def smape(y, yhat) -> float:
    """Symmetric mean absolute percentage error in percent; 0/0 counts as 0."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    yhat = np.atleast_1d(np.asarray(yhat, dtype=float))
    if y.shape != yhat.shape or y.size < 1:
        raise ShapeError("smape needs two equal-length non-empty vectors")
    if np.any(y < 0.0) or np.any(yhat < 0.0):
        raise DomainError("smape is defined here for non-negative values only")
    denom = np.abs(y) + np.abs(yhat)
    num = 2.0 * np.abs(y - yhat)
    terms = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0.0)
    return float(100.0 * terms.mean())


def _mse(model, X, y) -> float:
    r = forward(model, X) - y
    return float(np.mean(r * r))


def fit_regressor(X_train, y_train, X_val, y_val, cfg: TrainConfig):
    """Train on already-standardized arrays.

    Returns ``(model, train_curve, val_curve, best_epoch)``; the model
    carries the parameters of the best validation epoch (or the
    initialization when ``cfg.max_epochs == 0``).
    """
    rng = np.random.default_rng(cfg.seed)
    model = init_mlp([X_train.shape[1], *cfg.hidden, 1], rng)
    state = AdamState.zeros_like(model.params)
    best = model.copy()
    best_val = math.inf
    best_epoch = 0
    train_curve, val_curve = [], []
    n = X_train.shape[0]
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        try:
            for start in range(0, n, cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                _, grads = loss_and_gradients(model, X_train[idx], y_train[idx])
                model.set_params(adam_step(state, model.params, grads, cfg))
            tr = _mse(model, X_train, y_train)
            va = _mse(model, X_val, y_val)
        except NumericError:
            tr = va = math.inf
        if not (va <= cfg.divergence_threshold and tr <= cfg.divergence_threshold):
            raise TrainingError(f"training diverged at epoch {epoch}", epoch, train_curve, val_curve)
        train_curve.append(tr)
        val_curve.append(va)
        if va < best_val:
            best_val, best_epoch, best = va, epoch, model.copy()
        elif epoch - best_epoch >= cfg.patience:
            break
    return best, train_curve, val_curve, best_epoch


def prepare_features(X, representation: str, encoder_cfg, train_cfg: TrainConfig) -> np.ndarray:
    """Model inputs from raw embeddings.

    Tail chains carry tiny number fractions, so the RBF activations they
    feed span many decades; log-compressing that block lets a z-score
    keep them visible.
    """
    X = np.array(X, dtype=float)
    if representation == "polyset" and train_cfg.rbf_log_floor is not None:
        start = len(encoder_cfg.monomer_vocab)
        block = slice(start, start + encoder_cfg.n_rbf)
        X[:, block] = np.log10(np.maximum(X[:, block], train_cfg.rbf_log_floor))
    return X


def _features(records, representation, encoder_cfg):
    from .dataset import baseline_matrix, polyset_matrix

    if representation == "polyset":
        return polyset_matrix(records, encoder_cfg)
    if representation == "baseline":
        return baseline_matrix(records, encoder_cfg)
    raise DomainError(f"unknown representation {representation!r}")


def train(records, representation: str, split, encoder_cfg, train_cfg: TrainConfig, features=None):
    """Fit a regressor for one representation and evaluate it on the test split.

    ``features`` may carry a precomputed ``{record id: vector}`` mapping.
    Returns ``(model, standardizer, report)``.
    """
    t0 = time.perf_counter()
    by_id = {r.id: r for r in records}
    parts = {}
    for name in ("train", "val", "test"):
        ids = list(getattr(split, name))
        if not ids:
            raise DomainError(f"{name} split is empty")
        recs = [by_id[i] for i in ids]
        if features is None:
            X = _features(recs, representation, encoder_cfg)
        else:
            X = np.vstack([features[i] for i in ids])
        X = prepare_features(X, representation, encoder_cfg, train_cfg)
        y = np.array([r.target(train_cfg.target) for r in recs])
        parts[name] = (ids, X, y)

    _, Xtr, ytr = parts["train"]
    scaler = Standardizer.fit(Xtr, ytr, features=train_cfg.standardize_features)
    z = {k: (scaler.transform_x(X), scaler.transform_y(y)) for k, (_, X, y) in parts.items()}
    model, tr_curve, va_curve, best_epoch = fit_regressor(*z["train"], *z["val"], train_cfg)

    test_ids, Xte, yte = parts["test"]
    pred = scaler.inverse_y(forward(model, z["test"][0]))
    metrics = {
        "r2": r_squared(yte, pred),
        "smape": smape(10.0 ** yte, 10.0 ** pred),
        "r2_linear": r_squared(10.0 ** yte, 10.0 ** pred),
        "smape_log": smape(yte, pred),
        "rmse_log10": float(np.sqrt(np.mean((yte - pred) ** 2))),
        "n_train": len(parts["train"][0]),
        "n_val": len(parts["val"][0]),
        "n_test": len(test_ids),
    }
    report = TrainReport(tr_curve, va_curve, best_epoch, metrics, representation, train_cfg.target,
                         list(test_ids), yte.tolist(), pred.tolist(), time.perf_counter() - t0)
    logger.info("%s/%s: r2=%.4f smape=%.3f%% best_epoch=%d (%.1fs)", representation, train_cfg.target,
                metrics["r2"], metrics["smape"], best_epoch, report.wall_clock)
    return model, scaler, report


def model_to_dict(model: MlpModel, scaler: Standardizer | None = None, cfg: TrainConfig | None = None) -> dict:
    return {
        "layer_dims": model.layer_dims,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "standardizer": scaler.to_dict() if scaler else None,
        "config": cfg.to_dict() if cfg else None,
        "seed": cfg.seed if cfg else None,
    }


def model_from_dict(d) -> tuple[MlpModel, Standardizer | None]:
    model = MlpModel(d["layer_dims"], [np.array(w, dtype=float) for w in d["weights"]],
                     [np.array(b, dtype=float) for b in d["biases"]])
    scaler = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
    return model, scaler
