"""Small feedforward network for brake power.

Six engineered inputs, softplus hidden layers of 64-32-16-8 neurons and a
linear output. Features and target are standardised with statistics of the
training data; the loss is the mean squared error in that scaled space,
minimised with mini-batch Adam. Everything is plain numpy.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import VoyageRecord
from .errors import InsufficientDataError, ModelCorruptError, SchemaError, TrainingDivergedError

SCHEMA = "fnn/1"
LAYER_SIZES = (6, 64, 32, 16, 8, 1)
FEATURE_NAMES = (
    "stw",
    "draft_avg",
    "wind_prod_long",
    "wind_prod_trans",
    "wave_power_long",
    "wave_power_trans",
)


@dataclass(frozen=True)
class FeatureVector:
    stw: float
    draft_avg: float
    wind_prod_long: float
    wind_prod_trans: float
    wave_power_long: float
    wave_power_trans: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES])


def engineer_features(r: VoyageRecord) -> FeatureVector:
    env = r.environment
    wind = env.wind_speed_rel**2
    wave = env.sig_wave_height**2 * env.wave_peak_period
    return FeatureVector(
        stw=r.stw,
        draft_avg=(r.draft_aft + r.draft_fwd) / 2.0,
        wind_prod_long=wind * math.cos(env.wind_dir_rel),
        wind_prod_trans=wind * math.sin(env.wind_dir_rel),
        wave_power_long=wave * math.cos(env.wave_dir_rel),
        wave_power_trans=wave * math.sin(env.wave_dir_rel),
    )


def feature_matrix(records: Sequence[VoyageRecord]) -> np.ndarray:
    if not records:
        return np.zeros((0, len(FEATURE_NAMES)))
    return np.array([engineer_features(r).as_array() for r in records])


def softplus(z):
    """log(1 + e^z) without overflow; equals z + log1p(e^-z) for large z."""
    z = np.asarray(z, float)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.015
    epochs: int = 5
    loss: str = "mse"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss != "mse":
            raise ValueError("only the 'mse' loss is supported")


@dataclass
class FnnModel:
    sizes: tuple[int, ...]
    weights: list[np.ndarray]  # weights[i] has shape (sizes[i+1], sizes[i])
    biases: list[np.ndarray]
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    seed: int = 0
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        self.validate()

    def validate(self) -> None:
        n = len(self.sizes) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise ModelCorruptError(f"expected {n} weight/bias pairs")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i + 1], self.sizes[i]):
                raise ModelCorruptError(f"layer {i} weight shape {w.shape} != {(self.sizes[i + 1], self.sizes[i])}")
            if b.shape != (self.sizes[i + 1],):
                raise ModelCorruptError(f"layer {i} bias shape {b.shape} != {(self.sizes[i + 1],)}")
        if self.x_mean.shape != (self.sizes[0],) or self.x_std.shape != (self.sizes[0],):
            raise ModelCorruptError("feature scaling statistics do not match the input layer")
        if np.any(self.x_std <= 0) or not self.y_std > 0:
            raise ModelCorruptError("scaling standard deviations must be positive")

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    # -- serialisation --
    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "layer_sizes": list(self.sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "feature_names": list(FEATURE_NAMES),
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "seed": self.seed,
            "train_config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FnnModel":
        if not isinstance(d, dict):
            raise SchemaError("model file must hold a JSON object")
        if d.get("schema") != SCHEMA:
            raise SchemaError(f"unsupported model schema {d.get('schema')!r}; expected {SCHEMA!r}")
        try:
            return cls(
                sizes=tuple(d["layer_sizes"]),
                weights=[np.array(w, dtype=float).reshape(len(w), -1) for w in d["weights"]],
                biases=[np.array(b, dtype=float) for b in d["biases"]],
                x_mean=np.array(d["x_mean"], dtype=float),
                x_std=np.array(d["x_std"], dtype=float),
                y_mean=float(d["y_mean"]),
                y_std=float(d["y_std"]),
                seed=int(d.get("seed", 0)),
                config=d.get("train_config", {}),
            )
        except KeyError as exc:
            raise SchemaError(f"model file lacks field {exc.args[0]!r}") from None
        except (ValueError, TypeError) as exc:
            raise ModelCorruptError(f"malformed model arrays: {exc}") from None


def save(m: FnnModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(m.to_dict(), fh)
        fh.write("\n")


def load(path) -> FnnModel:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"unreadable model file {path}: {exc}") from None
    return FnnModel.from_dict(d)


# --- network maths ----------------------------------------------------------


def _forward_scaled(weights, biases, xs):
    """Scaled-space forward pass; returns output and per-layer (input, pre-activation)."""
    h = xs
    cache = []
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w.T + b
        cache.append((h, z))
        h = z if i == last else softplus(z)
    return h[:, 0], cache


def _backward(weights, cache, err):
    """Gradients of mean((y_hat - y)^2) given err = y_hat - y."""
    n = err.shape[0]
    delta = (2.0 / n) * err[:, None]
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        h, _ = cache[i]
        gw[i] = delta.T @ h
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i]) * expit(cache[i - 1][1])
    return gw, gb


def forward(m: FnnModel, x) -> np.ndarray | float:
    """Brake power (W) for one feature vector or an (n, 6) array."""
    if isinstance(x, FeatureVector):
        x = x.as_array()
    x = np.asarray(x, float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != m.sizes[0]:
        raise ModelCorruptError(f"model expects {m.sizes[0]} features, got {x.shape[1]}")
    m.validate()
    ys, _ = _forward_scaled(m.weights, m.biases, (x - m.x_mean) / m.x_std)
    y = ys * m.y_std + m.y_mean
    return float(y[0]) if single else y


def predict(m: FnnModel, records: Sequence[VoyageRecord]) -> np.ndarray:
    return forward(m, feature_matrix(records)) if records else np.zeros(0)


def scaled_loss(m: FnnModel, x, y) -> float:
    xs = (np.atleast_2d(np.asarray(x, float)) - m.x_mean) / m.x_std
    ys = (np.asarray(y, float) - m.y_mean) / m.y_std
    out, _ = _forward_scaled(m.weights, m.biases, xs)
    return float(np.mean((out - ys) ** 2))


def scaled_gradients(m: FnnModel, x, y):
    xs = (np.atleast_2d(np.asarray(x, float)) - m.x_mean) / m.x_std
    ys = (np.asarray(y, float) - m.y_mean) / m.y_std
    out, cache = _forward_scaled(m.weights, m.biases, xs)
    return _backward(m.weights, cache, out - ys)


def init_model(
    sizes=LAYER_SIZES,
    x_mean=None,
    x_std=None,
    y_mean: float = 0.0,
    y_std: float = 1.0,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> FnnModel:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed) if rng is None else rng
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    n_in = sizes[0]
    return FnnModel(
        sizes=tuple(sizes),
        weights=weights,
        biases=biases,
        x_mean=np.zeros(n_in) if x_mean is None else np.asarray(x_mean, float),
        x_std=np.ones(n_in) if x_std is None else np.asarray(x_std, float),
        y_mean=y_mean,
        y_std=y_std,
        seed=seed,
    )


def _safe_std(a, axis=None):
    s = np.std(a, axis=axis)
    return np.where(s > 0, s, 1.0)


def train_arrays(x, y, cfg: TrainConfig = TrainConfig(), sizes=LAYER_SIZES) -> tuple[FnnModel, list[float]]:
    """Train on a feature matrix and target vector (W).

    Returns the model and the mean mini-batch loss of every epoch.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(y)
    if n < cfg.batch_size:
        raise InsufficientDataError(f"{n} records is fewer than the batch size {cfg.batch_size}")
    rng = np.random.default_rng(cfg.seed)
    x_mean, x_std = x.mean(axis=0), _safe_std(x, axis=0)
    y_mean, y_std = float(y.mean()), float(_safe_std(y))
    m = init_model(sizes, x_mean, x_std, y_mean, y_std, seed=cfg.seed, rng=rng)
    m.config = asdict(cfg)
    xs = (x - x_mean) / x_std
    ys = (y - y_mean) / y_std

    params = [*m.weights, *m.biases]
    mom = [np.zeros_like(p) for p in params]
    vel = [np.zeros_like(p) for p in params]
    b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.eps
    step = 0
    trace: list[float] = []
    nl = len(m.weights)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            out, cache = _forward_scaled(m.weights, m.biases, xs[idx])
            err = out - ys[idx]
            total += float(err @ err)
            gw, gb = _backward(m.weights, cache, err)
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            for k, (p, g) in enumerate(zip(params, [*gw, *gb])):
                mom[k] *= b1
                mom[k] += (1.0 - b1) * g
                vel[k] *= b2
                vel[k] += (1.0 - b2) * g * g
                p -= lr * (mom[k] / c1) / (np.sqrt(vel[k] / c2) + eps)
        loss = total / n
        trace.append(loss)
        if not math.isfinite(loss) or not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDivergedError(epoch, trace)
    m.weights = params[:nl]
    m.biases = params[nl:]
    return m, trace


def train(records: Sequence[VoyageRecord], cfg: TrainConfig = TrainConfig()) -> tuple[FnnModel, list[float]]:
    return train_arrays(feature_matrix(records), [r.brake_power for r in records], cfg)


def gradient_check(m: FnnModel, x, y, step: float = 1e-5, floor: float = 1e-7) -> float:
    """Largest relative gap between backprop and central-difference gradients.

    Differences are taken on the scaled-space MSE. ``floor`` keeps the
    relative error meaningful for gradients that are zero analytically.
    """
    gw, gb = scaled_gradients(m, x, y)
    worst = 0.0
    for params, grads in ((m.weights, gw), (m.biases, gb)):
        for p, g in zip(params, grads):
            flat = p.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = scaled_loss(m, x, y)
                flat[i] = orig - step
                down = scaled_loss(m, x, y)
                flat[i] = orig
                numeric = (up - down) / (2.0 * step)
                denom = max(abs(numeric), abs(gflat[i]), floor)
                worst = max(worst, abs(numeric - gflat[i]) / denom)
    return worst
