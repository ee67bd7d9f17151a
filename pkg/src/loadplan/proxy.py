"""Learned optimization proxy: an MLP from commodity volumes to trailer counts.

The network is a plain numpy MLP (dense -> optional batch norm -> dropout ->
ReLU per hidden block, final dense -> ReLU -> compatibility mask), trained by
supervised imitation of the goal-directed pipeline's stage-2 counts with a
smooth-L1 loss and Adam. Inference rounds the masked outputs to integers;
underestimates are the restoration module's job.

Everything is seeded and single-threaded: the same seed and data order
reproduce bitwise-identical weights.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from loadplan.network import Instance
from loadplan.restoration import PredictedPlan, RestorationReport, restore_detailed
from loadplan.formulations import LoadPlan


class DimensionMismatch(ValueError):
    pass


class SignatureMismatch(ValueError):
    """Instance structure does not match what the model was trained on."""


class EmptyDataset(ValueError):
    pass


class DivergenceDetected(RuntimeError):
    """Training loss became non-finite."""


#: Hyperparameter grid: learning rate x hidden-layer count x hidden width.
SEARCH_GRID = [
    (lr, layers, hidden)
    for lr in (1e-1, 1e-2)
    for layers in (3, 4, 5)
    for hidden in (128, 256)
]


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-2
    batch_size: int = 32
    epochs: int = 150
    seed: int = 0
    huber_delta: float = 1.0
    hidden_layers: int = 3
    hidden_dim: int = 128
    dropout: float = 0.1
    batch_norm: bool = False
    rounding: str = "half-up"  # or "nearest-even"

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.epochs, self.huber_delta) <= 0:
            raise ValueError("learning rate, batch size, epochs, delta must be positive")
        if self.hidden_layers < 1 or self.hidden_dim < 1:
            raise ValueError("need at least one hidden layer and unit")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.rounding not in ("half-up", "nearest-even"):
            raise ValueError(f"unknown rounding {self.rounding!r}")


@dataclass(frozen=True)
class TrainingData:
    """Flat training arrays: volumes in, count vectors out, plus the
    compatibility mask and the structural signature they belong to."""

    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray
    signature: dict
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray


def instance_signature(inst: Instance) -> dict:
    return {
        "commodities": [k.name for k in inst.commodities],
        "pairs": [p.name for p in inst.sort_pairs],
        "types": [t.name for t in inst.trailer_types],
    }


def output_domain(inst: Instance) -> list[tuple[int, int]]:
    """Flattened prediction grid: the full (pair, type) product in pair-major
    order, masked down to the compatible entries."""
    return [
        (s, v) for s in range(inst.num_pairs) for v in range(inst.num_types)
    ]


def compatibility_mask(inst: Instance) -> np.ndarray:
    compat = set(inst.compatible_columns())
    return np.array(
        [1.0 if key in compat else 0.0 for key in output_domain(inst)]
    )


def volumes_vector(inst: Instance) -> np.ndarray:
    return np.array([k.volume for k in inst.commodities], dtype=np.float64)


def counts_vector(inst: Instance, y) -> np.ndarray:
    return np.array(
        [float(y.get(key, 0)) for key in output_domain(inst)], dtype=np.float64
    )


@dataclass
class ProxyModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    norm_mean: np.ndarray
    norm_std: np.ndarray
    mask: np.ndarray
    config: TrainingConfig
    signature: dict
    bn_gamma: Optional[list[np.ndarray]] = None
    bn_beta: Optional[list[np.ndarray]] = None
    bn_mean: Optional[list[np.ndarray]] = None
    bn_var: Optional[list[np.ndarray]] = None

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]


# ---------------------------------------------------------------------------
# Forward / backward


_BN_EPS = 1e-5
_BN_MOMENTUM = 0.1


def _smooth_l1(err: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise smooth-L1 value and derivative wrt the error."""
    a = np.abs(err)
    quad = a <= delta
    val = np.where(quad, 0.5 * err * err / delta, a - 0.5 * delta)
    grad = np.where(quad, err / delta, np.sign(err))
    return val, grad


def forward(model: ProxyModel, p: np.ndarray) -> np.ndarray:
    """Inference-mode forward pass: masked nonnegative count estimates."""
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    h = np.atleast_2d(p)
    if h.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"expected {model.input_dim} input volumes, got {h.shape[1]}"
        )
    h = (h - model.norm_mean) / model.norm_std
    last = len(model.weights) - 1
    for li, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if li < last and model.config.batch_norm:
            mu, var = model.bn_mean[li], model.bn_var[li]
            h = (h - mu) / np.sqrt(var + _BN_EPS)
            h = h * model.bn_gamma[li] + model.bn_beta[li]
        h = np.maximum(h, 0.0)  # ReLU on hidden blocks and on the output
    out = h * model.mask
    return out[0] if single else out


def _init_model(
    cfg: TrainingConfig, input_dim: int, mask: np.ndarray, signature: dict,
    norm_mean: np.ndarray, norm_std: np.ndarray, rng: np.random.Generator,
) -> ProxyModel:
    sizes = [input_dim] + [cfg.hidden_dim] * cfg.hidden_layers + [mask.size]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        # Small positive offset keeps units alive when standardized inputs
        # are (near-)zero, e.g. constant features.
        biases.append(np.full(fan_out, 0.01))
    bn = cfg.batch_norm
    hidden = cfg.hidden_layers
    return ProxyModel(
        weights=weights,
        biases=biases,
        norm_mean=norm_mean,
        norm_std=norm_std,
        mask=mask.astype(np.float64),
        config=cfg,
        signature=signature,
        bn_gamma=[np.ones(cfg.hidden_dim) for _ in range(hidden)] if bn else None,
        bn_beta=[np.zeros(cfg.hidden_dim) for _ in range(hidden)] if bn else None,
        bn_mean=[np.zeros(cfg.hidden_dim) for _ in range(hidden)] if bn else None,
        bn_var=[np.ones(cfg.hidden_dim) for _ in range(hidden)] if bn else None,
    )


def _loss_and_grads(
    model: ProxyModel, xb: np.ndarray, yb: np.ndarray,
    dropout_rng: Optional[np.random.Generator],
) -> tuple[float, list[np.ndarray], list[np.ndarray], list, list]:
    """Training-mode forward + backward. Returns loss and gradients for
    weights, biases and (when enabled) the batch-norm affine parameters."""
    cfg = model.config
    last = len(model.weights) - 1
    h = (xb - model.norm_mean) / model.norm_std
    acts = [h]
    pre_relu = []
    bn_cache = []
    drop_masks = []
    for li, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        cache = None
        if li < last:
            if cfg.batch_norm:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                inv = 1.0 / np.sqrt(var + _BN_EPS)
                zhat = (z - mu) * inv
                cache = (zhat, inv)
                model.bn_mean[li] = (1 - _BN_MOMENTUM) * model.bn_mean[li] + _BN_MOMENTUM * mu
                model.bn_var[li] = (1 - _BN_MOMENTUM) * model.bn_var[li] + _BN_MOMENTUM * var
                z = zhat * model.bn_gamma[li] + model.bn_beta[li]
            if cfg.dropout > 0.0 and dropout_rng is not None:
                keep = 1.0 - cfg.dropout
                dm = (dropout_rng.random(z.shape) < keep) / keep
                z = z * dm
                drop_masks.append(dm)
            else:
                drop_masks.append(None)
        bn_cache.append(cache)
        pre_relu.append(z)
        acts.append(np.maximum(z, 0.0))

    out = acts[-1] * model.mask
    err = out - yb
    n_active = max(int(model.mask.sum()), 1) * xb.shape[0]
    val, dval = _smooth_l1(err, cfg.huber_delta)
    loss = float((val * model.mask).sum() / n_active)

    grad = (dval * model.mask) / n_active
    gw = [np.zeros_like(w) for w in model.weights]
    gb = [np.zeros_like(b) for b in model.biases]
    g_gamma = [None] * (len(model.weights) - 1)
    g_beta = [None] * (len(model.weights) - 1)
    for li in range(last, -1, -1):
        grad = grad * (pre_relu[li] > 0.0)
        if li < last:
            if drop_masks[li] is not None:
                grad = grad * drop_masks[li]
            if cfg.batch_norm:
                zhat, inv = bn_cache[li]
                g_gamma[li] = (grad * zhat).sum(axis=0)
                g_beta[li] = grad.sum(axis=0)
                m = grad.shape[0]
                gz = grad * model.bn_gamma[li]
                grad = (
                    inv / m * (m * gz - gz.sum(axis=0) - zhat * (gz * zhat).sum(axis=0))
                )
        gw[li] = acts[li].T @ grad
        gb[li] = grad.sum(axis=0)
        if li > 0:
            grad = grad @ model.weights[li].T
    return loss, gw, gb, g_gamma, g_beta


def _eval_loss(model: ProxyModel, x: np.ndarray, y: np.ndarray) -> float:
    out = forward(model, x)
    val, _ = _smooth_l1(out - y, model.config.huber_delta)
    n_active = max(int(model.mask.sum()), 1) * x.shape[0]
    return float((val * model.mask).sum() / n_active)


@dataclass
class _Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], tag: str):
        for i, (p, g) in enumerate(zip(params, grads)):
            if g is None:
                continue
            key = (tag, i)
            m = self.m.setdefault(key, np.zeros_like(p))
            v = self.v.setdefault(key, np.zeros_like(p))
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            mhat = m / (1 - self.beta1**self.t)
            vhat = v / (1 - self.beta2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    config: Optional[TrainingConfig] = None

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss)):
            lines.append(f"{i},{tr!r},{va!r}")
        return "\n".join(lines) + "\n"


def _norm_stats(x_train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    return mean, std


def train_single(data: TrainingData, cfg: TrainingConfig) -> tuple[ProxyModel, TrainingHistory]:
    """Train one configuration; the best-validation-epoch weights win."""
    if data.train_idx.size == 0:
        raise EmptyDataset("no training instances")
    x_train = data.inputs[data.train_idx]
    y_train = data.targets[data.train_idx]
    x_val = data.inputs[data.val_idx] if data.val_idx.size else x_train
    y_val = data.targets[data.val_idx] if data.val_idx.size else y_train

    mean, std = _norm_stats(x_train)
    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    model = _init_model(cfg, x_train.shape[1], data.mask, data.signature, mean, std, rng)
    adam = _Adam(lr=cfg.learning_rate)
    history = TrainingHistory(config=cfg)
    best_val = math.inf
    best_state = None

    n = x_train.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, gw, gb, ggam, gbet = _loss_and_grads(
                model, x_train[idx], y_train[idx], rng if cfg.dropout > 0 else None
            )
            if not math.isfinite(loss):
                raise DivergenceDetected(f"loss became {loss} at epoch {epoch}")
            adam.t += 1
            adam.step(model.weights, gw, "w")
            adam.step(model.biases, gb, "b")
            if cfg.batch_norm:
                adam.step(model.bn_gamma, ggam, "gamma")
                adam.step(model.bn_beta, gbet, "beta")
            epoch_loss += loss
            batches += 1
        val = _eval_loss(model, x_val, y_val)
        if not math.isfinite(val):
            raise DivergenceDetected(f"validation loss became {val} at epoch {epoch}")
        history.train_loss.append(epoch_loss / max(batches, 1))
        history.val_loss.append(val)
        if val < best_val - 1e-12:
            best_val = val
            best_state = _snapshot(model)
    if best_state is not None:
        _restore(model, best_state)
    return model, history


def _snapshot(model: ProxyModel):
    return (
        [w.copy() for w in model.weights],
        [b.copy() for b in model.biases],
        [g.copy() for g in model.bn_gamma] if model.bn_gamma else None,
        [b.copy() for b in model.bn_beta] if model.bn_beta else None,
        [m.copy() for m in model.bn_mean] if model.bn_mean else None,
        [v.copy() for v in model.bn_var] if model.bn_var else None,
    )


def _restore(model: ProxyModel, state):
    model.weights, model.biases = state[0], state[1]
    model.bn_gamma, model.bn_beta, model.bn_mean, model.bn_var = state[2:]


def train(
    data: TrainingData,
    base: Optional[TrainingConfig] = None,
    grid: Optional[list[tuple[float, int, int]]] = None,
) -> tuple[ProxyModel, TrainingHistory]:
    """Grid search over (learning rate, depth, width); the model with the best
    validation loss wins (first config on ties). ``grid=None`` trains the
    single ``base`` configuration."""
    if data.inputs.shape[0] == 0:
        raise EmptyDataset("dataset is empty")
    base = base or TrainingConfig()
    if grid is None:
        return train_single(data, base)
    best: Optional[tuple[float, ProxyModel, TrainingHistory]] = None
    for lr, layers, hidden in grid:
        cfg = replace(base, learning_rate=lr, hidden_layers=layers, hidden_dim=hidden)
        try:
            model, history = train_single(data, cfg)
        except DivergenceDetected:
            continue
        val = min(history.val_loss) if history.val_loss else math.inf
        if best is None or val < best[0] - 1e-12:
            best = (val, model, history)
    if best is None:
        raise DivergenceDetected("every grid configuration diverged")
    return best[1], best[2]


# ---------------------------------------------------------------------------
# Inference


def _round_counts(raw: np.ndarray, mode: str) -> np.ndarray:
    if mode == "half-up":
        return np.floor(raw + 0.5)
    return np.rint(raw)  # banker's rounding


def predict_plan(model: ProxyModel, inst: Instance) -> PredictedPlan:
    """Round the masked estimates to integer counts (half-up by default)."""
    sig = instance_signature(inst)
    if sig != model.signature:
        raise SignatureMismatch(
            "instance structure differs from the model's training signature"
        )
    raw = forward(model, volumes_vector(inst))
    counts = np.maximum(_round_counts(raw, model.config.rounding), 0.0)
    domain = output_domain(inst)
    compat = set(inst.compatible_columns())
    y_hat = {
        key: int(counts[i]) for i, key in enumerate(domain) if key in compat
    }
    return PredictedPlan.from_counts(inst, y_hat)


def proxy_solve(
    model: ProxyModel, inst: Instance, time_limit: float = 30.0
) -> tuple[LoadPlan, RestorationReport, dict[str, float]]:
    """Predict then restore; returns the feasible plan, the restoration
    report, and the wall-time split."""
    t0 = time.perf_counter()
    pred = predict_plan(model, inst)
    t1 = time.perf_counter()
    plan, report = restore_detailed(inst, pred, time_limit)
    t2 = time.perf_counter()
    timings = {
        "inference_s": t1 - t0,
        "restoration_s": t2 - t1,
        "total_s": t2 - t0,
    }
    return plan, report, timings


# ---------------------------------------------------------------------------
# Checkpoint I/O (versioned JSON; deterministic bytes for identical weights)


def save_model(model: ProxyModel, path) -> None:
    doc = {
        "version": 1,
        "config": {
            "learning_rate": model.config.learning_rate,
            "batch_size": model.config.batch_size,
            "epochs": model.config.epochs,
            "seed": model.config.seed,
            "huber_delta": model.config.huber_delta,
            "hidden_layers": model.config.hidden_layers,
            "hidden_dim": model.config.hidden_dim,
            "dropout": model.config.dropout,
            "batch_norm": model.config.batch_norm,
            "rounding": model.config.rounding,
        },
        "signature": model.signature,
        "norm_mean": model.norm_mean.tolist(),
        "norm_std": model.norm_std.tolist(),
        "mask": model.mask.tolist(),
        "layers": [
            {"weights": w.tolist(), "biases": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
        "batch_norm": None
        if model.bn_gamma is None
        else {
            "gamma": [g.tolist() for g in model.bn_gamma],
            "beta": [b.tolist() for b in model.bn_beta],
            "mean": [m.tolist() for m in model.bn_mean],
            "var": [v.tolist() for v in model.bn_var],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> ProxyModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    cfg = TrainingConfig(**doc["config"])
    bn = doc.get("batch_norm")
    return ProxyModel(
        weights=[np.array(l["weights"]) for l in doc["layers"]],
        biases=[np.array(l["biases"]) for l in doc["layers"]],
        norm_mean=np.array(doc["norm_mean"]),
        norm_std=np.array(doc["norm_std"]),
        mask=np.array(doc["mask"]),
        config=cfg,
        signature=doc["signature"],
        bn_gamma=[np.array(g) for g in bn["gamma"]] if bn else None,
        bn_beta=[np.array(b) for b in bn["beta"]] if bn else None,
        bn_mean=[np.array(m) for m in bn["mean"]] if bn else None,
        bn_var=[np.array(v) for v in bn["var"]] if bn else None,
    )
