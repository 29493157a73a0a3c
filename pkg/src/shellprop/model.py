"""Two-stage MLP classifier over fused shell propagation.

The forward pass is: transform features, propagate once through the fused
shell operator, transform again, softmax.  Gradients are derived by hand and
updated with Adam; the loss is the plain sum of per-node negative
log-likelihoods over the labeled set, so the learning rate is interpreted
against the summed (not averaged) loss.  Dropout uses the inverted-scaling
convention on the input of each affine stage and is active only in training
mode.
"""
from __future__ import annotations

import struct
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, NumericError
from .shells import FusedPropagator, fuse_shells, fused_propagate, shell_decompose

_CHECKPOINT_MAGIC = b"SHLP"
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Weights and biases of the two affine stages."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 2.0
    l_cap: int | None = None
    hidden: int = 64
    dropout: float = 0.5
    lr: float = 1e-2
    weight_decay: float = 5e-3
    epochs: int = 500
    patience: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not np.isfinite(self.alpha) or self.alpha <= 1.0:
            raise ConfigError(f"alpha must be > 1, got {self.alpha}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.hidden < 1:
            raise ConfigError(f"hidden width must be >= 1, got {self.hidden}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.l_cap is not None and self.l_cap < 1:
            raise ConfigError(f"l_cap must be >= 1 when given, got {self.l_cap}")


@dataclass(frozen=True, eq=False)
class TrainHistory:
    train_loss: list[float]
    val_accuracy: list[float]
    best_epoch: int
    wall_time: float


@dataclass(frozen=True, eq=False)
class AdamState:
    step: int
    m: ModelParams
    v: ModelParams


def init_params(d: int, hidden: int, num_classes: int, rng) -> ModelParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return ModelParams(
        w1=glorot(d, hidden),
        b1=np.zeros(hidden),
        w2=glorot(hidden, num_classes),
        b2=np.zeros(num_classes),
    )


def init_adam(params: ModelParams) -> AdamState:
    zeros = ModelParams(*(np.zeros_like(a) for a in params.arrays()))
    zeros2 = ModelParams(*(np.zeros_like(a) for a in params.arrays()))
    return AdamState(step=0, m=zeros, v=zeros2)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _dropout_mask(rng, shape, rate: float) -> np.ndarray:
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


def _forward_cache(
    params: ModelParams,
    x: np.ndarray,
    p: FusedPropagator,
    dropout: float,
    rng,
) -> dict:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.w1.shape[0]:
        raise InputError(
            f"feature matrix must be 2-D with {params.w1.shape[0]} columns,"
            f" got shape {x.shape}"
        )
    if dropout > 0.0:
        if rng is None:
            raise InputError("dropout requires a seeded rng")
        mask1 = _dropout_mask(rng, x.shape, dropout)
        x_in = x * mask1
    else:
        mask1 = None
        x_in = x
    a1 = x_in @ params.w1 + params.b1
    z = np.maximum(a1, 0.0)
    s = fused_propagate(p, z)
    if dropout > 0.0:
        mask2 = _dropout_mask(rng, s.shape, dropout)
        s_in = s * mask2
    else:
        mask2 = None
        s_in = s
    logits = s_in @ params.w2 + params.b2
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite values in logits")
    probs = _softmax(logits)
    return {
        "x_in": x_in,
        "a1": a1,
        "s_in": s_in,
        "mask2": mask2,
        "logits": logits,
        "probs": probs,
    }


def forward(
    params: ModelParams,
    x: np.ndarray,
    p: FusedPropagator,
    train_mode: bool = False,
    rng=None,
    dropout: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the model; returns (logits, probabilities).

    Dropout is applied to the input of both affine stages, only when
    ``train_mode`` is set, with inverted scaling so evaluation needs no
    rescale.
    """
    rate = dropout if train_mode else 0.0
    cache = _forward_cache(params, x, p, rate, rng)
    return cache["logits"], cache["probs"]


def loss(probabilities: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    """Summed negative log-likelihood over the masked nodes.

    Probabilities are clamped at 1e-12 before the log.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise InputError("loss mask must be non-empty")
    y = np.asarray(y, dtype=np.int64)
    p_true = probabilities[mask, y[mask]]
    return float(-np.log(np.maximum(p_true, 1e-12)).sum())


def _grads_from_cache(
    cache: dict,
    params: ModelParams,
    p: FusedPropagator,
    y: np.ndarray,
    mask: np.ndarray,
    weight_decay: float,
) -> ModelParams:
    probs = cache["probs"]
    g = np.zeros_like(probs)
    g[mask] = probs[mask]
    g[mask, y[mask]] -= 1.0
    grad_w2 = cache["s_in"].T @ g + weight_decay * params.w2
    grad_b2 = g.sum(axis=0)
    ds_in = g @ params.w2.T
    ds = ds_in * cache["mask2"] if cache["mask2"] is not None else ds_in
    # every normalized shell is symmetric, so the adjoint reuses the operator
    dz = fused_propagate(p, ds)
    da1 = dz * (cache["a1"] > 0.0)
    grad_w1 = cache["x_in"].T @ da1 + weight_decay * params.w1
    grad_b1 = da1.sum(axis=0)
    return ModelParams(grad_w1, grad_b1, grad_w2, grad_b2)


def backward(
    params: ModelParams,
    x: np.ndarray,
    p: FusedPropagator,
    y: np.ndarray,
    mask: np.ndarray,
    rng=None,
    dropout: float = 0.5,
    weight_decay: float = 0.0,
) -> ModelParams:
    """Analytic gradients of the summed loss plus (weight_decay/2)*||W||^2.

    The same rng seeding as the paired forward call reproduces the same
    dropout masks.  Weight decay applies to the two weight matrices only.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise InputError("loss mask must be non-empty")
    y = np.asarray(y, dtype=np.int64)
    cache = _forward_cache(params, x, p, dropout, rng)
    return _grads_from_cache(cache, params, p, y, mask, weight_decay)


def adam_step(
    state: AdamState,
    params: ModelParams,
    gradients: ModelParams,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; returns (new params, new state)."""
    b1, b2 = betas
    t = state.step + 1
    new_p, new_m, new_v = [], [], []
    for theta, g, m, v in zip(
        params.arrays(), gradients.arrays(), state.m.arrays(), state.v.arrays()
    ):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(theta - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return ModelParams(*new_p), AdamState(t, ModelParams(*new_m), ModelParams(*new_v))


def evaluate(params: ModelParams, dataset, p: FusedPropagator, mask) -> tuple[float, float]:
    """Accuracy and macro-F1 of argmax predictions on the masked nodes.

    Argmax ties break toward the lowest class index.  Macro-F1 averages
    per-class F1 over all classes, scoring 0 for a class absent from both
    prediction and truth.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise InputError("evaluation mask must be non-empty")
    _, probs = forward(params, dataset.features, p, train_mode=False)
    preds = probs[mask].argmax(axis=1)
    truth = np.asarray(dataset.labels, dtype=np.int64)[mask]
    accuracy = float((preds == truth).mean())
    f1s = []
    for c in range(dataset.num_classes):
        tp = int(((preds == c) & (truth == c)).sum())
        fp = int(((preds == c) & (truth != c)).sum())
        fn = int(((preds != c) & (truth == c)).sum())
        f1s.append(0.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn))
    return accuracy, float(np.mean(f1s))


def _masked_accuracy(
    params: ModelParams,
    x: np.ndarray,
    row_slices,
    coefficients,
    truth: np.ndarray,
) -> float:
    """Validation accuracy via shells row-sliced to the masked nodes.

    Per-row arithmetic is identical to the full forward pass (row slicing
    keeps each row's summation order), only the unused rows are skipped.
    """
    z = np.maximum(x @ params.w1 + params.b1, 0.0)
    s = np.zeros((truth.shape[0], params.w1.shape[1]))
    for theta, rows in zip(coefficients, row_slices):
        s += theta * (rows @ z)
    logits = s @ params.w2 + params.b2
    return float((logits.argmax(axis=1) == truth).mean())


def train(
    dataset, config: TrainConfig, propagator: FusedPropagator | None = None
) -> tuple[ModelParams, TrainHistory]:
    """Full-graph training with early stopping on validation accuracy.

    The shell decomposition happens once, before the epoch loop.  Parameters
    from the best validation epoch are returned; runs are deterministic for
    a fixed seed.
    """
    started = time.perf_counter()
    split = dataset.split
    if split is None:
        raise InputError("dataset has no split; build one with make_split")
    if not np.all(np.isfinite(dataset.features)):
        raise InputError("features must be finite")
    if propagator is None:
        decomposition = shell_decompose(dataset.graph, config.l_cap)
        propagator = fuse_shells(decomposition, config.alpha)
    x = np.asarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels, dtype=np.int64)
    train_mask = np.asarray(split.train, dtype=np.int64)
    val_mask = np.asarray(split.val, dtype=np.int64)
    if val_mask.size == 0:
        raise InputError("validation set must be non-empty for early stopping")
    val_truth = y[val_mask]
    val_slices = [s.to_scipy()[val_mask] for s in propagator.normalized_shells]

    seeds = np.random.SeedSequence(config.seed).spawn(config.epochs + 1)
    params = init_params(x.shape[1], config.hidden, dataset.num_classes, np.random.default_rng(seeds[0]))
    adam = init_adam(params)

    losses: list[float] = []
    val_accs: list[float] = []
    best_acc = -1.0
    best_epoch = 0
    best_params = params
    for epoch in range(config.epochs):
        rng = np.random.default_rng(seeds[epoch + 1])
        cache = _forward_cache(params, x, propagator, config.dropout, rng)
        epoch_loss = loss(cache["probs"], y, train_mask)
        if not np.isfinite(epoch_loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        grads = _grads_from_cache(
            cache, params, propagator, y, train_mask, config.weight_decay
        )
        params, adam = adam_step(adam, params, grads, config.lr)
        val_acc = _masked_accuracy(
            params, x, val_slices, propagator.coefficients, val_truth
        )
        losses.append(epoch_loss)
        val_accs.append(val_acc)
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = params
        elif epoch - best_epoch >= config.patience:
            break
    history = TrainHistory(
        train_loss=losses,
        val_accuracy=val_accs,
        best_epoch=best_epoch,
        wall_time=time.perf_counter() - started,
    )
    return best_params, history


def save_checkpoint(path, params: ModelParams) -> None:
    """Write the versioned little-endian checkpoint layout."""
    d, h = params.w1.shape
    c = params.w2.shape[1]
    if params.b1.shape != (h,) or params.w2.shape != (h, c) or params.b2.shape != (c,):
        raise InputError("inconsistent parameter shapes")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIII", _CHECKPOINT_MAGIC, _CHECKPOINT_VERSION, d, h, c))
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    header = struct.calcsize("<4sIIII")
    if len(raw) < header:
        raise InputError(f"{path}: truncated checkpoint")
    magic, version, d, h, c = struct.unpack_from("<4sIIII", raw)
    if magic != _CHECKPOINT_MAGIC:
        raise InputError(f"{path}: not a checkpoint file")
    if version != _CHECKPOINT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint version {version}")
    counts = (d * h, h, h * c, c)
    if len(raw) != header + 8 * sum(counts):
        raise InputError(f"{path}: checkpoint size does not match its header")
    out = []
    offset = header
    for count, shape in zip(counts, ((d, h), (h,), (h, c), (c,))):
        a = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        out.append(a.astype(np.float64).reshape(shape))
        offset += 8 * count
    return ModelParams(*out)
