"""Small convolutional keyword classifier written directly in numpy.

Architecture: 3x3 conv (1->16) -> ReLU -> 2x2 average pool -> 3x3 conv
(16->32) -> ReLU -> global average pool -> dense 32->11 -> softmax. Global
pooling lets one network accept spectrograms of any size, so every sweep
point trains the same model.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .dataset import N_CLASSES
from .errors import ArgumentError, ContainerError, TrainingDivergedError

PARAM_ORDER = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc_w", "fc_b")
WEIGHT_NAMES = ("conv1_w", "conv2_w", "fc_w")
CONV1_CHANNELS = 16
CONV2_CHANNELS = 32

CKPT_MAGIC = b"AFBM"
CKPT_VERSION = 1


@dataclass(eq=False)
class SmallNet:
    params: dict[str, np.ndarray]
    n_classes: int = N_CLASSES

    @property
    def dtype(self):
        return self.params["fc_w"].dtype

    def copy(self) -> "SmallNet":
        return SmallNet({k: v.copy() for k, v in self.params.items()}, self.n_classes)

    def astype(self, dtype) -> "SmallNet":
        return SmallNet({k: v.astype(dtype) for k, v in self.params.items()}, self.n_classes)

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def weight_sq_norm(self) -> float:
        return float(sum(np.sum(self.params[k] ** 2) for k in WEIGHT_NAMES))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    lr_decay: float = 0.9
    epochs: int = 25
    batch_size: int = 64
    l2: float = 0.001
    seed: int = 0
    precision: str = "float32"

    def __post_init__(self):
        if self.precision not in ("float32", "float64"):
            raise ArgumentError(f"precision must be float32 or float64, got {self.precision!r}")
        if not (self.learning_rate > 0 and self.momentum >= 0 and self.epochs > 0 and self.batch_size > 0 and self.l2 >= 0):
            raise ArgumentError(f"invalid training hyperparameters: {self}")
        if not 0 < self.lr_decay <= 1:
            raise ArgumentError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate in effect during ``epoch`` (1-based)."""
        return self.learning_rate * self.lr_decay ** (epoch - 1)


TRAIN_PRESETS = {
    "default": TrainConfig(),
    "paper": TrainConfig(learning_rate=1.0),
    # Reduced corpora give ~12 updates per epoch at batch 64. Batch 8 with a
    # larger step was best on the validation split of the desk corpus.
    "desk": TrainConfig(learning_rate=0.2, batch_size=8),
}


@dataclass
class EpochStats:
    epoch: int
    learning_rate: float
    loss: float
    accuracy: float


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # [true, predicted]
    predictions: np.ndarray = field(repr=False)


def init_model(seed: int, n_classes: int = N_CLASSES) -> SmallNet:
    """Fan-in scaled normal weights (He for the ReLU convs), zero biases."""
    rng = np.random.default_rng(seed)

    def normal(shape, fan_in, gain):
        return rng.standard_normal(shape) * np.sqrt(gain / fan_in)

    params = {
        "conv1_w": normal((CONV1_CHANNELS, 1, 3, 3), 9, 2.0),
        "conv1_b": np.zeros(CONV1_CHANNELS),
        "conv2_w": normal((CONV2_CHANNELS, CONV1_CHANNELS, 3, 3), 9 * CONV1_CHANNELS, 2.0),
        "conv2_b": np.zeros(CONV2_CHANNELS),
        "fc_w": normal((n_classes, CONV2_CHANNELS), CONV2_CHANNELS, 1.0),
        "fc_b": np.zeros(n_classes),
    }
    return SmallNet(params, n_classes)


# -- layers ------------------------------------------------------------------------


def _conv_same(x, w, b):
    """3x3 'same' convolution on channel-last input ``[B, H, W, C]``.

    Returns the output and the contiguous im2col matrix reused by the backward pass.
    """
    bsz, h, wd, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((bsz, h, wd, 3, 3, c), dtype=x.dtype)
    for i in range(3):
        for j in range(3):
            cols[:, :, :, i, j, :] = xp[:, i : i + h, j : j + wd, :]
    cols = cols.reshape(bsz * h * wd, 9 * c)
    w2d = w.transpose(2, 3, 1, 0).reshape(9 * c, -1)
    out = cols @ w2d + b
    return out.reshape(bsz, h, wd, -1), cols


def _conv_same_backward(gout, cols, w, need_dx=True):
    bsz, h, wd, o = gout.shape
    c = w.shape[1]
    g2d = gout.reshape(-1, o)
    db = g2d.sum(axis=0)
    dw = (cols.T @ g2d).reshape(3, 3, c, o).transpose(3, 2, 0, 1)
    if not need_dx:
        return None, dw, db
    w2d = w.transpose(2, 3, 1, 0).reshape(9 * c, o)
    dcols = (g2d @ w2d.T).reshape(bsz, h, wd, 3, 3, c)
    dxp = np.zeros((bsz, h + 2, wd + 2, c), dtype=gout.dtype)
    for i in range(3):
        for j in range(3):
            dxp[:, i : i + h, j : j + wd, :] += dcols[:, :, :, i, j, :]
    return dxp[:, 1:-1, 1:-1, :], dw, db


def _pool_counts(h, w):
    """Number of real elements in each 2x2 window; odd edges keep partial windows."""
    rows = np.minimum(2, h - 2 * np.arange((h + 1) // 2))
    cols = np.minimum(2, w - 2 * np.arange((w + 1) // 2))
    return np.outer(rows, cols)[:, :, None]


def _avg_pool(x):
    b, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (0, h % 2), (0, w % 2), (0, 0)))
    sums = xp.reshape(b, xp.shape[1] // 2, 2, xp.shape[2] // 2, 2, c).sum(axis=(2, 4))
    return sums / _pool_counts(h, w).astype(x.dtype)


def _avg_pool_backward(gout, shape):
    h, w = shape[1], shape[2]
    g = gout / _pool_counts(h, w).astype(gout.dtype)
    return np.repeat(np.repeat(g, 2, axis=1), 2, axis=2)[:, :h, :w, :]


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(x, dtype=np.float64):
    x = np.asarray(getattr(x, "values", x), dtype=dtype)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ArgumentError(f"expected [batch, channels, frames] input, got shape {x.shape}")
    return x[:, :, :, None]


def _forward(model: SmallNet, x):
    p = model.params
    z1, cols1 = _conv_same(x, p["conv1_w"], p["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    pooled = _avg_pool(a1)
    z2, cols2 = _conv_same(pooled, p["conv2_w"], p["conv2_b"])
    a2 = np.maximum(z2, 0.0)
    g = a2.mean(axis=(1, 2))
    logits = g @ p["fc_w"].T + p["fc_b"]
    cache = (x, cols1, z1, a1.shape, cols2, z2, g)
    return logits, cache


def logits(model: SmallNet, batch) -> np.ndarray:
    return _forward(model, _as_batch(batch, model.dtype))[0]


def predict_proba(model: SmallNet, batch) -> np.ndarray:
    return _softmax(logits(model, batch))


def forward(model: SmallNet, spectrogram) -> np.ndarray:
    """Class probabilities for one spectrogram (``Spectrogram`` or 2-D array)."""
    return predict_proba(model, spectrogram)[0]


def loss_and_gradients(model: SmallNet, batch, l2: float = 0.0):
    """Mean cross-entropy plus ``l2/2 * sum(w^2)`` over weights (biases excluded).

    Arithmetic runs in the model's parameter dtype.
    ``batch`` is ``(inputs, labels)`` with inputs shaped ``[B, channels, frames]``.
    Returns ``(loss, grads, probs)``.
    """
    inputs, labels = batch
    x = _as_batch(inputs, model.dtype)
    y = np.asarray(labels, dtype=int)
    if x.shape[0] == 0 or y.shape != (x.shape[0],):
        raise ArgumentError("batch must be non-empty with one label per input")
    p = model.params
    out, (x, cols1, z1, a1_shape, cols2, z2, g) = _forward(model, x)
    probs = _softmax(out)
    bsz = x.shape[0]
    nll = -np.log(np.maximum(probs[np.arange(bsz), y], np.finfo(probs.dtype).tiny))
    loss = float(nll.mean() + 0.5 * l2 * model.weight_sq_norm())

    dlogits = probs.copy()
    dlogits[np.arange(bsz), y] -= 1.0
    dlogits /= bsz
    grads = {"fc_w": dlogits.T @ g, "fc_b": dlogits.sum(axis=0)}
    dg = dlogits @ p["fc_w"]
    h2, w2 = z2.shape[1], z2.shape[2]
    dz2 = (dg / (h2 * w2))[:, None, None, :] * (z2 > 0)
    dpooled, grads["conv2_w"], grads["conv2_b"] = _conv_same_backward(dz2, cols2, p["conv2_w"])
    dz1 = _avg_pool_backward(dpooled, a1_shape) * (z1 > 0)
    _, grads["conv1_w"], grads["conv1_b"] = _conv_same_backward(dz1, cols1, p["conv1_w"], need_dx=False)
    for name in WEIGHT_NAMES:
        grads[name] = grads[name] + l2 * p[name]
    return loss, grads, probs


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(epoch)])


def train(model: SmallNet, trainset, config: TrainConfig = TrainConfig()):
    """SGD with classical momentum and per-epoch learning-rate decay.

    ``trainset`` is ``(inputs, labels)``. The model passed in is left untouched;
    returns ``(trained_model, history)``.
    """
    inputs, labels = trainset
    dtype = np.dtype(config.precision)
    x_all = np.asarray(inputs, dtype=dtype)
    y_all = np.asarray(labels, dtype=int)
    n = x_all.shape[0]
    if n == 0:
        raise ArgumentError("training set is empty")
    model = model.astype(dtype)
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    history = []
    for epoch in range(1, config.epochs + 1):
        lr = config.lr_at(epoch)
        order = epoch_rng(config.seed, epoch).permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads, probs = loss_and_gradients(model, (x_all[idx], y_all[idx]), config.l2)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            loss_sum += loss * idx.size
            correct += int(np.sum(np.argmax(probs, axis=1) == y_all[idx]))
            for name in PARAM_ORDER:
                v = velocity[name]
                v *= config.momentum
                v -= lr * grads[name]
                model.params[name] += v
        if not all(np.all(np.isfinite(v)) for v in model.params.values()):
            raise TrainingDivergedError(epoch, float("nan"))
        history.append(EpochStats(epoch, lr, loss_sum / n, correct / n))
    return model, history


def evaluate(model: SmallNet, testset, batch_size: int = 256) -> EvalResult:
    inputs, labels = testset
    x_all = np.asarray(inputs, dtype=model.dtype)
    y_all = np.asarray(labels, dtype=int)
    if x_all.shape[0] == 0:
        raise ArgumentError("test set is empty")
    preds = np.concatenate([
        np.argmax(logits(model, x_all[i : i + batch_size]), axis=1)
        for i in range(0, x_all.shape[0], batch_size)
    ])
    confusion = np.zeros((model.n_classes, model.n_classes), dtype=int)
    np.add.at(confusion, (y_all, preds), 1)
    return EvalResult(float(np.trace(confusion) / confusion.sum()), confusion, preds)


def confidence_interval(accuracies, level: float = 0.95) -> tuple[float, float]:
    """Two-sided Student-t interval around the mean."""
    a = np.asarray(accuracies, dtype=float)
    if a.size < 2:
        raise ArgumentError(f"need at least 2 values for a confidence interval, got {a.size}")
    if not 0 < level < 1:
        raise ArgumentError(f"level must lie in (0, 1), got {level}")
    if np.all(a == a[0]):
        return float(a[0]), float(a[0])
    mean = float(a.mean())
    half = float(stats.t.ppf(0.5 + level / 2, a.size - 1) * a.std(ddof=1) / np.sqrt(a.size))
    return mean - half, mean + half


# -- checkpoint --------------------------------------------------------------------


def save_checkpoint(model: SmallNet, path) -> None:
    """Magic, version, tensor count, each tensor's dims, then float32 data in PARAM_ORDER."""
    parts = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(PARAM_ORDER))]
    for name in PARAM_ORDER:
        shape = model.params[name].shape
        parts.append(struct.pack(f"<I{len(shape)}I", len(shape), *shape))
    for name in PARAM_ORDER:
        parts.append(np.ascontiguousarray(model.params[name], dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> SmallNet:
    data = Path(path).read_bytes()
    if data[:4] != CKPT_MAGIC:
        raise ContainerError(f"{path}: not an AFBM checkpoint")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != CKPT_VERSION or count != len(PARAM_ORDER):
            raise ContainerError(f"{path}: unsupported checkpoint version {version} / {count} tensors")
        off = 12
        shapes = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<I", data, off)
            shapes.append(struct.unpack_from(f"<{ndim}I", data, off + 4))
            off += 4 + 4 * ndim
        params = {}
        for name, shape in zip(PARAM_ORDER, shapes):
            size = int(np.prod(shape))
            chunk = data[off : off + 4 * size]
            if len(chunk) != 4 * size:
                raise ContainerError(f"{path}: truncated tensor {name}")
            params[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(float)
            off += 4 * size
    except struct.error as exc:
        raise ContainerError(f"{path}: truncated header") from exc
    return SmallNet(params, params["fc_b"].shape[0])
