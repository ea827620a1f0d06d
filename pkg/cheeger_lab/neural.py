from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from cheeger_lab.errors import (
    DivergenceError,
    EmptyCandidatesError,
    EmptySplitError,
    InvalidParametersError,
    NonFiniteParameterError,
)
from cheeger_lab.estimators import deviation, mean_std
from cheeger_lab.graph import Seed

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (64, 64, 32, 16)
MIN_DATASET = 50
MLP_HEADER = "# cheeger-lab mlp v1"
HIDDEN_ACTIVATION = "relu"
OUTPUT_ACTIVATION = "identity"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Substreams of TrainConfig.seed.
_INIT_STREAM = 0
_SPLIT_STREAM = 1
_SHUFFLE_STREAM = 2


@dataclass(frozen=True)
class Standardizer:
    """Per-feature affine input scaling fitted on the training split."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    @classmethod
    def identity(cls, m: int) -> "Standardizer":
        return cls(mean=(0.0,) * m, std=(1.0,) * m)

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)
        return cls(mean=tuple(float(v) for v in mean), std=tuple(float(v) for v in std))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - np.asarray(self.mean)) / np.asarray(self.std)


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Feed-forward net; weights[l] has shape (layer_dims[l+1], layer_dims[l])."""

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    standardizer: Standardizer
    hidden_activation: str = HIDDEN_ACTIVATION
    output_activation: str = OUTPUT_ACTIVATION

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "MlpModel":
        return replace(self, weights=tuple(params[0::2]), biases=tuple(params[1::2]))


@dataclass(frozen=True)
class MlpGradient:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def _check_dims(layer_dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims) or dims[-1] != 1:
        raise InvalidParametersError(f"invalid dims {tuple(layer_dims)}: need >= 2 positive sizes ending in 1")
    return dims


def mlp_init(layer_dims: Sequence[int], seed: Seed) -> MlpModel:
    """Zero-mean normal weights with scale 1/sqrt(fan-in), zero biases."""

    dims = _check_dims(layer_dims)
    rng = seed.rng(_INIT_STREAM)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        layer_dims=dims,
        weights=tuple(weights),
        biases=tuple(biases),
        standardizer=Standardizer.identity(dims[0]),
    )


def _as_inputs(model: MlpModel, inputs: Any) -> np.ndarray:
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise InvalidParametersError(f"arity mismatch: model takes {model.input_dim} inputs, got {x.shape[1]}")
    return x


def _check_finite(model: MlpModel) -> None:
    for p in model.parameters():
        if not np.all(np.isfinite(p)):
            raise NonFiniteParameterError("model holds non-finite parameters")


def _forward(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    # Returns outputs plus per-layer inputs and pre-activations for backprop.
    a = model.standardizer.apply(x)
    layer_inputs: list[np.ndarray] = []
    pre: list[np.ndarray] = []
    last = len(model.weights) - 1
    for idx, (w, b) in enumerate(zip(model.weights, model.biases)):
        layer_inputs.append(a)
        z = a @ w.T + b
        pre.append(z)
        a = z if idx == last else np.maximum(z, 0.0)
    return a[:, 0], layer_inputs, pre


def mlp_predict(model: MlpModel, inputs: Any) -> np.ndarray:
    """Batch forward pass; one output per input row."""
    _check_finite(model)
    out, _, _ = _forward(model, _as_inputs(model, inputs))
    return out


def mlp_forward(model: MlpModel, inputs: Sequence[float]) -> float:
    if len(inputs) != model.input_dim:
        raise InvalidParametersError(f"arity mismatch: model takes {model.input_dim} inputs, got {len(inputs)}")
    return float(mlp_predict(model, [list(inputs)])[0])


def _grad_arrays(model: MlpModel, x: np.ndarray, y: np.ndarray) -> tuple[list[np.ndarray], float]:
    out, layer_inputs, pre = _forward(model, x)
    residual = out - y
    loss = float(np.mean(residual**2))
    delta = (2.0 / len(y)) * residual[:, None]
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(model.weights))
    for idx in range(len(model.weights) - 1, -1, -1):
        grads[2 * idx] = delta.T @ layer_inputs[idx]
        grads[2 * idx + 1] = delta.sum(axis=0)
        if idx:
            delta = (delta @ model.weights[idx]) * (pre[idx - 1] > 0.0)
    return grads, loss


def mlp_grad(model: MlpModel, batch: Sequence[tuple[Sequence[float], float]]) -> MlpGradient:
    """Exact gradient of the batch mean-squared error by reverse-mode differentiation."""

    if not batch:
        raise InvalidParametersError("mlp_grad needs a non-empty batch")
    x = _as_inputs(model, [list(inputs) for inputs, _ in batch])
    y = np.asarray([target for _, target in batch], dtype=np.float64)
    grads, _ = _grad_arrays(model, x, y)
    return MlpGradient(weights=tuple(grads[0::2]), biases=tuple(grads[1::2]))


class Adam:
    def __init__(self, params: Sequence[np.ndarray], learning_rate: float):
        self.learning_rate = learning_rate
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> list[np.ndarray]:
        self.t += 1
        bias1 = 1.0 - ADAM_BETA1**self.t
        bias2 = 1.0 - ADAM_BETA2**self.t
        updated = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g
            m_hat = self.m[i] / bias1
            v_hat = self.v[i] / bias2
            updated.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
        return updated


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 128
    learning_rate: float = 1e-3
    split_fraction: float = 0.4
    seed: Seed = field(default_factory=lambda: Seed(0))
    early_stop_patience: int | None = 20
    hidden: tuple[int, ...] = DEFAULT_HIDDEN

    @classmethod
    def full(cls, seed: Seed, **overrides: Any) -> "TrainConfig":
        return cls(**{"epochs": 500, "early_stop_patience": 20, "seed": seed, **overrides})

    @classmethod
    def moderate(cls, seed: Seed, **overrides: Any) -> "TrainConfig":
        return cls(**{"epochs": 50, "early_stop_patience": None, "seed": seed, **overrides})

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidParametersError(f"epochs and batch_size must be positive ({self.epochs}, {self.batch_size})")
        if not self.learning_rate > 0:
            raise InvalidParametersError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.split_fraction < 1.0:
            raise InvalidParametersError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise InvalidParametersError(f"early_stop_patience must be >= 1, got {self.early_stop_patience}")


@dataclass(frozen=True)
class TrainReport:
    final_train_loss: float
    epoch_losses: tuple[float, ...]
    val_losses: tuple[float, ...]
    mean_dev_train: float
    std_dev_train: float
    mean_dev_val: float
    std_dev_val: float
    epochs_run: int
    best_epoch: int
    train_deviations: tuple[float, ...] = ()
    val_deviations: tuple[float, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "final_train_loss": self.final_train_loss,
            "mean_dev_train": self.mean_dev_train,
            "std_dev_train": self.std_dev_train,
            "mean_dev_val": self.mean_dev_val,
            "std_dev_val": self.std_dev_val,
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "epoch_losses": list(self.epoch_losses),
            "val_losses": list(self.val_losses),
        }


def split_indices(n_records: int, fraction: float, seed: Seed) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle split: the first floor(fraction*N) indices train, the rest validate."""

    n_train = int(math.floor(fraction * n_records))
    if n_train == 0 or n_train == n_records:
        raise EmptySplitError(f"split of {n_records} records at {fraction} leaves an empty side")
    perm = seed.rng(_SPLIT_STREAM).permutation(n_records)
    return perm[:n_train], perm[n_train:]


def _mse(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    out, _, _ = _forward(model, x)
    return float(np.mean((out - y) ** 2))


def fit_parameters(
    model: MlpModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    config: TrainConfig,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
) -> tuple[MlpModel, list[float], list[float], int]:
    """Adam on mini-batch MSE. Early stopping needs a validation set and
    restores the best-validation parameters.

    Returns (model, per-epoch train losses, per-epoch val losses, best epoch).
    """

    shuffle_rng = config.seed.rng(_SHUFFLE_STREAM)
    params = model.parameters()
    adam = Adam(params, config.learning_rate)
    train_losses: list[float] = []
    val_losses: list[float] = []
    has_val = x_val is not None and y_val is not None
    best_val = math.inf
    best_params = params
    best_epoch = 0
    stale = 0

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(y_train))
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            grads, _ = _grad_arrays(model, x_train[idx], y_train[idx])
            params = adam.step(params, grads)
            model = model.with_parameters(params)

        train_loss = _mse(model, x_train, y_train)
        if not math.isfinite(train_loss):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch + 1}")
        train_losses.append(train_loss)
        if not has_val:
            best_epoch = epoch + 1
            continue

        val_loss = _mse(model, x_val, y_val)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"validation loss became non-finite at epoch {epoch + 1}")
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = params
            best_epoch = epoch + 1
            stale = 0
        else:
            stale += 1
        if config.early_stop_patience is not None and stale >= config.early_stop_patience:
            logger.info(f"early stop at epoch {epoch + 1}; best validation epoch {best_epoch}")
            break

    if has_val and config.early_stop_patience is not None:
        model = model.with_parameters(best_params)
    elif has_val:
        best_epoch = len(train_losses)
    return model, train_losses, val_losses, best_epoch


def _deviations(model: MlpModel, x: np.ndarray, y: np.ndarray) -> list[float]:
    out, _, _ = _forward(model, x)
    return [deviation(float(est), float(true)) for est, true in zip(out, y)]


def train(
    dataset: Sequence[tuple[Sequence[float], float]],
    config: TrainConfig,
    min_records: int = MIN_DATASET,
) -> tuple[MlpModel, TrainReport]:
    """Train on a seeded split_fraction share of `dataset`, validate on the rest."""

    config.validate()
    if len(dataset) < min_records:
        raise InvalidParametersError(f"train needs at least {min_records} records, got {len(dataset)}")
    arity = len(dataset[0][0])
    if any(len(inputs) != arity for inputs, _ in dataset):
        raise InvalidParametersError("train inputs must share one arity")

    x = np.asarray([list(inputs) for inputs, _ in dataset], dtype=np.float64)
    y = np.asarray([h for _, h in dataset], dtype=np.float64)
    train_idx, val_idx = split_indices(len(y), config.split_fraction, config.seed)
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    model = mlp_init((arity, *config.hidden, 1), config.seed)
    model = replace(model, standardizer=Standardizer.fit(x_train))
    model, train_losses, val_losses, best_epoch = fit_parameters(model, x_train, y_train, config, x_val, y_val)

    train_dev = _deviations(model, x_train, y_train)
    val_dev = _deviations(model, x_val, y_val)
    mean_train, std_train = mean_std(train_dev)
    mean_val, std_val = mean_std(val_dev)
    report = TrainReport(
        final_train_loss=_mse(model, x_train, y_train),
        epoch_losses=tuple(train_losses),
        val_losses=tuple(val_losses),
        mean_dev_train=mean_train,
        std_dev_train=std_train,
        mean_dev_val=mean_val,
        std_dev_val=std_val,
        epochs_run=len(train_losses),
        best_epoch=best_epoch,
        train_deviations=tuple(train_dev),
        val_deviations=tuple(val_dev),
    )
    logger.info(
        f"trained mlp {model.layer_dims} on {len(y_train)} records: "
        f"mean dev train={mean_train:.4f} val={mean_val:.4f} ({report.epochs_run} epochs)"
    )
    return model, report


def model_select(candidates: Sequence[tuple[MlpModel, TrainReport]]) -> MlpModel:
    """Candidate with the lowest finite validation deviation; earliest wins ties."""

    best: tuple[MlpModel, float] | None = None
    for model, report in candidates:
        score = report.mean_dev_val
        if not math.isfinite(score):
            continue
        if best is None or score < best[1]:
            best = (model, score)
    if best is None:
        raise EmptyCandidatesError("no candidate with a finite validation deviation")
    return best[0]


def save_mlp(model: MlpModel, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        MLP_HEADER,
        "layer_dims = " + " ".join(str(d) for d in model.layer_dims),
        f"hidden_activation = {model.hidden_activation}",
        f"output_activation = {model.output_activation}",
        "input_mean = " + " ".join(f"{v:.17g}" for v in model.standardizer.mean),
        "input_std = " + " ".join(f"{v:.17g}" for v in model.standardizer.std),
        f"parameters = {model.parameter_count}",
    ]
    for p in model.parameters():
        lines.extend(f"{v:.17g}" for v in p.ravel())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mlp(path: Path) -> MlpModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != MLP_HEADER:
        raise InvalidParametersError(f"{path}: missing '{MLP_HEADER}' header")
    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and "=" in lines[pos]:
        key, _, value = lines[pos].partition("=")
        header[key.strip()] = value.strip()
        pos += 1
    try:
        dims = _check_dims([int(d) for d in header["layer_dims"].split()])
        mean = tuple(float(v) for v in header["input_mean"].split())
        std = tuple(float(v) for v in header["input_std"].split())
        count = int(header["parameters"])
        values = np.asarray([float(v) for v in lines[pos:] if v.strip()], dtype=np.float64)
    except (KeyError, ValueError) as exc:
        raise InvalidParametersError(f"{path}: malformed model file ({exc})") from exc
    activations = (
        header.get("hidden_activation", HIDDEN_ACTIVATION),
        header.get("output_activation", OUTPUT_ACTIVATION),
    )
    if activations != (HIDDEN_ACTIVATION, OUTPUT_ACTIVATION):
        raise InvalidParametersError(
            f"{path}: unsupported activations {activations}, expected ({HIDDEN_ACTIVATION!r}, {OUTPUT_ACTIVATION!r})"
        )
    if values.size != count:
        raise InvalidParametersError(f"{path}: header declares {count} parameters, found {values.size}")

    weights = []
    biases = []
    offset = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(values[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in))
        offset += fan_in * fan_out
        biases.append(values[offset : offset + fan_out].copy())
        offset += fan_out
    if offset != count:
        raise InvalidParametersError(f"{path}: {count} parameters do not fit dims {dims}")
    model = MlpModel(
        layer_dims=dims,
        weights=tuple(weights),
        biases=tuple(biases),
        standardizer=Standardizer(mean=mean, std=std),
    )
    _check_finite(model)
    return model


def is_mlp_file(path: Path) -> bool:
    with Path(path).open(encoding="utf-8") as f:
        return f.readline().strip() == MLP_HEADER
