"""Полносвязная сеть с нуля: ReLU-скрытые слои, линейный выходной нейрон,
dropout, Adam/SGD, MSE-лосс, MAE-метрика, ранняя остановка по валидации.

Соглашения:
  * слой l: z^l = Ω^l · a^{l−1} + β^l, веса хранятся как (out, in); батч идёт
    строками, поэтому в коде ``a @ W.T + b``;
  * лосс — MSE без множителя ½: C = mean((ŷ − y)²), dC/dŷ = 2(ŷ − y)/B;
  * dropout «инвертированный»: выжившие активации делятся на (1 − p), так что
    в режиме infer ничего масштабировать не нужно;
  * веса He-uniform (±sqrt(6/fan_in)), смещения 0;
  * признаки и отклик стандартизуются по обучающей части; параметры
    стандартизации живут в самой сети и применяются в ``predict``.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from app.core.errors import ImputationError, InsufficientDataError, ShapeError
from app.schemas.checkpoint import LayerCheckpoint, NetworkCheckpoint
from app.schemas.config import AdamParams, NetworkConfig
from app.schemas.reports import TrainReport

logger = logging.getLogger(__name__)

Mode = Literal["train", "infer"]

MIN_FIT_ROWS = 5


@dataclass
class AdamState:
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, weights: list[np.ndarray], biases: list[np.ndarray]) -> AdamState:
        return cls(
            m_w=[np.zeros_like(w) for w in weights],
            v_w=[np.zeros_like(w) for w in weights],
            m_b=[np.zeros_like(b) for b in biases],
            v_b=[np.zeros_like(b) for b in biases],
        )


@dataclass
class Network:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    adam_state: AdamState
    dropout_rate: float = 0.0
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    y_mean: float = 0.0
    y_scale: float = 1.0

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("weights/biases must be non-empty lists of equal length")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(f"layer {i}: input width {w.shape[1]} != previous output {self.weights[i - 1].shape[0]}")
        if self.weights[-1].shape[0] != 1:
            raise ShapeError("output layer must have a single neuron")
        if self.x_mean is None:
            self.x_mean = np.zeros(self.n_inputs)
        if self.x_scale is None:
            self.x_scale = np.ones(self.n_inputs)

    @property
    def n_inputs(self) -> int:
        return int(self.weights[0].shape[1])

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(int(w.shape[0]) for w in self.weights[:-1])

    def is_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(np.isfinite(b).all() for b in self.biases)

    def copy(self) -> Network:
        return copy.deepcopy(self)


@dataclass
class ForwardCache:
    # inputs[l] — вход слоя l (для выходного слоя — последняя скрытая активация).
    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    dropout_masks: list[np.ndarray | None]
    output: np.ndarray


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float = field(default=0.0)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def init_network(
    n_inputs: int,
    layer_sizes: tuple[int, ...] | list[int],
    rng: np.random.Generator,
    *,
    dropout_rate: float = 0.0,
) -> Network:
    """He-uniform веса, нулевые смещения."""
    widths = (n_inputs, *layer_sizes, 1)
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / fan_in) if fan_in else 0.0
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(
        weights=weights,
        biases=biases,
        adam_state=AdamState.zeros_like(weights, biases),
        dropout_rate=dropout_rate,
    )


def forward(
    net: Network,
    x: np.ndarray,
    mode: Mode = "infer",
    rng: np.random.Generator | None = None,
) -> tuple[float | np.ndarray, ForwardCache]:
    """Прямой проход. Вектор → скаляр, матрица (батч строками) → вектор."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.ndim != 2 or a.shape[1] != net.n_inputs:
        raise ShapeError(f"input width {a.shape[-1]} != network input width {net.n_inputs}")
    drop = mode == "train" and net.dropout_rate > 0
    if drop and rng is None:
        raise ValueError("train mode with dropout needs an rng")

    inputs: list[np.ndarray] = []
    pre: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        inputs.append(a)
        z = a @ w.T + b
        pre.append(z)
        h = relu(z)
        if drop:
            keep = rng.random(h.shape) >= net.dropout_rate
            m = keep / (1.0 - net.dropout_rate)
            h = h * m
            masks.append(m)
        else:
            masks.append(None)
        a = h
    inputs.append(a)
    out = (a @ net.weights[-1].T + net.biases[-1])[:, 0]
    cache = ForwardCache(inputs=inputs, pre_activations=pre, dropout_masks=masks, output=out)
    return (float(out[0]) if single else out), cache


def backward(net: Network, cache: ForwardCache, target: float | np.ndarray) -> Gradients:
    """Градиенты MSE по всем весам и смещениям (цепное правило слой за слоем)."""
    y = np.atleast_1d(np.asarray(target, dtype=np.float64))
    pred = cache.output
    if y.shape != pred.shape:
        raise ShapeError(f"target shape {y.shape} != prediction shape {pred.shape}")
    batch = pred.shape[0]
    resid = pred - y
    loss = float(np.mean(resid**2))

    n_layers = len(net.weights)
    g_w: list[np.ndarray] = [np.empty(0)] * n_layers
    g_b: list[np.ndarray] = [np.empty(0)] * n_layers

    delta = (2.0 / batch) * resid[:, None]  # dC/dz выходного слоя, (B, 1)
    for l in range(n_layers - 1, -1, -1):
        a_prev = cache.inputs[l]
        g_w[l] = delta.T @ a_prev
        g_b[l] = delta.sum(axis=0)
        if l == 0:
            break
        delta = delta @ net.weights[l]
        m = cache.dropout_masks[l - 1]
        if m is not None:
            delta = delta * m
        # Производная relu: 1 при z > 0, иначе 0 (в том числе ровно в нуле).
        delta = delta * (cache.pre_activations[l - 1] > 0)
    return Gradients(weights=g_w, biases=g_b, loss=loss)


def adam_step(net: Network, grads: Gradients, params: AdamParams | None = None) -> Network:
    """Один шаг Adam с поправкой смещения моментов. Обновляет сеть на месте."""
    p = params or AdamParams()
    st = net.adam_state
    st.t += 1
    c1 = 1.0 - p.beta1**st.t
    c2 = 1.0 - p.beta2**st.t
    for theta, g, m, v in (
        *zip(net.weights, grads.weights, st.m_w, st.v_w),
        *zip(net.biases, grads.biases, st.m_b, st.v_b),
    ):
        if theta.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {theta.shape}")
        m *= p.beta1
        m += (1.0 - p.beta1) * g
        v *= p.beta2
        v += (1.0 - p.beta2) * g * g
        theta -= p.lr * (m / c1) / (np.sqrt(v / c2) + p.epsilon)
    return net


def sgd_step(net: Network, grads: Gradients, lr: float) -> Network:
    for theta, g in (*zip(net.weights, grads.weights), *zip(net.biases, grads.biases)):
        theta -= lr * g
    return net


def _standardize_params(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = a.mean(axis=0)
    scale = a.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def _mse(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((pred - y) ** 2))


def fit(
    net: Network,
    X: np.ndarray,
    y: np.ndarray,
    cfg: NetworkConfig,
) -> tuple[Network, TrainReport]:
    """Обучает сеть; возвращает сеть с весами лучшей эпохи и отчёт.

    Сплит train/validation детерминирован ``cfg.rng_seed``. Если валидационная
    часть получается пустой — ранняя остановка по обучающему лоссу (warning).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"X {X.shape} and y {y.shape} do not match")
    if X.shape[1] != net.n_inputs:
        raise ShapeError(f"feature width {X.shape[1]} != network input width {net.n_inputs}")
    n = X.shape[0]
    if n < MIN_FIT_ROWS:
        raise InsufficientDataError(f"need at least {MIN_FIT_ROWS} rows to fit, got {n}")

    rng = np.random.default_rng([cfg.rng_seed, 1])
    order = rng.permutation(n)
    n_val = int(round(n * cfg.validation_fraction))
    monitor: Literal["validation", "training"] = "validation"
    if n_val < 1 or n - n_val < 1:
        logger.warning("fit: validation split of %d rows is empty; early stopping on training loss", n)
        monitor = "training"
        train_idx, val_idx = order, order[:0]
    else:
        val_idx, train_idx = order[:n_val], order[n_val:]

    net.x_mean, net.x_scale = _standardize_params(X[train_idx])
    y_mean, y_scale = _standardize_params(y[train_idx, None])
    net.y_mean, net.y_scale = float(y_mean[0]), float(y_scale[0])
    net.dropout_rate = cfg.dropout_rate
    net.adam_state = AdamState.zeros_like(net.weights, net.biases)

    Xs = (X - net.x_mean) / net.x_scale
    ys = (y - net.y_mean) / net.y_scale
    X_tr, y_tr = Xs[train_idx], ys[train_idx]
    X_va, y_va = Xs[val_idx], ys[val_idx]
    n_train = X_tr.shape[0]
    batch = min(cfg.batch_size, n_train)

    initial_loss = _mse(forward(net, X_tr)[0], y_tr)
    report = TrainReport(initial_loss=initial_loss, stopped_epoch=0, best_epoch=0, monitor=monitor)

    best = np.inf
    best_net: Network | None = None
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, batch):
            idx = perm[start : start + batch]
            _, cache = forward(net, X_tr[idx], "train", rng)
            grads = backward(net, cache, y_tr[idx])
            total += grads.loss * idx.shape[0]
            if cfg.optimizer == "adam":
                adam_step(net, grads, cfg.adam_params)
            else:
                sgd_step(net, grads, cfg.sgd_lr)
        train_loss = total / n_train
        if not np.isfinite(train_loss) or not net.is_finite():
            raise ImputationError(f"training diverged at epoch {epoch}")
        report.train_loss.append(train_loss)

        if monitor == "validation":
            pv = forward(net, X_va)[0]
            val_loss = _mse(pv, y_va)
            report.val_loss.append(val_loss)
            report.val_mae.append(float(np.mean(np.abs(pv - y_va))) * net.y_scale)
            current = val_loss
        else:
            current = train_loss

        report.stopped_epoch = epoch
        if current < best:
            best = current
            report.best_epoch = epoch
            best_net = net.copy()
        elif epoch - report.best_epoch >= cfg.patience:
            logger.debug("fit: early stop at epoch %d (best %d)", epoch, report.best_epoch)
            break

    if best_net is not None:
        net.weights, net.biases = best_net.weights, best_net.biases
    return net, report


def predict(net: Network, X: np.ndarray) -> np.ndarray:
    """Прогноз в исходных единицах: стандартизация → infer-проход → обратно."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :] if X.size else X.reshape(0, net.n_inputs)
    if X.shape[1] != net.n_inputs:
        raise ShapeError(f"feature width {X.shape[1]} != network input width {net.n_inputs}")
    if X.shape[0] == 0:
        return np.empty(0)
    out, _ = forward(net, (X - net.x_mean) / net.x_scale, "infer")
    return out * net.y_scale + net.y_mean


# ─── Чекпоинты ───────────────────────────────────────────────────────────────


def to_checkpoint(net: Network) -> NetworkCheckpoint:
    return NetworkCheckpoint(
        dropout_rate=net.dropout_rate,
        x_mean=net.x_mean.tolist(),
        x_scale=net.x_scale.tolist(),
        y_mean=net.y_mean,
        y_scale=net.y_scale,
        layers=[
            LayerCheckpoint(
                n_in=int(w.shape[1]),
                n_out=int(w.shape[0]),
                weights=w.ravel(order="C").tolist(),
                biases=b.tolist(),
            )
            for w, b in zip(net.weights, net.biases)
        ],
    )


def from_checkpoint(ckpt: NetworkCheckpoint) -> Network:
    weights = [np.asarray(layer.weights, dtype=np.float64).reshape(layer.n_out, layer.n_in) for layer in ckpt.layers]
    biases = [np.asarray(layer.biases, dtype=np.float64) for layer in ckpt.layers]
    return Network(
        weights=weights,
        biases=biases,
        adam_state=AdamState.zeros_like(weights, biases),
        dropout_rate=ckpt.dropout_rate,
        x_mean=np.asarray(ckpt.x_mean, dtype=np.float64),
        x_scale=np.asarray(ckpt.x_scale, dtype=np.float64),
        y_mean=ckpt.y_mean,
        y_scale=ckpt.y_scale,
    )


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(to_checkpoint(net).model_dump_json(), encoding="utf-8")


def load_network(path: str | Path) -> Network:
    return from_checkpoint(NetworkCheckpoint.model_validate_json(Path(path).read_text(encoding="utf-8")))
