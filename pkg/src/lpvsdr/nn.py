"""Small dense feed-forward networks with hand-written backpropagation.

Samples are stored as columns, matching the scheduling data layout.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "logsig", "tanh", "linear")
OPTIMIZERS = ("sgd", "adam", "adabound")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss. ``trace`` holds the losses so far."""

    def __init__(self, message: str, trace: "TrainTrace"):
        super().__init__(message)
        self.trace = trace


def logsig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "logsig":
        return logsig(z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "linear":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation; relu uses 0 at the kink."""
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "logsig":
        return a * (1.0 - a)
    if kind == "tanh":
        return 1.0 - a ** 2
    if kind == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float, ndmin=2)
        self.bias = np.array(self.bias, dtype=float).reshape(-1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ValueError("bias length must equal the number of output units")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {"shape": list(self.weights.shape), "activation": self.activation,
                "weights": self.weights.reshape(-1).tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DenseLayer":
        return cls(weights=np.array(d["weights"], dtype=float).reshape(d["shape"]),
                   bias=d["bias"], activation=d["activation"])


def init_layer(rng: np.random.Generator, n_in: int, n_out: int, activation: str) -> DenseLayer:
    """Glorot-uniform weights (4x wider for logsig), zero bias."""
    limit = np.sqrt(6.0 / (n_in + n_out))
    if activation == "logsig":
        limit *= 4.0
    return DenseLayer(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out),
                      activation)


class FeedforwardNet:
    """Stack of :class:`DenseLayer` objects."""

    def __init__(self, layers: Sequence[DenseLayer]):
        self.layers = list(layers)
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for k in range(1, len(self.layers)):
            if self.layers[k].n_in != self.layers[k - 1].n_out:
                raise ValueError(f"layer {k} expects {self.layers[k].n_in} inputs, "
                                 f"previous layer gives {self.layers[k - 1].n_out}")

    @classmethod
    def build(cls, widths: Sequence[int], activations: Sequence[str],
              rng: np.random.Generator) -> "FeedforwardNet":
        if len(activations) != len(widths) - 1:
            raise ValueError("need one activation per layer")
        return cls([init_layer(rng, widths[k], widths[k + 1], activations[k])
                    for k in range(len(activations))])

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        for k, layer in enumerate(self.layers):
            layer.weights = np.array(params[2 * k], dtype=float)
            layer.bias = np.array(params[2 * k + 1], dtype=float)

    def copy(self) -> "FeedforwardNet":
        return FeedforwardNet([DenseLayer(l.weights.copy(), l.bias.copy(), l.activation)
                               for l in self.layers])

    def __call__(self, X) -> np.ndarray:
        return forward(self, X)[0][-1]

    def to_dict(self) -> dict:
        return {"layers": [layer.to_dict() for layer in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedforwardNet":
        return cls([DenseLayer.from_dict(l) for l in d["layers"]])


def _as_batch(net: FeedforwardNet, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[:, None]
    if X.shape[0] != net.input_dim:
        raise ValueError(f"input has {X.shape[0]} rows, network expects {net.input_dim}")
    return X, single


def forward(net: FeedforwardNet, X, dropout: float = 0.0,
            rng: Optional[np.random.Generator] = None):
    """Layer-by-layer evaluation.

    Returns ``(activations, preactivations, masks)`` where ``activations[0]`` is
    the input and ``activations[-1]`` the network output. With ``dropout > 0``
    hidden outputs are masked (inverted dropout); the last layer never is.
    """
    X, single = _as_batch(net, X)
    acts = [X]
    pres = []
    masks = []
    for k, layer in enumerate(net.layers):
        z = layer.weights @ acts[-1] + layer.bias[:, None]
        a = activate(layer.activation, z)
        mask = None
        if dropout > 0 and k < len(net.layers) - 1:
            keep = 1.0 - dropout
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        pres.append(z)
        acts.append(a)
        masks.append(mask)
    if single:
        acts = [a[:, 0] for a in acts]
        pres = [z[:, 0] for z in pres]
    return acts, pres, masks


def backward(net: FeedforwardNet, acts, pres, grad_out, masks=None, extra=None):
    """Reverse-mode gradients for a batch.

    ``grad_out`` is dLoss/d(output) with samples as columns; ``extra`` maps a
    layer index to an additional gradient on that layer's output. Returns a
    flat list ``[dW1, db1, dW2, db2, ...]``.
    """
    extra = extra or {}
    masks = masks or [None] * len(net.layers)
    acts = [a if a.ndim == 2 else a[:, None] for a in acts]
    pres = [z if z.ndim == 2 else z[:, None] for z in pres]
    g = np.asarray(grad_out, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    grads: list = [None] * (2 * len(net.layers))
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if k in extra:
            g = g + extra[k]
        if masks[k] is not None:
            g = g * masks[k]
        a = acts[k + 1]
        if masks[k] is not None:
            a = activate(layer.activation, pres[k])
        dz = g * activation_grad(layer.activation, pres[k], a)
        grads[2 * k] = dz @ acts[k].T
        grads[2 * k + 1] = dz.sum(axis=1)
        g = layer.weights.T @ dz
    return grads


def kl_sparsity(mean_act: np.ndarray, target: float) -> float:
    """Sum over units of ``KL(target || mean_act)`` for Bernoulli means."""
    p = np.clip(mean_act, 1e-12, 1 - 1e-12)
    return float(np.sum(target * np.log(target / p)
                        + (1 - target) * np.log((1 - target) / (1 - p))))


def kl_sparsity_grad(mean_act: np.ndarray, target: float) -> np.ndarray:
    p = np.clip(mean_act, 1e-12, 1 - 1e-12)
    return -target / p + (1 - target) / (1 - p)


@dataclass
class TrainConfig:
    optimizer: str = "adabound"
    learning_rate: float = 1e-3
    final_lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 5000
    batch_size: int = 0
    weight_decay: float = 0.0
    sparsity_weight: float = 0.0
    sparsity_target: float = 0.05
    dropout: float = 0.0
    patience: int = 0
    min_rel_improvement: float = 1e-10
    monotone: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not (self.learning_rate > 0 and self.final_lr > 0):
            raise ValueError("learning rates must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if not 0 < self.sparsity_target < 1:
            raise ValueError("sparsity_target must lie in (0, 1)")
        if self.monotone and self.batch_size:
            raise ValueError("monotone descent requires full-batch training")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class Objective:
    """Loss definition: squared error + weight decay + optional KL sparsity.

    ``reduction="mean"`` averages over every output entry; ``"sample"`` sums
    over output coordinates and averages over samples.
    """

    reduction: str = "mean"
    weight_decay: float = 0.0
    sparsity_weight: float = 0.0
    sparsity_target: float = 0.05
    sparsity_layer: Optional[int] = None

    def __post_init__(self):
        if self.reduction not in ("mean", "sample"):
            raise ValueError(f"unknown reduction {self.reduction!r}")


def loss_and_grads(net: FeedforwardNet, X: np.ndarray, Y: np.ndarray, obj: Objective,
                   dropout: float = 0.0, rng=None, need_grads: bool = True):
    """Returns ``(total_loss, data_loss, grads)``; ``grads`` is None when not needed."""
    acts, pres, masks = forward(net, X, dropout, rng)
    out = acts[-1]
    diff = out - Y
    n = X.shape[1]
    denom = n if obj.reduction == "sample" else diff.size
    data = float(np.sum(diff ** 2) / denom)
    total = data
    if obj.weight_decay:
        total += obj.weight_decay * sum(float(np.sum(l.weights ** 2)) for l in net.layers)
    extra = {}
    if obj.sparsity_weight and obj.sparsity_layer is not None:
        h = acts[obj.sparsity_layer + 1]
        mean_act = h.mean(axis=1)
        total += obj.sparsity_weight * kl_sparsity(mean_act, obj.sparsity_target)
        if need_grads:
            g = obj.sparsity_weight * kl_sparsity_grad(mean_act, obj.sparsity_target) / n
            extra[obj.sparsity_layer] = np.repeat(g[:, None], n, axis=1)
    if not need_grads:
        return total, data, None
    grads = backward(net, acts, pres, 2.0 * diff / denom, masks, extra)
    if obj.weight_decay:
        for k, layer in enumerate(net.layers):
            grads[2 * k] = grads[2 * k] + 2.0 * obj.weight_decay * layer.weights
    return total, data, grads


@dataclass
class OptimizerState:
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.t, [a.copy() for a in self.m], [a.copy() for a in self.v])


def adabound_bounds(t: int, final_lr: float, beta2: float) -> tuple[float, float]:
    lower = final_lr * (1.0 - 1.0 / ((1.0 - beta2) * t + 1.0))
    upper = final_lr * (1.0 + 1.0 / ((1.0 - beta2) * t))
    return lower, upper


def _moments(grads, state: OptimizerState, config: TrainConfig):
    if not state.m:
        state.m = [np.zeros_like(g) for g in grads]
        state.v = [np.zeros_like(g) for g in grads]
    b1, b2 = config.beta1, config.beta2
    for i, g in enumerate(grads):
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g


def adabound_step(params, grads, state: OptimizerState, t: int, config: TrainConfig,
                  scale: float = 1.0):
    """One AdaBound update; returns new parameter arrays and advances ``state``."""
    if t < 1:
        raise ValueError("step counter starts at 1")
    _moments(grads, state, config)
    state.t = t
    c1 = 1 - config.beta1 ** t
    c2 = 1 - config.beta2 ** t
    lower, upper = adabound_bounds(t, config.final_lr, config.beta2)
    out = []
    for p, m, v in zip(params, state.m, state.v):
        step = np.clip(config.learning_rate / (np.sqrt(v / c2) + config.eps), lower, upper)
        out.append(p - scale * step * (m / c1))
    return out


def adam_step(params, grads, state: OptimizerState, t: int, config: TrainConfig,
              scale: float = 1.0):
    _moments(grads, state, config)
    state.t = t
    c1 = 1 - config.beta1 ** t
    c2 = 1 - config.beta2 ** t
    return [p - scale * config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
            for p, m, v in zip(params, state.m, state.v)]


def sgd_step(params, grads, state: OptimizerState, t: int, config: TrainConfig,
             scale: float = 1.0):
    state.t = t
    return [p - scale * config.learning_rate * g for p, g in zip(params, grads)]


STEP_FUNCTIONS = {"sgd": sgd_step, "adam": adam_step, "adabound": adabound_step}


@dataclass
class TrainTrace:
    """Per-epoch objective values; the last entries belong to the returned parameters."""

    loss: list = field(default_factory=list)
    data_loss: list = field(default_factory=list)
    rejected_steps: int = 0
    stopped_early: bool = False

    @property
    def final_loss(self) -> float:
        return self.loss[-1]

    @property
    def final_data_loss(self) -> float:
        return self.data_loss[-1]

    def to_dict(self) -> dict:
        return asdict(self)


def train(net: FeedforwardNet, inputs, targets, config: TrainConfig,
          objective: Optional[Objective] = None) -> TrainTrace:
    """Fit ``net`` in place and return the loss trace.

    ``trace.loss[0]`` is the objective at the initial parameters. In
    ``monotone`` mode a step that raises the data loss is undone and retried
    with half the step length.

    Raises
    ------
    DivergenceError
        On a non-finite loss.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("inputs and targets need the same number of columns")
    if Y.shape[0] != net.output_dim:
        raise ValueError(f"targets have {Y.shape[0]} rows, network outputs {net.output_dim}")
    obj = objective or Objective(weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.rng_seed)
    step_fn = STEP_FUNCTIONS[config.optimizer]
    state = OptimizerState()
    trace = TrainTrace()
    n = X.shape[1]
    batch = config.batch_size if 0 < config.batch_size < n else n

    # full-batch steps without dropout reuse the gradients of the loss evaluation
    fused = batch == n and not config.dropout

    def evaluate():
        return loss_and_grads(net, X, Y, obj, need_grads=fused)

    total, data, grads = evaluate()
    trace.loss.append(total)
    trace.data_loss.append(data)
    if not np.isfinite(total):
        raise DivergenceError("non-finite initial loss", trace)

    best = total
    since_best = 0
    scale = 1.0
    t = 0
    for epoch in range(config.epochs):
        if config.monotone:
            params = [p.copy() for p in net.params()]
            if grads is None:
                _, _, grads = loss_and_grads(net, X, Y, obj, config.dropout, rng)
            for _ in range(60):
                saved = state.copy()
                net.set_params(step_fn(params, grads, state, t + 1, config, scale))
                new_total, new_data, new_grads = evaluate()
                if np.isfinite(new_total) and new_data <= data:
                    t += 1
                    scale = min(1.0, scale * 2.0)
                    break
                trace.rejected_steps += 1
                state = saved
                scale *= 0.5
            else:
                # no descent step found down to 2^-60 of the nominal length
                net.set_params(params)
                state = saved
                trace.stopped_early = True
                break
            total, data, grads = new_total, new_data, new_grads
        elif fused:
            t += 1
            net.set_params(step_fn(net.params(), grads, state, t, config))
            total, data, grads = evaluate()
        else:
            order = rng.permutation(n) if batch < n else None
            for start in range(0, n, batch):
                if order is None:
                    xb, yb = X, Y
                else:
                    sel = order[start:start + batch]
                    xb, yb = X[:, sel], Y[:, sel]
                _, _, g = loss_and_grads(net, xb, yb, obj, config.dropout, rng)
                t += 1
                net.set_params(step_fn(net.params(), g, state, t, config))
            total, data, _ = evaluate()
        trace.loss.append(total)
        trace.data_loss.append(data)
        if not np.isfinite(total):
            raise DivergenceError(f"non-finite loss at epoch {epoch + 1}", trace)
        if config.patience:
            if total < best * (1.0 - config.min_rel_improvement):
                best = total
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    trace.stopped_early = True
                    break
    logger.debug("trained %d epochs, final loss %.6g", len(trace.loss) - 1, trace.loss[-1])
    return trace


def numerical_gradients(net: FeedforwardNet, X, Y, obj: Objective, h: float = 1e-6):
    """Central finite differences of the total loss, same layout as :func:`backward`."""
    params = [p.copy() for p in net.params()]
    out = []
    for i, p in enumerate(params):
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            trial = [q.copy() for q in params]
            trial[i][idx] = p[idx] + h
            net.set_params(trial)
            fp = loss_and_grads(net, X, Y, obj, need_grads=False)[0]
            trial[i][idx] = p[idx] - h
            net.set_params(trial)
            fm = loss_and_grads(net, X, Y, obj, need_grads=False)[0]
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    net.set_params(params)
    return out


def max_relative_error(a_list, b_list) -> float:
    """Worst tensor-wise error ``|a - b|_inf / max(|a|_inf, |b|_inf)``.

    Scaling by the tensor magnitude keeps finite-difference round-off on
    near-zero entries from dominating.
    """
    worst = 0.0
    for a, b in zip(a_list, b_list):
        scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
        if scale > 0:
            worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    return worst
