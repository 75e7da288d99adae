"""Deep ReLU encoder with a linear matrix-mapping output layer.

The output layer maps the reduced scheduling variable ``phi`` to the
vectorized variation of the reduced model, so its weight columns are
``vec(M_hat_i)`` and its bias shifts ``vec(M_hat_0)`` away from ``vec(M_0)``.
The reduced model is read off the trained layer with no second fit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (AffineLpvModel, Normalizer, TrajectoryDataset, apply_normalizer,
                   fit_normalizer, variation_matrix)
from .nn import (DenseLayer, FeedforwardNet, Objective, TrainConfig, TrainTrace,
                 init_layer, train)
from .pca import fit_pca, pca_reduced_model
from .refit import layer_of, model_from_layer

logger = logging.getLogger(__name__)

DEFAULT_ARCH = (5,)
WARM_START_MARGIN = 1.0


def default_dnn_config(seed: int = 0) -> TrainConfig:
    return TrainConfig(optimizer="adabound", learning_rate=1e-3, final_lr=0.1,
                       epochs=5000, patience=500, min_rel_improvement=1e-10,
                       weight_decay=1e-6, rng_seed=seed)


@dataclass
class DnnReducer:
    encoder: FeedforwardNet
    matrix_layer: DenseLayer
    normalizer: Normalizer
    base_m0: np.ndarray
    trace: Optional[TrainTrace] = field(default=None, compare=False)
    warm_started: bool = False

    @property
    def n_phi(self) -> int:
        return self.encoder.output_dim

    def map(self, rho):
        return dnn_map(self, rho)

    def network(self) -> FeedforwardNet:
        return FeedforwardNet(self.encoder.layers + [self.matrix_layer])

    def to_dict(self) -> dict:
        return {"method": "dnn", "encoder": self.encoder.to_dict(),
                "matrix_layer": self.matrix_layer.to_dict(),
                "normalizer": self.normalizer.to_dict(),
                "base_m0": np.asarray(self.base_m0).tolist(),
                "warm_started": self.warm_started}

    @classmethod
    def from_dict(cls, d: dict) -> "DnnReducer":
        return cls(encoder=FeedforwardNet.from_dict(d["encoder"]),
                   matrix_layer=DenseLayer.from_dict(d["matrix_layer"]),
                   normalizer=Normalizer.from_dict(d["normalizer"]),
                   base_m0=np.array(d["base_m0"], dtype=float),
                   warm_started=bool(d.get("warm_started", False)))


def build_targets(model: AffineLpvModel, dataset: TrajectoryDataset) -> np.ndarray:
    """Output data matrix: column ``j`` is ``sum_i vec(M_i) rho_(j),i`` on raw data."""
    if dataset.n_rho != model.n_rho:
        raise ValueError(f"dataset has {dataset.n_rho} scheduling rows, model {model.n_rho}")
    return variation_matrix(model, dataset.gamma)


def _random_net(rng, n_rho: int, arch: Sequence[int], n_phi: int, nu_vec: int) -> FeedforwardNet:
    widths = [n_rho, *arch, n_phi]
    layers = [init_layer(rng, widths[k], widths[k + 1], "relu") for k in range(len(widths) - 1)]
    layers.append(init_layer(rng, n_phi, nu_vec, "linear"))
    return FeedforwardNet(layers)


def warm_start_net(model: AffineLpvModel, dataset: TrajectoryDataset, n_phi: int,
                   arch: Sequence[int], rng: np.random.Generator) -> Optional[FeedforwardNet]:
    """Network reproducing the PCA reduced model exactly on the training data.

    Each ReLU unit carries ``L x + c`` with ``c`` large enough to keep its
    preactivation positive on the normalized data box; the output bias
    removes the shift again. Returns None when that is not possible.
    """
    if n_phi > model.n_rho or any(w < n_phi for w in arch):
        return None
    pca = fit_pca(dataset, n_phi)
    weights, bias = layer_of(model, pca_reduced_model(model, pca))
    L = pca.basis.T
    shift = np.sum(np.abs(L), axis=1) + WARM_START_MARGIN
    net = _random_net(rng, model.n_rho, arch, n_phi, model.nu_vec)
    layers = net.layers
    hidden = layers[:-1]
    for k, layer in enumerate(hidden):
        # spare units stay live but feed nothing forward
        if k + 1 < len(hidden):
            hidden[k + 1].weights[:, n_phi:] = 0.0
        else:
            layers[-1].weights[:, n_phi:] = 0.0
        layer.weights[:n_phi, :] = 0.0
        layer.bias[:n_phi] = 0.0
        if k == 0:
            layer.weights[:n_phi, :] = L
            layer.bias[:n_phi] = shift
        else:
            layer.weights[:n_phi, :n_phi] = np.eye(n_phi)
    layers[-1].weights[:, :n_phi] = weights
    layers[-1].bias[:] = bias - weights @ shift
    x = apply_normalizer(pca.normalizer, dataset.gamma)
    pre = L @ x + shift[:, None]
    if np.min(pre) <= 0:
        return None
    return net


def fit_dnn(model: AffineLpvModel, dataset: TrajectoryDataset, n_phi: int,
            arch: Sequence[int] = DEFAULT_ARCH, config: Optional[TrainConfig] = None,
            warm_start: bool = False) -> DnnReducer:
    """Train encoder and matrix layer end to end on the mean squared Frobenius error.

    With ``warm_start`` the network starts at the PCA reduced model; if that
    construction is not possible a random initialization is used instead.
    """
    if n_phi < 1:
        raise ValueError("n_phi must be at least 1")
    if not arch:
        raise ValueError("need at least one hidden layer")
    config = config or default_dnn_config()
    nrm = fit_normalizer(dataset.gamma)
    X = apply_normalizer(nrm, dataset.gamma)
    targets = build_targets(model, dataset)
    rng = np.random.default_rng(config.rng_seed)
    net = None
    if warm_start:
        net = warm_start_net(model, dataset, n_phi, arch, rng)
        if net is None:
            logger.warning("warm start infeasible for n_phi=%d, arch=%s; using random init",
                           n_phi, list(arch))
    warm = net is not None
    if net is None:
        net = _random_net(rng, model.n_rho, arch, n_phi, model.nu_vec)
    obj = Objective(reduction="sample", weight_decay=config.weight_decay)
    trace = train(net, X, targets, config, obj)
    return DnnReducer(encoder=FeedforwardNet(net.layers[:-1]), matrix_layer=net.layers[-1],
                      normalizer=nrm, base_m0=model.m0.copy(), trace=trace,
                      warm_started=warm)


def dnn_map(reducer: DnnReducer, rho) -> np.ndarray:
    """``phi = encoder(normalize(rho))``; nonnegative by the final ReLU."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape[0] != reducer.encoder.input_dim:
        raise ValueError(f"rho must have {reducer.encoder.input_dim} rows")
    return reducer.encoder(apply_normalizer(reducer.normalizer, rho))


def extract_reduced_model(reducer: DnnReducer, model: AffineLpvModel) -> AffineLpvModel:
    """Reduced model read directly from the matrix-mapping layer."""
    return model_from_layer(model, reducer.matrix_layer.weights, reducer.matrix_layer.bias)
