"""Two-layer logsig autoencoder reduction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (Normalizer, TrajectoryDataset, apply_normalizer, fit_normalizer,
                   invert_normalizer)
from .nn import DenseLayer, FeedforwardNet, Objective, TrainConfig, TrainTrace, train

# normalized [-1, 1] data is squeezed into [LOW, HIGH] for the logsig decoder
LOW, HIGH = 0.1, 0.9


def default_ae_config(seed: int = 0) -> TrainConfig:
    return TrainConfig(optimizer="adam", learning_rate=1e-2, epochs=3000,
                       weight_decay=1e-5, sparsity_weight=0.5, sparsity_target=0.05,
                       rng_seed=seed)


def rescale(x_n):
    return LOW + (np.asarray(x_n) + 1.0) * (HIGH - LOW) / 2.0


def unrescale(x_r):
    return (np.asarray(x_r) - LOW) * 2.0 / (HIGH - LOW) - 1.0


@dataclass
class AeReducer:
    encoder: DenseLayer
    decoder: DenseLayer
    normalizer: Normalizer
    trace: Optional[TrainTrace] = field(default=None, compare=False)

    @property
    def n_phi(self) -> int:
        return self.encoder.n_out

    def map(self, rho):
        return ae_map(self, rho)

    def inverse(self, phi):
        return ae_inverse(self, phi)

    def to_dict(self) -> dict:
        return {"method": "ae", "encoder": self.encoder.to_dict(),
                "decoder": self.decoder.to_dict(),
                "rescale_range": [LOW, HIGH],
                "normalizer": self.normalizer.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "AeReducer":
        return cls(encoder=DenseLayer.from_dict(d["encoder"]),
                   decoder=DenseLayer.from_dict(d["decoder"]),
                   normalizer=Normalizer.from_dict(d["normalizer"]))


def fit_ae(dataset: TrajectoryDataset, n_phi: int,
           config: Optional[TrainConfig] = None) -> AeReducer:
    """Train encoder and decoder on reconstruction error of the rescaled data.

    The loss is the entry-wise mean squared error plus weight decay and a KL
    sparsity penalty on the mean encoder activation.
    """
    n_rho = dataset.n_rho
    if not 1 <= n_phi <= n_rho:
        raise ValueError(f"n_phi must lie in [1, {n_rho}], got {n_phi}")
    config = config or default_ae_config()
    nrm = fit_normalizer(dataset.gamma)
    data = rescale(apply_normalizer(nrm, dataset.gamma))
    rng = np.random.default_rng(config.rng_seed)
    net = FeedforwardNet.build([n_rho, n_phi, n_rho], ["logsig", "logsig"], rng)
    obj = Objective(reduction="mean", weight_decay=config.weight_decay,
                    sparsity_weight=config.sparsity_weight,
                    sparsity_target=config.sparsity_target, sparsity_layer=0)
    trace = train(net, data, data, config, obj)
    return AeReducer(encoder=net.layers[0], decoder=net.layers[1], normalizer=nrm,
                     trace=trace)


def _layer(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    return FeedforwardNet([layer])(x)


def ae_map(reducer: AeReducer, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape[0] != reducer.encoder.n_in:
        raise ValueError(f"rho must have {reducer.encoder.n_in} rows")
    return _layer(reducer.encoder, rescale(apply_normalizer(reducer.normalizer, rho)))


def ae_inverse(reducer: AeReducer, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != reducer.n_phi:
        raise ValueError(f"phi must have {reducer.n_phi} rows")
    return invert_normalizer(reducer.normalizer, unrescale(_layer(reducer.decoder, phi)))


def reconstruction_mse(reducer: AeReducer, dataset: TrajectoryDataset) -> float:
    """Mean squared error in the rescaled training units."""
    target = rescale(apply_normalizer(reducer.normalizer, dataset.gamma))
    recon = _layer(reducer.decoder, ae_map(reducer, dataset.gamma))
    return float(np.mean((recon - target) ** 2))
