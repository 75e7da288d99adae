"""Self-check suites run by ``lpvsdr check``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kpca import KernelSpec, center_kernel, kernel_matrix
from .manipulator import ManipulatorParams, embedding_consistency_check, random_samples
from .nn import (FeedforwardNet, Objective, forward, loss_and_grads, max_relative_error,
                 numerical_gradients)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.value:.3e} (tol {self.tolerance:.0e})"


def embedding_suite(params=None, n_samples: int = 1000, seed: int = 0) -> list[CheckResult]:
    params = params or ManipulatorParams()
    samples = random_samples(np.random.default_rng(seed), n_samples)
    res = embedding_consistency_check(params, samples)
    flipped = embedding_consistency_check(params, samples, gravity_sign=-1.0)
    return [CheckResult("embedding_residual", res < 1e-9, res, 1e-9),
            # the opposite gravity sign must be detected
            CheckResult("gravity_sign_negative_control", flipped > 1e-3, flipped, 1e-3)]


def nudge_off_kinks(net: FeedforwardNet, X: np.ndarray, margin: float = 1e-3,
                    max_iter: int = 50) -> np.ndarray:
    """Shift input columns until every relu preactivation is at least ``margin`` from 0."""
    X = np.array(X, dtype=float)
    rng = np.random.default_rng(0)
    for it in range(max_iter):
        _, pres, _ = forward(net, X)
        bad = np.zeros(X.shape[1], dtype=bool)
        for layer, z in zip(net.layers, pres):
            if layer.activation == "relu":
                bad |= np.any(np.abs(z) < margin, axis=0)
        if not bad.any():
            return X
        # growing random shifts escape regions where many units sit near zero
        step = margin * (1 + it)
        X[:, bad] += step * rng.choice([-1.0, 1.0], size=(X.shape[0], int(bad.sum())))
    raise RuntimeError(f"could not move inputs {margin} away from relu kinks")


def gradient_check(widths, activations, obj: Objective, seed: int = 0, n_batch: int = 20,
                   h: float = 1e-6, target_range=None) -> float:
    """Max over parameter tensors of ``|bp - fd|_inf / max(|bp|_inf, |fd|_inf)``."""
    rng = np.random.default_rng(seed)
    net = FeedforwardNet.build(widths, activations, rng)
    for layer in net.layers:
        layer.bias[:] = rng.uniform(0.0, 0.5, size=layer.bias.shape)
    X = nudge_off_kinks(net, rng.uniform(-1, 1, size=(widths[0], n_batch)))
    if target_range is None:
        Y = rng.standard_normal((widths[-1], n_batch))
    else:
        Y = rng.uniform(*target_range, size=(widths[-1], n_batch))
    _, _, grads = loss_and_grads(net, X, Y, obj)
    fd = numerical_gradients(net, X, Y, obj, h=h)
    return max_relative_error(grads, fd)


def gradient_suite(seed: int = 0) -> list[CheckResult]:
    dnn = gradient_check([10, 5, 1, 36], ["relu", "relu", "linear"],
                         Objective(reduction="sample", weight_decay=1e-6), seed=seed)
    ae = gradient_check([10, 3, 10], ["logsig", "logsig"],
                        Objective(reduction="mean", weight_decay=1e-5, sparsity_weight=0.5,
                                  sparsity_target=0.05, sparsity_layer=0),
                        seed=seed, target_range=(0.1, 0.9))
    return [CheckResult("dnn_10_5_1_36_gradients", dnn < 1e-5, dnn, 1e-5),
            CheckResult("ae_logsig_gradients", ae < 1e-5, ae, 1e-5)]


def centering_suite(seed: int = 0, n: int = 200) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(10, n))
    Kc = center_kernel(kernel_matrix(KernelSpec("sigmoid", 0.1, 0.1), X, X))
    sums = float(max(np.max(np.abs(Kc.sum(axis=0))), np.max(np.abs(Kc.sum(axis=1)))))
    return [CheckResult("centered_kernel_sums", sums < 1e-10, sums, 1e-10)]


SUITES = {"embedding": embedding_suite, "gradients": gradient_suite,
          "centering": centering_suite}


def run_suite(name: str) -> list[CheckResult]:
    if name == "all":
        return [r for fn in SUITES.values() for r in fn()]
    return SUITES[name]()
