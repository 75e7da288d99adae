"""Kernel PCA reduction of scheduling data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Normalizer, TrajectoryDataset, apply_normalizer, fit_normalizer

KERNEL_KINDS = ("sigmoid", "rbf", "polynomial")


class KpcaError(ValueError):
    """Raised when the centered kernel matrix has too few positive eigenvalues."""


@dataclass(frozen=True)
class KernelSpec:
    """``sigmoid``: tanh(kappa x.y + iota); ``rbf``: exp(-|x-y|^2 / kappa^2);
    ``polynomial``: (x.y + iota)^kappa."""

    kind: str = "sigmoid"
    kappa: float = 0.1
    iota: float = 0.1

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and self.kappa == 0:
            raise ValueError("rbf kernel needs kappa != 0")
        if self.kind == "polynomial" and not (float(self.kappa).is_integer() and self.kappa > 0):
            raise ValueError("polynomial kernel needs a positive integer kappa")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "kappa": self.kappa, "iota": self.iota}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(kind=d["kind"], kappa=float(d["kappa"]), iota=float(d.get("iota", 0.0)))


def kernel_matrix(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise kernel values between the columns of ``X`` and ``Y``."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("kernel arguments must have equal dimension")
    if spec.kind == "rbf":
        sq = (np.sum(X ** 2, axis=0)[:, None] + np.sum(Y ** 2, axis=0)[None, :]
              - 2.0 * X.T @ Y)
        return np.exp(-np.maximum(sq, 0.0) / spec.kappa ** 2)
    inner = X.T @ Y
    if spec.kind == "sigmoid":
        return np.tanh(spec.kappa * inner + spec.iota)
    return (inner + spec.iota) ** int(spec.kappa)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ValueError("kernel arguments must have equal length")
    if spec.kind == "rbf":
        return float(np.exp(-np.sum((x - y) ** 2) / spec.kappa ** 2))
    if spec.kind == "sigmoid":
        return float(np.tanh(spec.kappa * (x @ y) + spec.iota))
    return float((x @ y + spec.iota) ** int(spec.kappa))


def center_kernel(K: np.ndarray) -> np.ndarray:
    """``K - 1_N K - K 1_N + 1_N K 1_N`` with ``1_N`` the all-``1/N`` matrix."""
    col_mean = K.mean(axis=0)
    row_mean = K.mean(axis=1)
    return K - col_mean[None, :] - row_mean[:, None] + K.mean()


def positive_tolerance(eigvals: np.ndarray) -> float:
    return 1e-10 * max(1.0, float(np.max(np.abs(eigvals), initial=0.0)))


@dataclass(frozen=True)
class KpcaReducer:
    training_points: np.ndarray  # normalized data, one column per sample
    alphas: np.ndarray           # (N, n_phi), columns scaled by 1/sqrt(lambda)
    eigenvalues: np.ndarray
    kernel_row_mean: np.ndarray
    kernel_grand_mean: float
    kernel: KernelSpec
    normalizer: Normalizer
    n_discarded_negative: int = 0

    @property
    def n_phi(self) -> int:
        return self.alphas.shape[1]

    def map(self, rho):
        return kpca_map(self, rho)

    def truncate(self, n_phi: int) -> "KpcaReducer":
        """Same fit restricted to the leading ``n_phi`` components."""
        if not 1 <= n_phi <= self.n_phi:
            raise ValueError(f"cannot truncate {self.n_phi} components to {n_phi}")
        return KpcaReducer(self.training_points, self.alphas[:, :n_phi],
                           self.eigenvalues[:n_phi], self.kernel_row_mean,
                           self.kernel_grand_mean, self.kernel, self.normalizer,
                           self.n_discarded_negative)

    def to_dict(self) -> dict:
        return {"method": "kpca", "kernel": self.kernel.to_dict(),
                "training_points": self.training_points.tolist(),
                "alphas": self.alphas.tolist(), "eigenvalues": self.eigenvalues.tolist(),
                "kernel_row_mean": self.kernel_row_mean.tolist(),
                "kernel_grand_mean": self.kernel_grand_mean,
                "n_discarded_negative": self.n_discarded_negative,
                "normalizer": self.normalizer.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "KpcaReducer":
        return cls(training_points=np.array(d["training_points"], dtype=float),
                   alphas=np.array(d["alphas"], dtype=float),
                   eigenvalues=np.array(d["eigenvalues"], dtype=float),
                   kernel_row_mean=np.array(d["kernel_row_mean"], dtype=float),
                   kernel_grand_mean=float(d["kernel_grand_mean"]),
                   kernel=KernelSpec.from_dict(d["kernel"]),
                   normalizer=Normalizer.from_dict(d["normalizer"]),
                   n_discarded_negative=int(d.get("n_discarded_negative", 0)))


def fit_kpca(dataset: TrajectoryDataset, spec: KernelSpec, n_phi: int) -> KpcaReducer:
    """Fit kernel PCA on the normalized data and keep ``n_phi`` components.

    Raises
    ------
    KpcaError
        If the centered kernel matrix has fewer than ``n_phi`` positive eigenvalues.
    """
    if n_phi < 1:
        raise ValueError("n_phi must be at least 1")
    nrm = fit_normalizer(dataset.gamma)
    X = apply_normalizer(nrm, dataset.gamma)
    K = kernel_matrix(spec, X, X)
    Kc = center_kernel(K)
    Kc = (Kc + Kc.T) / 2.0
    lam, vecs = np.linalg.eigh(Kc)
    order = np.argsort(lam)[::-1]
    lam, vecs = lam[order], vecs[:, order]
    tol = positive_tolerance(lam)
    positive = lam > tol
    n_pos = int(positive.sum())
    n_neg = int(np.sum(lam < -tol))
    if n_pos < n_phi:
        raise KpcaError(
            f"kernel PCA needs {n_phi} components but positive eigenvalues: {n_pos}")
    lam = lam[:n_phi]
    vecs = vecs[:, :n_phi]
    # deterministic sign, same convention as PCA
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[idx, np.arange(n_phi)])
    return KpcaReducer(training_points=X, alphas=vecs / np.sqrt(lam), eigenvalues=lam,
                       kernel_row_mean=K.mean(axis=0), kernel_grand_mean=float(K.mean()),
                       kernel=spec, normalizer=nrm, n_discarded_negative=n_neg)


def kpca_map(reducer: KpcaReducer, rho) -> np.ndarray:
    """Project new samples; vectors or matrices with samples as columns."""
    rho = np.asarray(rho, dtype=float)
    single = rho.ndim == 1
    R = rho[:, None] if single else rho
    if R.shape[0] != reducer.training_points.shape[0]:
        raise ValueError(f"rho must have {reducer.training_points.shape[0]} rows")
    kt = kernel_matrix(reducer.kernel, reducer.training_points,
                       apply_normalizer(reducer.normalizer, R))
    kt = (kt - reducer.kernel_row_mean[:, None] - kt.mean(axis=0)[None, :]
          + reducer.kernel_grand_mean)
    phi = reducer.alphas.T @ kt
    return phi[:, 0] if single else phi
