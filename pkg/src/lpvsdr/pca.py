"""PCA scheduling-dimension reduction on normalized data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (AffineLpvModel, Normalizer, TrajectoryDataset, apply_normalizer,
                   fit_normalizer, invert_normalizer)


def fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    basis = np.array(basis, dtype=float)
    if basis.size == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


@dataclass(frozen=True)
class PcaReducer:
    """Retained left singular vectors of the normalized data matrix.

    ``singular_values`` keeps the full spectrum for diagnostics.
    """

    basis: np.ndarray
    singular_values: np.ndarray
    normalizer: Normalizer

    @property
    def n_phi(self) -> int:
        return self.basis.shape[1]

    def map(self, rho):
        return pca_map(self, rho)

    def inverse(self, phi):
        return pca_inverse(self, phi)

    def to_dict(self) -> dict:
        return {"method": "pca", "basis": self.basis.tolist(),
                "singular_values": self.singular_values.tolist(),
                "normalizer": self.normalizer.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "PcaReducer":
        n_rho = len(d["normalizer"]["offset"])
        return cls(basis=np.array(d["basis"], dtype=float).reshape(n_rho, -1),
                   singular_values=np.array(d["singular_values"], dtype=float),
                   normalizer=Normalizer.from_dict(d["normalizer"]))


def fit_pca(dataset: TrajectoryDataset, n_phi: int) -> PcaReducer:
    n_rho = dataset.n_rho
    if not 1 <= n_phi <= n_rho:
        raise ValueError(f"n_phi must lie in [1, {n_rho}], got {n_phi}")
    nrm = fit_normalizer(dataset.gamma)
    gamma_n = apply_normalizer(nrm, dataset.gamma)
    # full U is only needed when there are fewer samples than rows
    U, s, _ = np.linalg.svd(gamma_n, full_matrices=gamma_n.shape[1] < n_rho)
    sv = np.zeros(n_rho)
    sv[:s.size] = s
    return PcaReducer(basis=fix_signs(U[:, :n_phi]), singular_values=sv, normalizer=nrm)


def pca_map(reducer: PcaReducer, rho) -> np.ndarray:
    """``phi = U_s^T normalize(rho)``; vectors or column-sample matrices."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape[0] != reducer.basis.shape[0]:
        raise ValueError(f"rho must have {reducer.basis.shape[0]} rows")
    return reducer.basis.T @ apply_normalizer(reducer.normalizer, rho)


def pca_inverse(reducer: PcaReducer, phi) -> np.ndarray:
    """``rho_hat = denormalize(U_s phi)``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != reducer.n_phi:
        raise ValueError(f"phi must have {reducer.n_phi} rows")
    return invert_normalizer(reducer.normalizer, reducer.basis @ phi)


def pca_reduced_model(model: AffineLpvModel, reducer: PcaReducer) -> AffineLpvModel:
    """Closed-form reduced model satisfying ``M_hat(phi) = M(rho_hat(phi))``."""
    if model.n_rho != reducer.basis.shape[0]:
        raise ValueError("reducer and model disagree on n_rho")
    o = reducer.normalizer.offset
    s = reducer.normalizer.scale
    coeffs = np.stack(model.coeffs)
    m0 = model.m0 + np.tensordot(o, coeffs, axes=1)
    weights = (s[:, None] * reducer.basis)
    new = tuple(np.tensordot(weights[:, j], coeffs, axes=1) for j in range(reducer.n_phi))
    return AffineLpvModel(m0=m0, coeffs=new, nx=model.nx, nu=model.nu, ny=model.ny)
