"""Least-squares fit of reduced affine matrices for given latent data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AffineLpvModel, unvec, variation_matrix, vec


@dataclass(frozen=True)
class RefitResult:
    model: AffineLpvModel
    cost: float
    rank: int
    rank_deficient: bool


def regressor(phi: np.ndarray, include_intercept: bool) -> np.ndarray:
    """Rows of latent data, plus a row of ones when fitting an intercept."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if include_intercept:
        return np.vstack([phi, np.ones((1, phi.shape[1]))])
    return phi


def model_from_layer(model: AffineLpvModel, weights: np.ndarray, bias=None) -> AffineLpvModel:
    """Reduced model with ``vec(M0_hat) = vec(M0) + bias`` and ``vec(M_hat_j) = weights[:, j]``."""
    weights = np.asarray(weights, dtype=float).reshape(model.nu_vec, -1)
    m0 = model.m0 if bias is None else model.m0 + unvec(bias, model.shape)
    coeffs = tuple(unvec(weights[:, j], model.shape) for j in range(weights.shape[1]))
    return AffineLpvModel(m0=m0, coeffs=coeffs, nx=model.nx, nu=model.nu, ny=model.ny)


def fit_affine_matrices(model: AffineLpvModel, gamma, phi, include_intercept: bool = True
                        ) -> RefitResult:
    """Minimize ``mean_j ||M(rho_j) - M_hat(phi_j)||_F^2`` over the reduced matrices.

    Without an intercept the constant part stays ``M_0``. Rank-deficient
    regressors yield the minimum-norm solution and set ``rank_deficient``.
    """
    gamma = np.asarray(gamma, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[None, :]
    if phi.shape[1] != gamma.shape[1]:
        raise ValueError(f"phi has {phi.shape[1]} columns, data has {gamma.shape[1]}")
    targets = variation_matrix(model, gamma)
    Z = regressor(phi, include_intercept)
    n_phi = phi.shape[0]
    if Z.shape[0] == 0:
        sol = np.zeros((0, model.nu_vec))
        rank = 0
    else:
        # solve Z^T X = Targets^T column-wise; lstsq factorizes once
        sol, _, rank, _ = np.linalg.lstsq(Z.T, targets.T, rcond=None)
    weights = sol[:n_phi].T
    bias = sol[n_phi].copy() if include_intercept else None
    resid = targets - weights @ phi - (0.0 if bias is None else bias[:, None])
    cost = float(np.mean(np.sum(resid ** 2, axis=0)))
    reduced = model_from_layer(model, weights, bias)
    return RefitResult(model=reduced, cost=cost, rank=int(rank),
                       rank_deficient=bool(rank < Z.shape[0]))


def normal_equations_solution(model: AffineLpvModel, gamma, phi, include_intercept: bool = True):
    """Reference solution through ``(Z Z^T)^-1 Z Lambda^T``. Test oracle only."""
    targets = variation_matrix(model, np.asarray(gamma, dtype=float))
    Z = regressor(phi, include_intercept)
    sol = np.linalg.solve(Z @ Z.T, Z @ targets.T)
    return sol.T


def layer_of(model: AffineLpvModel, reduced: AffineLpvModel):
    """``(weights, bias)`` such that :func:`model_from_layer` rebuilds ``reduced``."""
    weights = reduced.coeff_matrix()
    bias = vec(reduced.m0) - vec(model.m0)
    return weights, bias
