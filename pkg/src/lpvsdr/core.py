"""Affine LPV models, scheduling datasets and data normalization.

Matrices are stacked as ``M = [[A, B], [C, D]]`` with shape
``(nx + ny, nx + nu)``. Vectorization is column-major throughout the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(mat, dtype=float).reshape(-1, order="F")


def unvec(v: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=float).reshape(shape, order="F")


@dataclass(frozen=True)
class AffineLpvModel:
    """``M(rho) = m0 + sum_i coeffs[i] * rho_i`` with a state-space block layout.

    Parameters
    ----------
    m0 : (m, n) array
        Constant part.
    coeffs : sequence of (m, n) arrays
        One coefficient matrix per scheduling coordinate.
    nx, nu, ny : int
        Block sizes, ``m = nx + ny`` and ``n = nx + nu``.
    sched_box : (n_rho, 2) array, optional
        Interval bounds of the scheduling set. Metadata only.
    """

    m0: np.ndarray
    coeffs: tuple
    nx: int
    nu: int
    ny: int
    sched_box: Optional[np.ndarray] = None

    def __post_init__(self):
        m0 = np.array(self.m0, dtype=float)
        if m0.ndim != 2:
            raise ValueError("m0 must be a matrix")
        coeffs = tuple(np.array(c, dtype=float) for c in self.coeffs)
        for i, c in enumerate(coeffs):
            if c.shape != m0.shape:
                raise ValueError(
                    f"coefficient {i} has shape {c.shape}, expected {m0.shape}")
        if m0.shape != (self.nx + self.ny, self.nx + self.nu):
            raise ValueError(
                f"m0 shape {m0.shape} inconsistent with nx={self.nx}, "
                f"nu={self.nu}, ny={self.ny}")
        if min(self.nx, self.nu, self.ny) < 0:
            raise ValueError("block sizes must be nonnegative")
        m0.setflags(write=False)
        for c in coeffs:
            c.setflags(write=False)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "coeffs", coeffs)
        if self.sched_box is not None:
            box = np.array(self.sched_box, dtype=float).reshape(-1, 2)
            if box.shape[0] != len(coeffs):
                raise ValueError("sched_box needs one interval per coefficient")
            box.setflags(write=False)
            object.__setattr__(self, "sched_box", box)

    @property
    def n_rho(self) -> int:
        return len(self.coeffs)

    @property
    def shape(self) -> tuple[int, int]:
        return self.m0.shape

    @property
    def nu_vec(self) -> int:
        """Length of the vectorized matrix, ``m * n``."""
        return self.m0.size

    def coeff_matrix(self) -> np.ndarray:
        """``[vec(M_1) ... vec(M_n_rho)]`` as a ``(m*n, n_rho)`` array."""
        if not self.coeffs:
            return np.zeros((self.nu_vec, 0))
        return np.column_stack([vec(c) for c in self.coeffs])

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "nu": self.nu,
            "ny": self.ny,
            "m0": self.m0.tolist(),
            "coeffs": [c.tolist() for c in self.coeffs],
            "sched_box": None if self.sched_box is None else self.sched_box.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AffineLpvModel":
        m0 = np.array(d["m0"], dtype=float)
        coeffs = [np.array(c, dtype=float).reshape(m0.shape) for c in d.get("coeffs", [])]
        return cls(m0=m0, coeffs=tuple(coeffs), nx=int(d["nx"]), nu=int(d["nu"]),
                   ny=int(d["ny"]), sched_box=d.get("sched_box"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "AffineLpvModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check_rho(model: AffineLpvModel, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if rho.shape[0] != model.n_rho:
        raise ValueError(f"rho has length {rho.shape[0]}, model expects {model.n_rho}")
    return rho


def eval_model(model: AffineLpvModel, rho) -> np.ndarray:
    """Evaluate ``M_0 + sum_i M_i rho_i``."""
    rho = _check_rho(model, rho)
    out = model.m0.copy()
    for c, r in zip(model.coeffs, rho):
        out += c * r
    return out


def vectorize_variation(model: AffineLpvModel, rho) -> np.ndarray:
    """``sum_i vec(M_i) rho_i``; the constant part is excluded."""
    rho = _check_rho(model, rho)
    return model.coeff_matrix() @ rho


def variation_matrix(model: AffineLpvModel, gamma: np.ndarray) -> np.ndarray:
    """Column-wise :func:`vectorize_variation` over a data matrix."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != model.n_rho:
        raise ValueError(f"data matrix must have {model.n_rho} rows")
    return model.coeff_matrix() @ gamma


def split_blocks(M, nx: int, nu: int, ny: int):
    """Return ``(A, B, C, D)`` blocks of a stacked system matrix."""
    M = np.asarray(M, dtype=float)
    if M.shape != (nx + ny, nx + nu):
        raise ValueError(f"matrix shape {M.shape} does not match nx={nx}, nu={nu}, ny={ny}")
    return M[:nx, :nx], M[:nx, nx:], M[nx:, :nx], M[nx:, nx:]


def join_blocks(A, B, C, D) -> np.ndarray:
    return np.block([[np.atleast_2d(A), np.atleast_2d(B)],
                     [np.atleast_2d(C), np.atleast_2d(D)]])


@dataclass(frozen=True)
class Normalizer:
    """Per-row affine map ``rho_n = (rho - offset) / scale``."""

    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        offset = np.array(self.offset, dtype=float).reshape(-1)
        scale = np.array(self.scale, dtype=float).reshape(-1)
        if offset.shape != scale.shape:
            raise ValueError("offset and scale must have equal length")
        if np.any(scale <= 0):
            raise ValueError("scale entries must be positive")
        offset.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return self.offset.shape[0]

    def to_dict(self) -> dict:
        return {"offset": self.offset.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(offset=d["offset"], scale=d["scale"])


def fit_normalizer(gamma) -> Normalizer:
    """Midrange/half-range normalizer mapping each data row onto [-1, 1].

    Constant rows get unit scale and map to zero.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.size == 0:
        raise ValueError("data matrix must be a nonempty 2-D array")
    hi = gamma.max(axis=1)
    lo = gamma.min(axis=1)
    offset = (hi + lo) / 2.0
    scale = (hi - lo) / 2.0
    scale[scale <= 0] = 1.0
    return Normalizer(offset=offset, scale=scale)


def _broadcast(nrm: Normalizer, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if rho.shape[0] != nrm.dim:
        raise ValueError(f"expected {nrm.dim} rows, got {rho.shape[0]}")
    if rho.ndim == 1:
        return nrm.offset, nrm.scale
    return nrm.offset[:, None], nrm.scale[:, None]


def apply_normalizer(nrm: Normalizer, rho) -> np.ndarray:
    """Normalize a vector or a data matrix (samples as columns)."""
    rho = np.asarray(rho, dtype=float)
    offset, scale = _broadcast(nrm, rho)
    return (rho - offset) / scale


def invert_normalizer(nrm: Normalizer, rho_n) -> np.ndarray:
    rho_n = np.asarray(rho_n, dtype=float)
    offset, scale = _broadcast(nrm, rho_n)
    return rho_n * scale + offset


@dataclass(frozen=True)
class TrajectoryDataset:
    """Scheduling data matrix with one sample per column.

    ``source`` optionally keeps the trajectories that generated the samples,
    e.g. ``{"t": ..., "x": ...}``.
    """

    gamma: np.ndarray
    sample_time: float
    source: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        if gamma.ndim != 2 or gamma.shape[1] < 1:
            raise ValueError("gamma must be a matrix with at least one column")
        if not self.sample_time > 0:
            raise ValueError("sample_time must be positive")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_rho(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_samples(self) -> int:
        return self.gamma.shape[1]

    def save(self, csv_path) -> Path:
        """Write the CSV and a ``.json`` sidecar next to it; return the sidecar path."""
        csv_path = Path(csv_path)
        np.savetxt(csv_path, self.gamma, delimiter=",", fmt="%.17g")
        sidecar = csv_path.with_suffix(".json")
        sidecar.write_text(json.dumps(
            {"sample_time": self.sample_time, "n_rho": self.n_rho,
             "n_samples": self.n_samples}, indent=1))
        return sidecar

    @classmethod
    def load(cls, csv_path, sample_time: Optional[float] = None) -> "TrajectoryDataset":
        csv_path = Path(csv_path)
        lines = csv_path.read_text().splitlines()
        skip = 0
        if lines:
            try:
                [float(v) for v in lines[0].split(",")]
            except ValueError:
                skip = 1
        gamma = np.loadtxt(csv_path, delimiter=",", skiprows=skip, ndmin=2)
        if sample_time is None:
            sidecar = csv_path.with_suffix(".json")
            if not sidecar.exists():
                raise FileNotFoundError(f"missing sidecar {sidecar} with sample_time")
            sample_time = float(json.loads(sidecar.read_text())["sample_time"])
        return cls(gamma=gamma, sample_time=sample_time)


def mean_sq_norm(model: AffineLpvModel, gamma) -> float:
    """Mean of ``||M(rho_j)||_F^2`` over the data columns."""
    full = variation_matrix(model, gamma) + vec(model.m0)[:, None]
    return float(np.mean(np.sum(full ** 2, axis=0)))
