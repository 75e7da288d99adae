"""Two-link planar robot manipulator and its exact affine LPV embedding.

State ``x = (q1, q2, dq1, dq2)``, input ``tau = (tau1, tau2)``, output ``y = (q1, q2)``.
The equation of motion is ``M(q) ddq + C(q, dq) + g(q) = n tau``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import AffineLpvModel


@dataclass(frozen=True)
class ManipulatorParams:
    """Aggregated physical constants; defaults are the benchmark values."""

    a: float = 5.6794
    b: float = 1.473
    c: float = 1.7985
    d: float = 0.4
    e: float = 0.4
    f: float = 2.0
    n: float = 1.0

    def __post_init__(self):
        if not self.a * self.c - self.b ** 2 > 0:
            raise ValueError("a*c - b^2 must be positive for an invertible mass matrix")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ManipulatorParams":
        return cls(**{k: float(v) for k, v in d.items()})

    @classmethod
    def load(cls, path) -> "ManipulatorParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ManipulatorState:
    q1: float
    q2: float
    dq1: float
    dq2: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("state entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.dq1, self.dq2], dtype=float)


def _state(x) -> np.ndarray:
    if isinstance(x, ManipulatorState):
        return x.as_array()
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (4,):
        raise ValueError("manipulator state has 4 entries")
    return x


def sinc(z):
    """Unnormalized sinc, ``sin(z)/z`` with ``sinc(0) = 1``."""
    return np.sinc(np.asarray(z, dtype=float) / np.pi)


def mass_determinant(params: ManipulatorParams, x) -> float:
    q1, q2 = _state(x)[:2]
    return params.a * params.c - params.b ** 2 * np.cos(q1 - q2) ** 2


def dynamics(params: ManipulatorParams, x, tau, gravity_sign: float = 1.0) -> np.ndarray:
    """State derivative ``(dq1, dq2, ddq1, ddq2)``.

    ``gravity_sign`` flips the sign of ``g(q)`` in ``ddq = M^-1 (n tau - C - g)``;
    anything but the default breaks consistency with the LPV embedding.
    """
    p = params
    q1, q2, dq1, dq2 = _state(x)
    tau = np.asarray(tau, dtype=float).reshape(2)
    cd, sd = np.cos(q1 - q2), np.sin(q1 - q2)
    mass = np.array([[p.a, p.b * cd], [p.b * cd, p.c]])
    coriolis = np.array([p.b * sd * dq2 ** 2 + p.f * dq1,
                         -p.b * sd * dq1 ** 2 + p.f * (dq2 - dq1)])
    grav = np.array([-p.d * np.sin(q1), -p.e * np.sin(q2)])
    ddq = np.linalg.solve(mass, p.n * tau - coriolis - gravity_sign * grav)
    return np.array([dq1, dq2, ddq[0], ddq[1]])


def scheduling_map(params: ManipulatorParams, x) -> np.ndarray:
    """The 10 scheduling signals ``rho = eta(x)``."""
    p = params
    q1, q2, dq1, dq2 = _state(x)
    cd, sd = np.cos(q1 - q2), np.sin(q1 - q2)
    h = p.a * p.c - p.b ** 2 * cd ** 2
    s1, s2 = sinc(q1), sinc(q2)
    return np.array([
        1.0,
        cd,
        s1,
        cd * s2,
        -p.b ** 2 * sd * cd * dq1 - (p.c + p.b * cd) * p.f,
        -p.c * sd * dq2 + cd * p.f,
        cd * s1,
        s2,
        p.a * p.b * sd * dq1 + p.f * (p.a + p.b * cd),
        p.b ** 2 * sd * cd * dq2 - p.a * p.f,
    ]) / h


def scheduling_map_batch(params: ManipulatorParams, X: np.ndarray) -> np.ndarray:
    """Apply :func:`scheduling_map` to states stored as columns of ``X``."""
    X = np.asarray(X, dtype=float)
    return np.column_stack([scheduling_map(params, X[:, k]) for k in range(X.shape[1])])


def build_lpv_model(params: ManipulatorParams) -> AffineLpvModel:
    """Affine LPV model with ``n_rho = 10``, ``nx = 4``, ``nu = 2``, ``ny = 2``."""
    p = params
    nx, nu, ny = 4, 2, 2
    m0 = np.zeros((nx + ny, nx + nu))
    m0[0, 2] = 1.0
    m0[1, 3] = 1.0
    m0[4, 0] = 1.0
    m0[5, 1] = 1.0
    # (row, col, value) triples of A and B (B columns offset by nx) per rho_i
    entries = {
        1: [(2, 4, p.c * p.n), (3, 5, p.a * p.n)],
        2: [(2, 5, -p.b * p.n), (3, 4, -p.b * p.n)],
        3: [(2, 0, p.c * p.d)],
        4: [(2, 1, -p.b * p.e)],
        5: [(2, 2, 1.0)],
        6: [(2, 3, p.b)],
        7: [(3, 0, -p.b * p.d)],
        8: [(3, 1, p.a * p.e)],
        9: [(3, 2, 1.0)],
        10: [(3, 3, 1.0)],
    }
    coeffs = []
    for i in range(1, 11):
        mi = np.zeros_like(m0)
        for r, c, v in entries[i]:
            mi[r, c] = v
        coeffs.append(mi)
    return AffineLpvModel(m0=m0, coeffs=tuple(coeffs), nx=nx, nu=nu, ny=ny)


def random_samples(rng: np.random.Generator, count: int,
                   q_max: float = np.pi, dq_max: float = 3.0, tau_max: float = 10.0):
    """Uniform ``(x, tau)`` pairs from the default operating box."""
    x = rng.uniform(-1, 1, size=(count, 4)) * np.array([q_max, q_max, dq_max, dq_max])
    tau = rng.uniform(-tau_max, tau_max, size=(count, 2))
    return list(zip(x, tau))


def embedding_consistency_check(params: ManipulatorParams, samples,
                                gravity_sign: float = 1.0) -> float:
    """Max over samples of ``|f(x, tau) - (A(eta(x)) x + B(eta(x)) tau)|_inf``."""
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    model = build_lpv_model(params)
    m0 = model.m0
    coeffs = np.stack(model.coeffs)
    worst = 0.0
    for x, tau in samples:
        x = _state(x)
        rho = scheduling_map(params, x)
        M = m0 + np.tensordot(rho, coeffs, axes=1)
        lpv = M[:4] @ np.concatenate([x, tau])
        res = np.max(np.abs(dynamics(params, x, tau, gravity_sign) - lpv))
        worst = max(worst, float(res))
    return worst
