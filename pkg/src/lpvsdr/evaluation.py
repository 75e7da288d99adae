"""Cost evaluation, method sweeps and open-loop comparisons."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .ae import AeReducer, ae_map, default_ae_config, fit_ae
from .core import AffineLpvModel, TrajectoryDataset, mean_sq_norm, variation_matrix, vec
from .dnn import DEFAULT_ARCH, DnnReducer, default_dnn_config, extract_reduced_model, fit_dnn
from .kpca import KernelSpec, KpcaReducer, fit_kpca
from .nn import TrainConfig
from .pca import PcaReducer, fit_pca, pca_reduced_model
from .refit import fit_affine_matrices
from .simulation import simulate_lpv

logger = logging.getLogger(__name__)

METHODS = ("pca", "kpca", "ae", "dnn")
STOCHASTIC = ("ae", "dnn")

CSV_COLUMNS = ("method", "n_phi", "status", "cost", "median_cost", "n_seeds",
               "relative_cost", "open_loop_rms", "open_loop_peak", "gain_ratio",
               "n_discarded_negative", "warm_started")


def _residuals(model: AffineLpvModel, reduced: AffineLpvModel, gamma, phi) -> np.ndarray:
    full = variation_matrix(model, gamma)
    approx = (reduced.coeff_matrix() @ np.atleast_2d(phi)
              + (vec(reduced.m0) - vec(model.m0))[:, None])
    return full - approx


def frobenius_cost(model: AffineLpvModel, reduced: AffineLpvModel,
                   dataset: TrajectoryDataset, mapping: Callable) -> float:
    """``mean_j ||M(rho_j) - M_hat(mapping(rho_j))||_F^2`` over the data columns."""
    phi = np.atleast_2d(mapping(dataset.gamma))
    if phi.shape[0] != reduced.n_rho:
        raise ValueError(f"mapping gives {phi.shape[0]} coordinates, reduced model has "
                         f"{reduced.n_rho}")
    if reduced.shape != model.shape:
        raise ValueError("reduced and full model differ in matrix shape")
    res = _residuals(model, reduced, dataset.gamma, phi)
    return float(np.mean(np.sum(res ** 2, axis=0)))


@dataclass(frozen=True)
class EpsilonCheck:
    passed: bool
    worst_index: int
    worst_error: float


def epsilon_check(model: AffineLpvModel, reduced: AffineLpvModel, dataset: TrajectoryDataset,
                  mapping: Callable, epsilon: float) -> EpsilonCheck:
    """Pass iff ``max_j ||M(rho_j) - M_hat(phi_j)||_F < epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    res = _residuals(model, reduced, dataset.gamma, mapping(dataset.gamma))
    norms = np.sqrt(np.sum(res ** 2, axis=0))
    j = int(np.argmax(norms))
    return EpsilonCheck(bool(norms[j] < epsilon), j, float(norms[j]))


def signal_gain_ratio(z, w, sample_time: float = 1.0) -> float:
    """Ratio of sampled signal energies, ``sqrt(sum |z_k|^2) / sqrt(sum |w_k|^2)``.

    Signals are ``(channels, samples)``; the sample time cancels out.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if z.shape[1] != w.shape[1]:
        raise ValueError("signals must have the same number of samples")
    den = np.sqrt(np.sum(w ** 2))
    if den == 0:
        raise ZeroDivisionError("reference signal has zero energy")
    return float(np.sqrt(np.sum(z ** 2)) / den)


@dataclass(frozen=True)
class OpenLoopError:
    rms: float
    peak: float
    state_rms: float
    gain_ratio: float


def default_input(n_samples: int, sample_time: float) -> np.ndarray:
    t = np.arange(n_samples) * sample_time
    return np.vstack([np.sin(1.3 * t), 0.5 * np.cos(0.7 * t)])


def open_loop_error(model: AffineLpvModel, reduced: AffineLpvModel, mapping: Callable,
                    dataset: TrajectoryDataset, inputs=None, x0=None,
                    duration: Optional[float] = 5.0) -> OpenLoopError:
    """Compare open-loop simulations of the full and reduced models.

    The full model is scheduled with the dataset columns, the reduced one with
    their images under ``mapping``. ``gain_ratio`` is the energy of the output
    difference relative to the input energy.
    """
    n = dataset.n_samples
    if duration is not None:
        n = min(n, int(round(duration / dataset.sample_time)) + 1)
    schedule = dataset.gamma[:, :n]
    if inputs is None:
        inputs = default_input(n, dataset.sample_time)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))[:, :n]
    x0 = np.zeros(model.nx) if x0 is None else x0
    full = simulate_lpv(model, schedule, inputs, x0, dataset.sample_time)
    red = simulate_lpv(reduced, np.atleast_2d(mapping(schedule)), inputs, x0,
                       dataset.sample_time)
    dy = red.y - full.y
    dx = red.x - full.x
    energy = np.sum(inputs ** 2)
    gain = float(np.sqrt(np.sum(dy ** 2) / energy)) if energy > 0 else 0.0
    return OpenLoopError(rms=float(np.sqrt(np.mean(dy ** 2))), peak=float(np.max(np.abs(dy))),
                         state_rms=float(np.sqrt(np.mean(dx ** 2))), gain_ratio=gain)


# -- fitting any method -----------------------------------------------------------------


@dataclass
class FitResult:
    reducer: object
    reduced: AffineLpvModel
    cost: float
    extras: dict = field(default_factory=dict)


def _train_config(base: TrainConfig, overrides: Optional[dict], seed: int) -> TrainConfig:
    d = base.to_dict()
    d.update(overrides or {})
    d["rng_seed"] = seed
    return TrainConfig.from_dict(d)


def fit_method(method: str, model: AffineLpvModel, dataset: TrajectoryDataset, n_phi: int,
               options: Optional[dict] = None, seed: int = 0,
               kpca_cache: Optional[KpcaReducer] = None) -> FitResult:
    """Fit one reduction method and build its reduced model.

    ``options`` may hold ``kernel`` (kernel spec dict), ``ae`` and ``dnn``
    (training overrides), ``arch``, ``warm_start`` and ``include_intercept``.
    """
    options = options or {}
    intercept = bool(options.get("include_intercept", True))
    extras: dict = {}
    if method == "pca":
        reducer = fit_pca(dataset, n_phi)
        reduced = pca_reduced_model(model, reducer)
    elif method == "kpca":
        if kpca_cache is not None and kpca_cache.n_phi >= n_phi:
            reducer = kpca_cache.truncate(n_phi)
        else:
            reducer = fit_kpca(dataset, KernelSpec.from_dict(options.get("kernel", {
                "kind": "sigmoid", "kappa": 0.1, "iota": 0.1})), n_phi)
        refit = fit_affine_matrices(model, dataset.gamma, reducer.map(dataset.gamma), intercept)
        reduced = refit.model
        extras["n_discarded_negative"] = reducer.n_discarded_negative
        extras["rank_deficient"] = refit.rank_deficient
    elif method == "ae":
        cfg = _train_config(default_ae_config(), options.get("ae"), seed)
        reducer = fit_ae(dataset, n_phi, cfg)
        refit = fit_affine_matrices(model, dataset.gamma, ae_map(reducer, dataset.gamma),
                                    intercept)
        reduced = refit.model
        extras["rank_deficient"] = refit.rank_deficient
        extras["loss_trace"] = reducer.trace.loss
    elif method == "dnn":
        cfg = _train_config(default_dnn_config(), options.get("dnn"), seed)
        reducer = fit_dnn(model, dataset, n_phi, arch=tuple(options.get("arch", DEFAULT_ARCH)),
                          config=cfg, warm_start=bool(options.get("warm_start", False)))
        reduced = extract_reduced_model(reducer, model)
        extras["loss_trace"] = reducer.trace.loss
        extras["warm_started"] = reducer.warm_started
    else:
        raise ValueError(f"unknown method {method!r}")
    cost = frobenius_cost(model, reduced, dataset, reducer.map)
    return FitResult(reducer=reducer, reduced=reduced, cost=cost, extras=extras)


def reducer_from_dict(d: dict):
    kinds = {"pca": PcaReducer, "kpca": KpcaReducer, "ae": AeReducer, "dnn": DnnReducer}
    return kinds[d["method"]].from_dict(d)


# -- sweeps ---------------------------------------------------------------------------


@dataclass
class CellResult:
    method: str
    n_phi: int
    status: str = "ok"
    error: str = ""
    cost: Optional[float] = None
    median_cost: Optional[float] = None
    costs: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    fit_time: float = 0.0
    n_discarded_negative: Optional[int] = None
    warm_started: Optional[bool] = None
    open_loop_rms: Optional[float] = None
    open_loop_peak: Optional[float] = None
    gain_ratio: Optional[float] = None
    loss_trace: list = field(default_factory=list)


@dataclass
class EvaluationReport:
    cells: list
    metadata: dict = field(default_factory=dict)

    def cell(self, method: str, n_phi: int) -> CellResult:
        for c in self.cells:
            if c.method == method and c.n_phi == n_phi:
                return c
        raise KeyError((method, n_phi))

    def costs(self, method: str) -> dict:
        return {c.n_phi: c.cost for c in self.cells if c.method == method}

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "cells": [asdict(c) for c in self.cells]}

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(cells=[CellResult(**c) for c in d["cells"]], metadata=d.get("metadata", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        baseline = self.metadata.get("mean_sq_norm")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for c in self.cells:
            writer.writerow([
                c.method, c.n_phi, c.status, _fmt(c.cost), _fmt(c.median_cost),
                len(c.costs),
                _fmt(None if c.cost is None or not baseline else c.cost / baseline), _fmt(c.open_loop_rms),
                _fmt(c.open_loop_peak), _fmt(c.gain_ratio),
                "" if c.n_discarded_negative is None else c.n_discarded_negative,
                "" if c.warm_started is None else int(c.warm_started)])
        return buf.getvalue()

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path = out_dir / "report.json"
        csv_path = out_dir / "report.csv"
        json_path.write_text(self.to_json())
        csv_path.write_text(self.to_csv())
        return json_path, csv_path


def _fmt(x) -> str:
    return "" if x is None or not np.isfinite(x) else repr(float(x))


def dataset_hash(dataset: TrajectoryDataset) -> str:
    h = hashlib.sha256(np.ascontiguousarray(dataset.gamma).tobytes())
    h.update(repr(dataset.sample_time).encode())
    return h.hexdigest()


def run_cell(method: str, n_phi: int, model: AffineLpvModel, dataset: TrajectoryDataset,
             seeds: Sequence[int], options: Optional[dict] = None,
             kpca_cache: Optional[KpcaReducer] = None,
             open_loop: bool = True) -> CellResult:
    """Fit one (method, n_phi) pair over the seeds; failures are recorded, not raised."""
    cell = CellResult(method=method, n_phi=n_phi)
    run_seeds = list(seeds) if method in STOCHASTIC else list(seeds)[:1]
    best: Optional[FitResult] = None
    start = time.perf_counter()
    try:
        for seed in run_seeds:
            res = fit_method(method, model, dataset, n_phi, options, seed, kpca_cache)
            cell.costs.append(res.cost)
            cell.seeds.append(seed)
            if best is None or res.cost < best.cost:
                best = res
    except Exception as exc:  # recorded per cell
        logger.warning("%s n_phi=%d failed: %s", method, n_phi, exc)
        cell.status = "failed"
        cell.error = f"{type(exc).__name__}: {exc}"
        cell.costs = []
        cell.fit_time = time.perf_counter() - start
        return cell
    cell.fit_time = time.perf_counter() - start
    cell.cost = float(min(cell.costs))
    cell.median_cost = float(np.median(cell.costs))
    cell.n_discarded_negative = best.extras.get("n_discarded_negative")
    cell.warm_started = best.extras.get("warm_started")
    cell.loss_trace = [float(v) for v in best.extras.get("loss_trace", [])]
    if open_loop:
        try:
            err = open_loop_error(model, best.reduced, best.reducer.map, dataset)
            cell.open_loop_rms, cell.open_loop_peak = err.rms, err.peak
            cell.gain_ratio = err.gain_ratio
        except Exception as exc:
            logger.warning("open-loop comparison failed for %s n_phi=%d: %s",
                           method, n_phi, exc)
    return cell


def sweep(model: AffineLpvModel, dataset: TrajectoryDataset, methods: Sequence[str],
          n_phi_list: Sequence[int], seeds: Sequence[int] = (0,),
          options: Optional[dict] = None, jobs: int = 1,
          open_loop: bool = True) -> EvaluationReport:
    """Fit every (method, n_phi) pair and collect costs in a report.

    Kernel PCA is fitted once at the largest feasible size and truncated.
    """
    methods = list(methods)
    n_phi_list = list(n_phi_list)
    if not methods or not n_phi_list:
        raise ValueError("need at least one method and one n_phi")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    options = options or {}
    kpca_cache = None
    if "kpca" in methods:
        spec = KernelSpec.from_dict(options.get("kernel", {"kind": "sigmoid", "kappa": 0.1,
                                                           "iota": 0.1}))
        for k in sorted(n_phi_list, reverse=True):
            try:
                kpca_cache = fit_kpca(dataset, spec, k)
                break
            except Exception:
                continue
    tasks = [(m, k) for m in methods for k in n_phi_list]
    args = [(m, k, model, dataset, list(seeds), options, kpca_cache if m == "kpca" else None,
             open_loop) for m, k in tasks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell_args, args))
    else:
        cells = [_run_cell_args(a) for a in args]
    metadata = {
        "dataset_hash": dataset_hash(dataset),
        "n_samples": dataset.n_samples,
        "n_rho": dataset.n_rho,
        "mean_sq_norm": mean_sq_norm(model, dataset.gamma),
        "target_variance": _target_variance(model, dataset),
        "seeds": list(seeds),
        "methods": methods,
        "n_phi": n_phi_list,
        "options": options,
        "open_loop_note": "open-loop proxy; closed-loop L2 gains are not computed",
    }
    return EvaluationReport(cells=cells, metadata=metadata)


def _run_cell_args(a):
    return run_cell(*a)


def _target_variance(model: AffineLpvModel, dataset: TrajectoryDataset) -> float:
    lam = variation_matrix(model, dataset.gamma)
    return float(np.mean(np.sum((lam - lam.mean(axis=1, keepdims=True)) ** 2, axis=0)))
