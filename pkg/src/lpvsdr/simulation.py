"""Fixed-step RK4 integration, reference trajectories and scheduling datasets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import AffineLpvModel, TrajectoryDataset, eval_model, split_blocks
from .manipulator import ManipulatorParams, scheduling_map

REFERENCE_KINDS = ("sinusoid-sum", "square-wave", "piecewise-linear")


class SimulationError(RuntimeError):
    """Raised when an integration produces non-finite states."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


def n_steps(duration: float, sample_time: float) -> int:
    ratio = duration / sample_time
    k = int(round(ratio))
    if abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ValueError(
            f"duration {duration} is not an integer multiple of sample_time {sample_time}")
    return k


def integrate_rk4(field_fn: Callable, x0, input_fn: Callable, sample_time: float,
                  duration: float) -> np.ndarray:
    """Classic RK4 with step ``sample_time``.

    ``field_fn(x, u)`` returns the state derivative and ``input_fn(t)`` the input.
    The input is evaluated at the stage times. Returns states at
    ``t = 0, T_s, ..., duration`` as columns, shape ``(nx, K + 1)``.
    """
    if not sample_time > 0:
        raise ValueError("sample_time must be positive")
    k_end = n_steps(duration, sample_time)
    h = sample_time
    x = np.array(x0, dtype=float).reshape(-1)
    out = np.empty((x.shape[0], k_end + 1))
    out[:, 0] = x
    for k in range(k_end):
        t = k * h
        u_a, u_m, u_b = input_fn(t), input_fn(t + h / 2), input_fn(t + h)
        k1 = field_fn(x, u_a)
        k2 = field_fn(x + h / 2 * k1, u_m)
        k3 = field_fn(x + h / 2 * k2, u_m)
        k4 = field_fn(x + h * k3, u_b)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at t = {t + h:g} s", t + h)
        out[:, k + 1] = x
    return out


@dataclass
class ReferenceSpec:
    """Joint-angle reference description for both manipulator channels.

    ``sinusoids[ch]`` lists ``(amplitude, frequency, phase)`` terms for
    ``sinusoid-sum``; ``amplitudes[ch]`` and ``period`` drive ``square-wave``;
    ``knots[ch] = (times, values)`` drive ``piecewise-linear``.
    """

    kind: str = "sinusoid-sum"
    duration: float = 20.0
    sample_time: float = 0.01
    sinusoids: list = field(default_factory=lambda: [[], []])
    amplitudes: list = field(default_factory=lambda: [1.0, 0.0])
    period: float = 8.0
    knots: list = field(default_factory=lambda: [([0.0], [0.0]), ([0.0], [0.0])])

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ValueError(f"unknown reference kind {self.kind!r}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.sample_time > 0:
            raise ValueError("sample_time must be positive")
        n_steps(self.duration, self.sample_time)
        if self.kind == "square-wave" and not self.period > 0:
            raise ValueError("square-wave period must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "duration": self.duration, "sample_time": self.sample_time,
            "sinusoids": [[list(t) for t in ch] for ch in self.sinusoids],
            "amplitudes": list(self.amplitudes), "period": self.period,
            "knots": [[list(ts), list(vs)] for ts, vs in self.knots],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceSpec":
        d = dict(d)
        if "sinusoids" in d:
            d["sinusoids"] = [[tuple(float(v) for v in term) for term in ch]
                              for ch in d["sinusoids"]]
        if "knots" in d:
            d["knots"] = [(list(map(float, ts)), list(map(float, vs)))
                          for ts, vs in d["knots"]]
        return cls(**d)


def reference_1(duration: float = 20.0, sample_time: float = 0.01) -> ReferenceSpec:
    return ReferenceSpec(
        kind="sinusoid-sum", duration=duration, sample_time=sample_time,
        sinusoids=[[(0.8, 0.5, 0.0), (0.2, 1.0, 0.3)],
                   [(0.6, 0.7, 1.0), (0.3, 0.3, 0.0)]])


def reference_2(duration: float = 20.0, sample_time: float = 0.01) -> ReferenceSpec:
    return ReferenceSpec(
        kind="sinusoid-sum", duration=duration, sample_time=sample_time,
        sinusoids=[[(0.7, 0.6, 0.5), (0.25, 0.9, 1.2)],
                   [(0.5, 0.8, 0.2), (0.35, 0.4, 2.0)]])


def reference_3(duration: float = 20.0, sample_time: float = 0.01) -> ReferenceSpec:
    return ReferenceSpec(kind="square-wave", duration=duration, sample_time=sample_time,
                         amplitudes=[1.0, 0.0], period=8.0)


DEFAULT_REFERENCES = {"reference-1": reference_1, "reference-2": reference_2,
                      "reference-3": reference_3}


def generate_reference(spec: ReferenceSpec):
    """Sample a reference; returns ``(t, q_ref, dq_ref)`` with channels as rows."""
    k_end = n_steps(spec.duration, spec.sample_time)
    t = np.arange(k_end + 1) * spec.sample_time
    q = np.zeros((2, t.size))
    dq = np.zeros((2, t.size))
    if spec.kind == "sinusoid-sum":
        for ch, terms in enumerate(spec.sinusoids):
            for amp, freq, phase in terms:
                q[ch] += amp * np.sin(freq * t + phase)
                dq[ch] += amp * freq * np.cos(freq * t + phase)
    elif spec.kind == "square-wave":
        phase = np.mod(t, spec.period) / spec.period
        wave = np.where(phase < 0.5, 1.0, -1.0)
        for ch, amp in enumerate(spec.amplitudes):
            q[ch] = amp * wave
        # velocity is zero, including at the jump instants
    elif spec.kind == "piecewise-linear":
        for ch, (ts, vs) in enumerate(spec.knots):
            ts = np.asarray(ts, dtype=float)
            vs = np.asarray(vs, dtype=float)
            q[ch] = np.interp(t, ts, vs)
            if ts.size > 1:
                slopes = np.diff(vs) / np.diff(ts)
                idx = np.searchsorted(ts, t, side="right") - 1
                inside = (idx >= 0) & (idx < slopes.size)
                dq[ch, inside] = slopes[idx[inside]]
    else:
        raise ValueError(f"unknown reference kind {spec.kind!r}")
    return t, q, dq


def generate_scheduling_data(params: ManipulatorParams, reference) -> TrajectoryDataset:
    """Scheduling dataset ``Gamma[:, k] = eta(q_ref(k T_s), dq_ref(k T_s))``.

    ``reference`` is a :class:`ReferenceSpec` or a ``(t, q, dq)`` tuple.
    """
    if isinstance(reference, ReferenceSpec):
        t, q, dq = generate_reference(reference)
        sample_time = reference.sample_time
    else:
        t, q, dq = reference
        sample_time = float(t[1] - t[0]) if t.size > 1 else 1.0
    x = np.vstack([q, dq])
    gamma = np.column_stack([scheduling_map(params, x[:, k]) for k in range(t.size)])
    return TrajectoryDataset(gamma=gamma, sample_time=sample_time,
                             source={"t": t, "x": x})


def default_dataset(params: Optional[ManipulatorParams] = None) -> TrajectoryDataset:
    """Scheduling data along Reference 1 with the default sampling (N = 2001)."""
    return generate_scheduling_data(params or ManipulatorParams(), reference_1())


@dataclass
class LpvSimulation:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray


def simulate_lpv(model: AffineLpvModel, schedule, inputs, x0, sample_time: float) -> LpvSimulation:
    """Simulate ``dx = A(s) x + B(s) u``, ``y = C(s) x + D(s) u``.

    ``schedule`` is ``(n_sched, K)`` and ``inputs`` ``(nu, K)``, both held
    constant over each sample interval. Returns ``K`` samples starting at t = 0.
    """
    schedule = np.atleast_2d(np.asarray(schedule, dtype=float))
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if schedule.shape[1] != inputs.shape[1]:
        raise ValueError("schedule and input must have the same number of samples")
    if inputs.shape[0] != model.nu:
        raise ValueError(f"input has {inputs.shape[0]} channels, model expects {model.nu}")
    n_k = schedule.shape[1]
    h = sample_time
    x = np.array(x0, dtype=float).reshape(model.nx)
    xs = np.empty((model.nx, n_k))
    ys = np.empty((model.ny, n_k))
    for k in range(n_k):
        A, B, C, D = split_blocks(eval_model(model, schedule[:, k]),
                                  model.nx, model.nu, model.ny)
        u = inputs[:, k]
        xs[:, k] = x
        ys[:, k] = C @ x + D @ u
        if k == n_k - 1:
            break
        bu = B @ u
        k1 = A @ x + bu
        k2 = A @ (x + h / 2 * k1) + bu
        k3 = A @ (x + h / 2 * k2) + bu
        k4 = A @ (x + h * k3) + bu
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at t = {(k + 1) * h:g} s", (k + 1) * h)
    return LpvSimulation(t=np.arange(n_k) * h, x=xs, y=ys)


def save_trajectory_csv(path, t, channels: np.ndarray, names=None) -> None:
    """Write a time column followed by one column per channel row."""
    channels = np.atleast_2d(channels)
    names = names or [f"ch{i}" for i in range(channels.shape[0])]
    header = ",".join(["t", *names])
    np.savetxt(path, np.column_stack([t, channels.T]), delimiter=",", fmt="%.17g",
               header=header, comments="")


def load_reference_spec(path) -> ReferenceSpec:
    return ReferenceSpec.from_dict(json.loads(Path(path).read_text()))
