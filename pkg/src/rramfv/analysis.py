"""Scalar metrics, line profiles and (K1, K2) parameter sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fv import SolverError
from .mesh import FieldState, Mesh
from .protocol import TraceResult
from .scenario import FORMING_FRACTION, Scenario, seed_for_cell

log = logging.getLogger(__name__)

__all__ = [
    "NoForming",
    "NO_FORMING",
    "detect_forming_voltage",
    "resistance_ratio",
    "uniformity",
    "Profile",
    "profile_extract",
    "CellResult",
    "SweepMap",
    "sweep_k1_k2",
    "run_cell",
]


class NoForming:
    """Result of :func:`detect_forming_voltage` when the compliance level is
    never reached. Falsy and not a number on purpose."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __bool__(self):
        return False

    def __repr__(self):
        return "NO_FORMING"


NO_FORMING = NoForming()


def detect_forming_voltage(trace: TraceResult, I_CC: float, fraction: float = FORMING_FRACTION):
    """Device voltage ``V2`` at the first sample with ``|I| >= fraction*I_CC``.

    Returns :data:`NO_FORMING` if the threshold is never reached. No
    interpolation between samples.
    """
    if not I_CC > 0:
        raise ValueError("I_CC must be positive")
    hit = np.flatnonzero(np.abs(np.asarray(trace.I)) >= fraction * I_CC)
    if hit.size == 0:
        return NO_FORMING
    return float(np.asarray(trace.V2)[hit[0]])


def _positive(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty list")
    if np.any(~(arr > 0)):
        raise ValueError(f"{name} must contain positive values")
    return arr


def resistance_ratio(R_HRS: Sequence[float], R_LRS: Sequence[float]) -> float:
    """``median(R_HRS) / median(R_LRS)``."""
    return float(np.median(_positive(R_HRS, "R_HRS")) / np.median(_positive(R_LRS, "R_LRS")))


def uniformity(values: Sequence[float], sample: bool = False) -> float:
    """Standard deviation over mean. Population convention unless
    ``sample`` is set."""
    arr = _positive(values, "values")
    if arr.size < 2:
        raise ValueError("uniformity needs at least two values")
    return float(np.std(arr, ddof=1 if sample else 0) / np.mean(arr))


@dataclass
class Profile:
    """A field sampled along a line. ``coord`` is measured from the device
    centre (y) or from the reservoir/switch interface (z)."""

    coord: np.ndarray
    values: np.ndarray
    axis: str
    at: float
    field: str


_FIELDS = {"n_D": "n_D", "T": "T", "psi": "psi"}


def _field(state: FieldState, name: str) -> np.ndarray:
    if name in _FIELDS:
        return getattr(state, _FIELDS[name])
    if name in ("E", "E_mag"):
        if "E_mag" not in state.extras:
            raise KeyError("state carries no electric field; run a solve first")
        return state.extras["E_mag"]
    if name in state.extras and np.shape(state.extras[name]) == state.n_D.shape:
        return state.extras[name]
    raise KeyError(f"unknown field {name!r}")


def profile_extract(state, mesh: Mesh, field_name: str, axis: str, at: float = 0.0,
                    span: tuple[float, float] | None = None) -> Profile:
    """Sample ``field_name`` along a line of constant y (``axis='z'``) or
    constant z (``axis='y'``) using the nearest cell.

    ``at`` and ``span`` use centred coordinates: y = 0 on the device axis,
    z = 0 at the reservoir/switch interface, z > 0 toward the top electrode.
    ``state`` may also be a ``(t, FieldState)`` snapshot tuple.
    """
    if isinstance(state, tuple):
        state = state[1]
    data = _field(state, field_name)
    y = mesh.yc - mesh.y_ref
    z = mesh.zc - mesh.z_ref
    ylo, yhi = mesh.y_faces[0] - mesh.y_ref, mesh.y_faces[-1] - mesh.y_ref
    zlo, zhi = mesh.z_faces[0] - mesh.z_ref, mesh.z_faces[-1] - mesh.z_ref
    if axis == "z":
        if not ylo <= at <= yhi:
            raise ValueError("line lies outside the mesh")
        j = int(np.argmin(np.abs(y - at)))
        coord, vals, lo, hi = z, data[:, j], zlo, zhi
    elif axis == "y":
        if not zlo <= at <= zhi:
            raise ValueError("line lies outside the mesh")
        i = int(np.argmin(np.abs(z - at)))
        coord, vals, lo, hi = y, data[i, :], ylo, yhi
    else:
        raise ValueError("axis must be 'y' or 'z'")
    if span is not None:
        a, b = span
        if a < lo - 1e-15 or b > hi + 1e-15 or a > b:
            raise ValueError("requested span lies outside the mesh")
        keep = (coord >= a) & (coord <= b)
        coord, vals = coord[keep], vals[keep]
    return Profile(np.array(coord), np.array(vals), axis, at, field_name)


# sweeps ------------------------------------------------------------------

METRICS = ("V_f", "R_HRS", "R_LRS", "ratio", "cv_HRS", "cv_LRS")


@dataclass
class CellResult:
    K1: float
    K2: float
    V_f: float = math.nan
    R_HRS: float = math.nan
    R_LRS: float = math.nan
    ratio: float = math.nan
    cv_HRS: float = math.nan
    cv_LRS: float = math.nan
    status: str = "ok"
    seed: int = 0
    runtime: float = 0.0


@dataclass
class SweepMap:
    K1: np.ndarray
    K2: np.ndarray
    cells: list  # row-major over (K1, K2)
    root_seed: int = 0

    def __post_init__(self):
        self.K1 = np.asarray(self.K1, dtype=float)
        self.K2 = np.asarray(self.K2, dtype=float)
        if len(self.cells) != self.K1.size * self.K2.size:
            raise ValueError("cell count does not match the axes")

    def cell(self, i: int, j: int) -> CellResult:
        return self.cells[i * self.K2.size + j]

    def grid(self, metric: str) -> np.ndarray:
        """``(len(K1), len(K2))`` array of ``metric``; NaN where a cell failed."""
        vals = [getattr(c, metric) if c.status == "ok" or metric == "V_f" else math.nan for c in self.cells]
        return np.array(vals, dtype=float).reshape(self.K1.size, self.K2.size)

    @property
    def completed(self) -> float:
        return sum(c.status == "ok" for c in self.cells) / len(self.cells)


def run_cell(scn: Scenario, K1: float, K2: float, seed: int, cycles: int) -> CellResult:
    """Forming ramp then ``cycles`` set/reset cycles for one parameter pair."""
    import time

    t0 = time.perf_counter()
    out = CellResult(K1, K2, seed=seed)
    cell = scn.with_materials(K1=K1, K2=K2).replace(seed=seed)
    try:
        iv = cell.forming_sweep()
        vf = detect_forming_voltage(iv.trace, cell.I_CC)
        if vf is NO_FORMING:
            out.status = "no-forming"
            return out
        out.V_f = vf
        res = cell.cycle(iv.trace.final_state, N=cycles, keep_traces=False)
        out.R_HRS = float(np.median(res.R_HRS))
        out.R_LRS = float(np.median(res.R_LRS))
        out.ratio = resistance_ratio(res.R_HRS, res.R_LRS)
        if cycles >= 2:
            out.cv_HRS = uniformity(res.R_HRS)
            out.cv_LRS = uniformity(res.R_LRS)
    except SolverError as exc:
        out.status = f"solver-error: {exc}"
    except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
        out.status = f"error: {type(exc).__name__}: {exc}"
    finally:
        out.runtime = time.perf_counter() - t0
    return out


def _run_cell_args(args):
    return run_cell(*args)


def sweep_k1_k2(K1_values: Sequence[float], K2_values: Sequence[float], base: Scenario,
                jobs: int = 1, cycles: int = 10, root_seed: int | None = None, progress=None) -> SweepMap:
    """Run every (K1, K2) pair independently.

    Cell ``i*len(K2) + j`` gets a seed derived from ``root_seed`` and its
    index only, so results do not depend on ``jobs`` or execution order.
    """
    K1_values = [float(k) for k in K1_values]
    K2_values = [float(k) for k in K2_values]
    if not K1_values or not K2_values:
        raise ValueError("sweep axes must be non-empty")
    if any(k <= 0 for k in K1_values + K2_values):
        raise ValueError("sweep axis values must be positive")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    root = base.seed if root_seed is None else root_seed
    tasks = [(base, k1, k2, seed_for_cell(root, i * len(K2_values) + j), cycles)
             for i, k1 in enumerate(K1_values) for j, k2 in enumerate(K2_values)]
    cells = [None] * len(tasks)
    if jobs == 1:
        for idx, task in enumerate(tasks):
            cells[idx] = run_cell(*task)
            if progress:
                progress(idx, cells[idx])
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for idx, res in enumerate(pool.map(_run_cell_args, tasks)):
                cells[idx] = res
                if progress:
                    progress(idx, res)
    return SweepMap(K1_values, K2_values, cells, root)
