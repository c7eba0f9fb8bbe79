"""Voltage programs, compliance handling and switching experiments."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .compliance import ComplianceConfig, cml_conductance
from .fv import SolverError
from .materials import MaterialDB
from .mesh import FieldState, Mesh, Region, total_vacancies
from .solver import BoundaryConditions, SolverConfig, coupled_step

log = logging.getLogger(__name__)

__all__ = [
    "Segment",
    "Waveform",
    "StepControl",
    "TraceResult",
    "IVCurve",
    "ReadOut",
    "CycleNoiseConfig",
    "CycleResult",
    "cml_conductance",
    "ComplianceConfig",
    "run_transient",
    "dc_sweep",
    "read_device",
    "read_resistance",
    "run_cycles",
    "forming_pulse",
    "reset_pulse",
    "forming_ramp",
    "I_FLOOR",
]

I_FLOOR = 1e-15


@dataclass(frozen=True)
class Segment:
    """Voltage held (``kind='pulse'``) or swept linearly (``'ramp'``) over
    ``duration``. ``dt`` is the largest time step taken inside the segment;
    ``limit`` switches the compliance layer on."""

    kind: str
    v_start: float
    v_end: float
    duration: float
    dt: float
    limit: bool = True

    def __post_init__(self):
        if self.kind not in ("pulse", "ramp"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if not self.duration > 0 or not self.dt > 0:
            raise ValueError("segment duration and dt must be positive")
        if self.kind == "pulse" and self.v_start != self.v_end:
            raise ValueError("a pulse holds one voltage")

    @classmethod
    def pulse(cls, amplitude, duration, dt=None, limit=True):
        return cls("pulse", amplitude, amplitude, duration, dt or duration / 50, limit)

    @classmethod
    def ramp(cls, v_start, v_end, duration, dt=None, limit=True):
        return cls("ramp", v_start, v_end, duration, dt or duration / 200, limit)

    def voltage(self, tau):
        """Voltage ``tau`` seconds into the segment."""
        if self.kind == "pulse":
            return self.v_start
        frac = min(max(tau / self.duration, 0.0), 1.0)
        return self.v_start + (self.v_end - self.v_start) * frac


@dataclass(frozen=True)
class Waveform:
    segments: tuple

    def __init__(self, segments: Sequence[Segment]):
        if not segments:
            raise ValueError("a waveform needs at least one segment")
        object.__setattr__(self, "segments", tuple(segments))

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def __add__(self, other: "Waveform") -> "Waveform":
        return Waveform(self.segments + other.segments)

    def voltage(self, t: float) -> float:
        t0 = 0.0
        for seg in self.segments:
            if t <= t0 + seg.duration:
                return seg.voltage(t - t0)
            t0 += seg.duration
        return self.segments[-1].voltage(self.segments[-1].duration)

    def staircase(self, step: float, dwell: float, dt: float | None = None) -> "Waveform":
        """Quasi-static version: every ramp becomes a sequence of holds
        ``step`` volts apart, each lasting ``dwell``."""
        out = []
        for seg in self.segments:
            if seg.kind == "pulse":
                out.append(seg)
                continue
            span = seg.v_end - seg.v_start
            n = max(1, int(np.ceil(abs(span) / step - 1e-9)))
            for k in range(1, n + 1):
                v = seg.v_start + span * k / n
                out.append(Segment.pulse(v, dwell, dt or dwell / 4, seg.limit))
        return Waveform(out)


def forming_pulse(amplitude=-2.1, duration=10e-3, dt=None) -> Waveform:
    return Waveform([Segment.pulse(amplitude, duration, dt or duration / 100, limit=True)])


def reset_pulse(amplitude=1.0, duration=10e-3, dt=None) -> Waveform:
    return Waveform([Segment.pulse(amplitude, duration, dt or duration / 100, limit=False)])


def forming_ramp(v_stop=-2.1, rate=-100.0, v_start=0.0) -> Waveform:
    """Linear ramp from ``v_start`` to ``v_stop`` at ``rate`` V/s."""
    duration = (v_stop - v_start) / rate
    return Waveform([Segment.ramp(v_start, v_stop, duration, limit=True)])


@dataclass(frozen=True)
class StepControl:
    """Adaptive time-step limits.

    A step is rejected and retried at half the size when the vacancy density
    changes by more than ``max_dn`` (fraction of ``n_max``) anywhere, the peak
    temperature by more than ``max_dT`` kelvin, or the Gummel loop fails.
    """

    dt_min: float = 1e-13
    max_dn: float = 0.05
    max_dT: float = 25.0
    grow: float = 1.5
    max_retries: int = 40


@dataclass
class TraceResult:
    t: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    I: np.ndarray
    T_peak: np.ndarray
    N_total: np.ndarray
    snapshots: list = field(default_factory=list)  # (t, FieldState)
    final_state: FieldState | None = None
    segment_index: np.ndarray | None = None

    COLUMNS = ("t", "V1", "V2", "I", "T_peak", "N_total")

    def __len__(self):
        return len(self.t)

    def rows(self):
        return np.column_stack([getattr(self, c) for c in self.COLUMNS])

    @classmethod
    def concatenate(cls, traces: Sequence["TraceResult"]) -> "TraceResult":
        traces = [tr for tr in traces if tr is not None]
        out = cls(*(np.concatenate([getattr(tr, c) for tr in traces]) for c in cls.COLUMNS))
        out.snapshots = [s for tr in traces for s in tr.snapshots]
        out.final_state = traces[-1].final_state
        return out


class _Recorder:
    def __init__(self):
        self.rows = []
        self.seg = []

    def add(self, t, V1, V2, I, Tpk, N, seg):
        self.rows.append((t, V1, V2, I, Tpk, N))
        self.seg.append(seg)

    def result(self, snapshots, final):
        arr = np.array(self.rows, dtype=float).reshape(-1, 6)
        return TraceResult(*arr.T, snapshots=snapshots, final_state=final,
                           segment_index=np.array(self.seg, dtype=int))


def _change_ok(mesh, old, new, info_old_T, db, ctl):
    ox = mesh.oxide
    dn = float(np.max(np.abs(new.n_D[ox] - old.n_D[ox]))) / db.n_max
    dT = abs(float(new.T.max()) - info_old_T)
    ratio = max(dn / ctl.max_dn, dT / ctl.max_dT)
    return ratio <= 1.0, ratio


def run_transient(mesh: Mesh, state: FieldState, wf: Waveform, db: MaterialDB, bc: BoundaryConditions,
                  cfg: SolverConfig, compliance: ComplianceConfig | None = None,
                  snapshot_times: Sequence[float] = (), transport: bool = True,
                  control: StepControl | None = None, record_start: bool = True,
                  stop=None) -> TraceResult:
    """Drive the coupled solver through every segment of ``wf``.

    Time steps adapt between ``control.dt_min`` and each segment's ``dt``.
    Every accepted step is recorded. Snapshot times are taken relative to the
    start of the waveform and stored at the first step reaching them.
    ``stop(info)`` may end the run early after any accepted step.
    """
    ctl = control or StepControl()
    rec = _Recorder()
    snaps = []
    pending = sorted(snapshot_times)
    t_start = state.t
    cur = state
    if record_start:
        rec.add(cur.t, 0.0, cur.extras.get("V2", 0.0), cur.extras.get("current", 0.0),
                float(cur.T.max()), total_vacancies(cur, mesh), -1)
    t_seg0 = t_start
    for si, seg in enumerate(wf.segments):
        cc = None
        if compliance is not None:
            cc = compliance if seg.limit == compliance.active else _with_active(compliance, seg.limit)
        t_end = t_seg0 + seg.duration
        dt = min(seg.dt, cur.extras.get("dt_next", seg.dt))
        while cur.t < t_end - 1e-12 * seg.duration:
            dt = min(dt, t_end - cur.t)
            retries = 0
            while True:
                V1 = seg.voltage(cur.t + dt - t_seg0)
                try:
                    new, info = coupled_step(mesh, cur, dt, V1, bc, db, cfg, cc, transport=transport)
                    ok, ratio = _change_ok(mesh, cur, new, float(cur.T.max()), db, ctl)
                    if ok or dt <= ctl.dt_min:
                        break
                except SolverError as exc:
                    if dt <= ctl.dt_min or retries >= ctl.max_retries:
                        exc.info.setdefault("t", cur.t + dt)
                        raise
                    ratio = 2.0
                retries += 1
                if retries > ctl.max_retries:
                    raise SolverError("time step control exhausted retries", t=cur.t + dt)
                dt = max(dt * min(0.5, 0.8 / ratio), ctl.dt_min)
            cur = new
            rec.add(cur.t, V1, info.V2, info.current, info.T_peak, total_vacancies(cur, mesh), si)
            while pending and cur.t - t_start >= pending[0] - 1e-15:
                snaps.append((cur.t, cur.copy()))
                pending.pop(0)
            grow = ctl.grow if ratio < 0.5 else 1.0
            dt = min(dt * grow, seg.dt)
            cur.extras["dt_next"] = dt
            if stop is not None and stop(info):
                return rec.result(snaps, cur)
        t_seg0 = t_end
    return rec.result(snaps, cur)


def _with_active(cc: ComplianceConfig, active: bool) -> ComplianceConfig:
    return ComplianceConfig(cc.I_CC, cc.I_CC_sigma, cc.w, cc.d, cc.h, active)


@dataclass
class IVCurve:
    V1: np.ndarray
    V2: np.ndarray
    I: np.ndarray
    trace: TraceResult

    def points(self):
        return list(zip(self.V2.tolist(), self.I.tolist()))


def dc_sweep(mesh: Mesh, state: FieldState, ramp: Waveform, db: MaterialDB, bc: BoundaryConditions,
             cfg: SolverConfig, compliance: ComplianceConfig | None = None, step: float = 0.01,
             dwell: float = 1e-4, transport: bool = True, control: StepControl | None = None,
             stop=None) -> IVCurve:
    """Quasi-static I-V trace: the ramp is replaced by a staircase and the
    last sample of every dwell becomes one I-V point."""
    stairs = ramp.staircase(step, dwell)
    tr = run_transient(mesh, state, stairs, db, bc, cfg, compliance, transport=transport,
                       control=control, stop=stop)
    seg = tr.segment_index
    done = np.unique(seg[seg >= 0])
    last = np.array([np.flatnonzero(seg == k)[-1] for k in done], dtype=int)
    return IVCurve(tr.V1[last], tr.V2[last], tr.I[last], tr)


class ReadOut(NamedTuple):
    R: float
    I: float
    V2: float
    overflow: bool


def read_device(mesh: Mesh, state: FieldState, db: MaterialDB, bc: BoundaryConditions, cfg: SolverConfig,
                V_read: float = -0.1, compliance: ComplianceConfig | None = None,
                reference: str = "te") -> ReadOut:
    """Low-bias read with vacancy transport frozen.

    The device is relaxed to the ambient temperature first; self-heating at
    the read bias is then included through a steady electro-thermal solve.
    ``reference='te'`` reports the memristor resistance ``|V2/I|`` (TE to
    ground); ``'contact'`` includes the compliance layer, ``|V_read/I|``.
    """
    if reference not in ("te", "contact"):
        raise ValueError("reference must be 'te' or 'contact'")
    relaxed = state.copy()
    relaxed.T = np.full(mesh.shape, bc.T_ambient)
    relaxed.extras = {}
    cc = None if compliance is None else _with_active(compliance, False)
    out, info = coupled_step(mesh, relaxed, np.inf, V_read, bc, db, cfg, cc, transport=False)
    I = info.current
    V = info.V2 if reference == "te" else V_read
    if abs(I) < I_FLOOR:
        return ReadOut(abs(V) / I_FLOOR, I, info.V2, True)
    return ReadOut(abs(V / I), I, info.V2, False)


def read_resistance(mesh: Mesh, state: FieldState, db: MaterialDB, bc: BoundaryConditions, cfg: SolverConfig,
                    V_read: float = -0.1, compliance: ComplianceConfig | None = None,
                    reference: str = "te") -> float:
    r = read_device(mesh, state, db, bc, cfg, V_read, compliance, reference)
    if r.overflow:
        log.warning("read current below %.1e A; reporting floor resistance", I_FLOOR)
    return r.R


@dataclass(frozen=True)
class CycleNoiseConfig:
    """Cycle-to-cycle variability: before every set pulse the switch-layer
    vacancy density is multiplied by i.i.d. mean-one lognormal factors with
    log-standard deviation ``amplitude``. The default is calibrated on
    20 baseline cycles so that both resistance states show a cycle-to-cycle
    spread of about 0.1 in sigma/mu."""

    seed: int = 0
    amplitude: float = 1.35

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")


def perturb_switch_layer(mesh: Mesh, state: FieldState, rng: np.random.Generator, amplitude: float) -> FieldState:
    out = state.copy()
    sw = mesh.mask(Region.SWITCH)
    xi = rng.standard_normal(int(sw.sum()))
    if amplitude > 0:
        out.n_D[sw] = out.n_D[sw] * np.exp(amplitude * xi - 0.5 * amplitude**2)
    return out


@dataclass
class CycleResult:
    R_HRS: list
    R_LRS: list
    traces: list  # (set trace, reset trace) per cycle
    final_state: FieldState | None = None


def run_cycles(mesh: Mesh, state: FieldState, set_wf: Waveform, reset_wf: Waveform, N: int,
               noise: CycleNoiseConfig, db: MaterialDB, bc: BoundaryConditions, cfg: SolverConfig,
               compliance: ComplianceConfig, V_read: float = -0.1, control: StepControl | None = None,
               reference: str = "te", keep_traces: bool = True) -> CycleResult:
    """Alternate set and reset ``N`` times, reading the device after each
    half-cycle."""
    if N < 1:
        raise ValueError("need at least one cycle")
    rng = np.random.default_rng(noise.seed)
    R_H, R_L, traces = [], [], []
    cur = state
    for k in range(N):
        try:
            cur = perturb_switch_layer(mesh, cur, rng, noise.amplitude)
            tr_set = run_transient(mesh, cur, set_wf, db, bc, cfg, compliance, control=control)
            cur = tr_set.final_state
            R_L.append(read_resistance(mesh, cur, db, bc, cfg, V_read, compliance, reference))
            tr_reset = run_transient(mesh, cur, reset_wf, db, bc, cfg, compliance, control=control)
            cur = tr_reset.final_state
            R_H.append(read_resistance(mesh, cur, db, bc, cfg, V_read, compliance, reference))
        except SolverError as exc:
            exc.info["cycle"] = k
            raise
        if keep_traces:
            traces.append((tr_set, tr_reset))
    return CycleResult(R_H, R_L, traces, cur)
