"""A complete run description and the standard experiments built on it."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .compliance import ComplianceConfig
from .materials import MaterialDB
from .mesh import DeviceGeometry, FieldState, Mesh, Resolution, apply_nucleation_seed, build_mesh, initial_state
from .protocol import (
    CycleNoiseConfig,
    CycleResult,
    IVCurve,
    Segment,
    StepControl,
    TraceResult,
    Waveform,
    dc_sweep,
    read_resistance,
    run_cycles,
    run_transient,
)
from .solver import BoundaryConditions, SolverConfig


@dataclass(frozen=True)
class PulseSpec:
    amplitude: float
    duration: float = 10e-3
    dt: float | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("pulse dt must be positive")

    def waveform(self, limit: bool) -> Waveform:
        return Waveform([Segment.pulse(self.amplitude, self.duration, self.dt or self.duration / 100, limit)])


@dataclass(frozen=True)
class RampSpec:
    """Staircase ramp used for forming-voltage extraction."""

    v_start: float = 0.0
    v_stop: float = -3.0
    step: float = 0.01
    dwell: float = 3e-4

    def __post_init__(self):
        if not self.step > 0 or not self.dwell > 0:
            raise ValueError("ramp step and dwell must be positive")
        if self.v_stop == self.v_start:
            raise ValueError("ramp needs distinct start and stop voltages")

    def waveform(self) -> Waveform:
        # only the end points matter; dc_sweep turns it into a staircase
        return Waveform([Segment.ramp(self.v_start, self.v_stop, 1.0, limit=True)])


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce a simulation."""

    geometry: DeviceGeometry = field(default_factory=DeviceGeometry)
    resolution: Resolution = field(default_factory=Resolution)
    materials: MaterialDB = field(default_factory=MaterialDB)
    boundary: BoundaryConditions = field(default_factory=BoundaryConditions)
    solver: SolverConfig = field(default_factory=SolverConfig)
    control: StepControl = field(default_factory=StepControl)
    I_CC: float = 500e-6
    seed_amplitude: float = 5e26
    seed_width: float = 2e-9
    form_pulse: PulseSpec = PulseSpec(-2.1)
    form_ramp: RampSpec = RampSpec()
    set_pulse: PulseSpec = PulseSpec(-2.1)
    reset_pulse: PulseSpec = PulseSpec(1.0)
    form_mode: str = "pulse"
    V_read: float = -0.1
    read_reference: str = "te"
    noise_amplitude: float = 1.35
    cycles: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.I_CC > 0:
            raise ValueError("I_CC must be positive")
        if self.seed_amplitude < 0:
            raise ValueError("seed_amplitude must be non-negative")
        if self.form_mode not in ("pulse", "ramp"):
            raise ValueError("form_mode must be 'pulse' or 'ramp'")
        if self.read_reference not in ("te", "contact"):
            raise ValueError("read_reference must be 'te' or 'contact'")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be non-negative")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.V_read == 0:
            raise ValueError("V_read must be non-zero")

    def replace(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def with_materials(self, **kw) -> "Scenario":
        return replace(self, materials=self.materials.with_overrides(**kw))

    def mesh(self) -> Mesh:
        return _mesh(self.geometry, self.resolution)

    def compliance(self) -> ComplianceConfig:
        return ComplianceConfig.for_geometry(self.geometry, I_CC=self.I_CC, I_CC_sigma=self.materials.I_CC_sigma)

    def pristine_state(self, mesh: Mesh | None = None) -> FieldState:
        mesh = mesh or self.mesh()
        state = initial_state(mesh, self.materials)
        return apply_nucleation_seed(state, mesh, self.seed_amplitude, self.seed_width)

    def noise(self, seed: int | None = None) -> CycleNoiseConfig:
        return CycleNoiseConfig(self.seed if seed is None else seed, self.noise_amplitude)

    # standard experiments -------------------------------------------------

    def read(self, state: FieldState, mesh: Mesh | None = None) -> float:
        return read_resistance(mesh or self.mesh(), state, self.materials, self.boundary, self.solver,
                               self.V_read, self.compliance(), self.read_reference)

    def run(self, wf: Waveform, state: FieldState | None = None, snapshot_times=(), stop=None) -> TraceResult:
        mesh = self.mesh()
        state = self.pristine_state(mesh) if state is None else state
        return run_transient(mesh, state, wf, self.materials, self.boundary, self.solver, self.compliance(),
                             snapshot_times=snapshot_times, control=self.control, stop=stop)

    def form(self, snapshot_times=()) -> TraceResult:
        """Forming waveform (pulse or staircase ramp, per ``form_mode``)
        applied to the pristine device."""
        if self.form_mode == "ramp":
            return self.forming_sweep(stop_at_forming=False).trace
        return self.run(self.form_pulse.waveform(limit=True), snapshot_times=snapshot_times)

    def forming_sweep(self, state: FieldState | None = None, stop_at_forming: bool = True) -> IVCurve:
        """Staircase forming ramp; stops once the current reaches the
        detection threshold unless ``stop_at_forming`` is false."""
        mesh = self.mesh()
        state = self.pristine_state(mesh) if state is None else state
        thr = FORMING_FRACTION * self.I_CC
        stop = (lambda info: abs(info.current) >= thr) if stop_at_forming else None
        r = self.form_ramp
        return dc_sweep(mesh, state, r.waveform(), self.materials, self.boundary, self.solver, self.compliance(),
                        step=r.step, dwell=r.dwell, control=self.control, stop=stop)

    def iv_sweep(self, ramp: Waveform, state: FieldState | None = None, step: float | None = None,
                 dwell: float | None = None) -> IVCurve:
        mesh = self.mesh()
        state = self.pristine_state(mesh) if state is None else state
        return dc_sweep(mesh, state, ramp, self.materials, self.boundary, self.solver, self.compliance(),
                        step=step or self.form_ramp.step, dwell=dwell or self.form_ramp.dwell,
                        control=self.control)

    def cycle(self, state: FieldState, N: int | None = None, seed: int | None = None,
              keep_traces: bool = True) -> CycleResult:
        return run_cycles(self.mesh(), state, self.set_pulse.waveform(limit=True),
                          self.reset_pulse.waveform(limit=False), self.cycles if N is None else N, self.noise(seed),
                          self.materials, self.boundary, self.solver, self.compliance(), self.V_read,
                          control=self.control, reference=self.read_reference, keep_traces=keep_traces)


FORMING_FRACTION = 0.95


@lru_cache(maxsize=16)
def _mesh(geometry: DeviceGeometry, resolution: Resolution) -> Mesh:
    return build_mesh(geometry, resolution)


def pristine_resistance(scn: Scenario) -> float:
    mesh = scn.mesh()
    return scn.read(scn.pristine_state(mesh), mesh)


def seed_for_cell(root_seed: int, index: int) -> int:
    """Independent 32-bit seed for sweep cell ``index``."""
    ss = np.random.SeedSequence(root_seed, spawn_key=(index,))
    return int(ss.generate_state(1)[0])
