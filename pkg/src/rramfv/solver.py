"""Coupled electro-thermal vacancy-transport solver.

Three equations are advanced together on the device mesh:

* current continuity ``div(sigma grad psi) = 0`` with the oxide conductivity
  depending on vacancy density, temperature and field,
* heat ``rho c_p dT/dt - div(k grad T) = J.E``,
* vacancy transport ``dn/dt = div(D grad n - v n + D S n grad T)``.

They are coupled by a damped Gummel (block Picard) iteration inside each
backward-Euler time step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import fv
from .compliance import ComplianceConfig, cml_conductance
from .fv import SolverError
from .materials import (
    MaterialDB,
    diffusivity,
    drift_velocity,
    sigma_oxide,
    soret_coefficient,
    thermal_conductivity,
)
from .mesh import FieldState, Mesh, Region

log = logging.getLogger(__name__)

__all__ = [
    "BoundaryConditions",
    "SolverConfig",
    "PotentialSolution",
    "StepInfo",
    "SolverError",
    "conductivity_field",
    "solve_potential",
    "joule_source",
    "step_heat",
    "step_transport",
    "coupled_step",
]

joule_source = fv.joule_source


@dataclass(frozen=True)
class BoundaryConditions:
    """Contacts and thermal boundary.

    The BE bottom face is grounded and the CML top face sits at ``V1``.
    Temperature is pinned to ``T_ambient`` on the BE bottom, the CML top and,
    with ``metal_sidewalls_isothermal``, on the side walls of the metal
    layers; the oxide side walls are adiabatic and insulating.
    """

    V1: float = 0.0
    V_ground: float = 0.0
    T_ambient: float = 300.0
    metal_sidewalls_isothermal: bool = True

    def with_voltage(self, V1: float) -> "BoundaryConditions":
        return BoundaryConditions(V1, self.V_ground, self.T_ambient, self.metal_sidewalls_isothermal)

    def potential_dirichlet(self, mesh: Mesh) -> dict:
        return {"bottom": self.V_ground, "top": self.V1}

    def thermal_dirichlet(self, mesh: Mesh) -> dict:
        out = {"bottom": self.T_ambient, "top": self.T_ambient}
        if self.metal_sidewalls_isothermal:
            metal_rows = ~np.all(mesh.oxide, axis=1)
            side = np.where(metal_rows, self.T_ambient, np.nan)
            out["left"] = side
            out["right"] = side
        return out


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-6
    outer_tol: float = 1e-6
    outer_max_iters: int = 50
    linear_tol: float = 1e-10
    damping: float = 0.7
    inner_max_iters: int = 60
    negativity_tol: float = 1e-9

    def __post_init__(self):
        for name in ("dt", "outer_tol", "linear_tol", "negativity_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.outer_max_iters < 1 or self.inner_max_iters < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class PotentialSolution:
    psi: np.ndarray
    E_face: np.ndarray
    E_cell: np.ndarray  # (nz, ny, 2)
    sigma: np.ndarray
    sigma_cml: float
    current: float  # into the device through the top contact, A
    V2: float  # potential of the TE
    residual: float
    iterations: int
    field: fv.PotentialField = field(repr=False)

    @property
    def E_mag(self) -> np.ndarray:
        return np.hypot(self.E_cell[..., 0], self.E_cell[..., 1])


@dataclass
class StepInfo:
    current: float
    V1: float
    V2: float
    T_peak: float
    iterations: int
    sigma_cml: float
    power: float = 0.0


def conductivity_field(mesh: Mesh, n_D, T, E_mag, db: MaterialDB, sigma_cml: float) -> np.ndarray:
    sigma = np.empty(mesh.shape)
    ox = mesh.oxide
    sigma[ox] = sigma_oxide(np.maximum(n_D[ox], 0.0), T[ox], E_mag[ox], db)
    sigma[mesh.mask(Region.BE, Region.TE)] = db.sigma_Pd
    sigma[mesh.mask(Region.CML)] = sigma_cml
    return sigma


def thermal_fields(mesh: Mesh, n_D, T, db: MaterialDB) -> tuple[np.ndarray, np.ndarray]:
    """Thermal conductivity and volumetric heat capacity per cell."""
    k = np.empty(mesh.shape)
    c = np.empty(mesh.shape)
    ox = mesh.oxide
    k[ox] = thermal_conductivity(np.maximum(n_D[ox], 0.0), T[ox], db)
    c[ox] = db.rho_ox * db.cp_ox
    pd = mesh.mask(Region.BE, Region.TE)
    k[pd] = db.k_Pd
    c[pd] = db.rho_Pd * db.cp_Pd
    cml = mesh.mask(Region.CML)
    k[cml] = db.k_CML
    c[cml] = db.rho_CML * db.cp_CML
    return k, c


def _te_potential(mesh: Mesh, psi: np.ndarray) -> float:
    rows = mesh.rows(Region.TE)
    if len(rows) == 0:
        return float("nan")
    top = rows[-1]
    return float(np.average(psi[top], weights=mesh.dy))


def _terminal_current(pf: fv.PotentialField) -> float:
    return float(-np.sum(pf.boundary_current["top"]))


def _rel(a, b, floor):
    return abs(a - b) / max(abs(a), abs(b), floor)


class _PotentialIterator:
    """One damped Picard update of the potential per call.

    Holds the conductivity, field and CML state between calls so that
    :func:`solve_potential` and the Gummel loop in :func:`coupled_step` share
    the same update rule.
    """

    def __init__(self, mesh, bc, db, cfg, compliance, E_guess=None, sigma_prev=None):
        self.mesh, self.bc, self.db, self.cfg = mesh, bc, db, cfg
        self.compliance = compliance
        self.dirichlet = bc.potential_dirichlet(mesh)
        self.cml = mesh.mask(Region.CML)
        self.base = db.I_CC_sigma if compliance is None else compliance.I_CC_sigma
        self.sigma_cml = self.base
        self.E_mag = np.zeros(mesh.shape) if E_guess is None else E_guess
        self.sigma = sigma_prev
        self.iterations = 0

    def update(self, n_D, T) -> PotentialSolution:
        mesh, cfg = self.mesh, self.cfg
        sig_new = conductivity_field(mesh, n_D, T, self.E_mag, self.db, self.sigma_cml)
        if self.sigma is None or cfg.damping == 1.0:
            sigma = sig_new
        else:
            sigma = cfg.damping * sig_new + (1.0 - cfg.damping) * self.sigma
            sigma[self.cml] = self.sigma_cml
        pf = fv.solve_conduction(mesh, sigma, self.dirichlet)
        if pf.residual > cfg.linear_tol:
            raise SolverError("potential solve residual above linear_tol", residual=pf.residual)
        self.iterations += 1
        I = _terminal_current(pf)
        V2 = _te_potential(mesh, pf.psi)
        used_cml = self.sigma_cml
        self.sigma = sigma
        self.E_mag = np.hypot(pf.E_cell[..., 0], pf.E_cell[..., 1])
        self.sigma_cml = self._next_cml(I, V2)
        return PotentialSolution(pf.psi, pf.E_face, pf.E_cell, sigma, used_cml, I, V2,
                                 pf.residual, self.iterations, pf)

    def _next_cml(self, I, V2):
        cc = self.compliance
        V1 = self.bc.V1
        if cc is None or not cc.active or not self.cml.any() or V1 == 0.0 or I == 0.0:
            return self.base
        # resistance below the CML; the CML is a uniform slab in series
        R_dev = V2 / I
        I_base = V1 / (R_dev + cc.base_resistance)
        if abs(I_base) <= cc.I_CC:
            return self.base
        V2_eq = np.sign(V1) * cc.I_CC * abs(R_dev)
        return cml_conductance(cc.I_CC, V1, V2_eq, (cc.w, cc.d, cc.h), cc.I_CC_sigma)


def solve_potential(mesh: Mesh, state: FieldState, bc: BoundaryConditions, db: MaterialDB,
                    cfg: SolverConfig, compliance: ComplianceConfig | None = None,
                    E_guess: np.ndarray | None = None, tol: float | None = None) -> PotentialSolution:
    """Solve current continuity for the present ``n_D`` and ``T``.

    The Poole-Frenkel part of the oxide conductivity depends on the local
    field, so the conductivity is iterated (damped Picard) until the terminal
    current settles. With an active ``compliance`` the CML conductivity is
    updated in the same loop.
    """
    tol = cfg.outer_tol if tol is None else tol
    if E_guess is None:
        E_guess = state.extras.get("E_mag")
    it = _PotentialIterator(mesh, bc, db, cfg, compliance, E_guess)
    prev = None
    for _ in range(cfg.outer_max_iters):
        sol = it.update(state.n_D, state.T)
        if bc.V1 == 0.0 and bc.V_ground == 0.0:
            return sol
        if prev is not None and _rel(sol.current, prev.current, 1e-18) < tol \
                and _rel(sol.sigma_cml, prev.sigma_cml, 1e-300) < tol:
            return sol
        prev = sol
    raise SolverError("potential iteration did not converge", residual=sol.residual, current=sol.current,
                      last_change=_rel(sol.current, prev.current, 1e-18))


def step_heat(mesh: Mesh, state: FieldState, dt: float, source: np.ndarray, bc: BoundaryConditions,
              db: MaterialDB, cfg: SolverConfig, T_lag: np.ndarray | None = None,
              n_D: np.ndarray | None = None) -> np.ndarray:
    """Backward-Euler heat step from ``state.T``. Conductivity is evaluated
    at ``T_lag`` and ``n_D`` (the previous outer iterate) when given."""
    T_lag = state.T if T_lag is None else T_lag
    n_D = state.n_D if n_D is None else n_D
    k, c = thermal_fields(mesh, n_D, T_lag, db)
    T, res = fv.diffusion_step(mesh, state.T, k, c, source, dt, bc.thermal_dirichlet(mesh))
    if res > cfg.linear_tol:
        raise SolverError("heat solve residual above linear_tol", residual=res)
    return T


def transport_coefficients(mesh: Mesh, E_face: np.ndarray, T: np.ndarray, db: MaterialDB):
    """Face diffusivity and total drift velocity (field drift plus Soret)."""
    conn = fv.connectivity(mesh)
    Tf = T.ravel()
    Ta, Tb = Tf[conn.a], Tf[conn.b]
    T_face = 0.5 * (Ta + Tb)
    D = diffusivity(T_face, db)
    v = drift_velocity(E_face, T_face, db)
    w_soret = -D * soret_coefficient(T_face, db) * (Tb - Ta) / conn.dist
    return D, v + w_soret


def step_transport(mesh: Mesh, state: FieldState, dt: float, E_face: np.ndarray, T: np.ndarray,
                   db: MaterialDB, cfg: SolverConfig) -> np.ndarray:
    """Backward-Euler step of vacancy transport on the oxide cells with
    exponentially fitted face fluxes."""
    D, w = transport_coefficients(mesh, E_face, T, db)
    n, res = fv.sg_transport_step(mesh, state.n_D, D, w, dt, mesh.oxide)
    if res > cfg.linear_tol:
        raise SolverError("transport solve residual above linear_tol", residual=res)
    scale = max(float(np.max(state.n_D)), 1.0)
    low = float(n.min())
    if low < -cfg.negativity_tol * scale:
        raise SolverError("vacancy density went negative", min_value=low)
    return np.maximum(n, 0.0)


def coupled_step(mesh: Mesh, state: FieldState, dt: float, V1: float, bc: BoundaryConditions,
                 db: MaterialDB, cfg: SolverConfig, compliance: ComplianceConfig | None = None,
                 transport: bool = True) -> tuple[FieldState, StepInfo]:
    """Advance the coupled system by ``dt`` with ``V1`` on the top contact.

    Each outer iteration updates the CML and solves the potential, then the
    heat equation with the resulting Joule source, then vacancy transport
    from the start-of-step density. The loop ends when terminal current and
    peak temperature both change by less than ``cfg.outer_tol``.
    """
    bc = bc.with_voltage(V1)
    n_old = state.n_D
    work = state.copy()
    pot_it = _PotentialIterator(mesh, bc, db, cfg, compliance, state.extras.get("E_mag"))
    dirichlet = bc.potential_dirichlet(mesh)
    I_prev = Tpk_prev = cml_prev = None
    trace = []

    for it in range(1, cfg.outer_max_iters + 1):
        pot = pot_it.update(work.n_D, work.T)
        q = fv.joule_density(mesh, pot.sigma, pot.field, dirichlet)
        T_new = step_heat(mesh, state, dt, q, bc, db, cfg, T_lag=work.T, n_D=work.n_D)
        if transport:
            n_new = step_transport(mesh, state, dt, pot.E_face, T_new, db, cfg)
        else:
            n_new = n_old
        work.T = T_new
        work.n_D = n_new
        work.psi = pot.psi
        I, Tpk = pot.current, float(T_new.max())
        trace.append((I, Tpk))
        if (I_prev is not None
                and _rel(I, I_prev, 1e-15) < cfg.outer_tol
                and _rel(Tpk, Tpk_prev, 1.0) < cfg.outer_tol
                and _rel(pot.sigma_cml, cml_prev, 1e-300) < cfg.outer_tol):
            break
        I_prev, Tpk_prev, cml_prev = I, Tpk, pot.sigma_cml
    else:
        raise SolverError("Gummel iteration did not converge", t=state.t + dt, trace=trace)

    work.t = state.t + dt
    work.extras = {
        "E_mag": pot.E_mag,
        "E_face": pot.E_face,
        "sigma": pot.sigma,
        "current": pot.current,
        "V2": pot.V2,
    }
    power = float(np.sum(q * mesh.volume))
    info = StepInfo(pot.current, V1, pot.V2, float(work.T.max()), it, pot.sigma_cml, power)
    log.debug("t=%.4e V1=%.4f I=%.4e Tpk=%.1f iters=%d", work.t, V1, info.current, info.T_peak, it)
    return work, info
