"""Analytic and manufactured-solution checks of the discretisation.

Every check returns a :class:`Check` with the measured quantity and the
threshold it was held to; ``rramfv validate`` prints them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import fv
from .materials import MaterialDB
from .mesh import DeviceGeometry, Mesh, Region, Resolution, build_mesh, initial_state, total_vacancies, uniform_mesh
from .solver import BoundaryConditions, SolverConfig, coupled_step, step_transport


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""
    runtime: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{tag} {self.name}: {self.value:.3e} vs {self.threshold:.3e}{extra} [{self.runtime:.2f} s]"


def _timed(fn):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        out.runtime = time.perf_counter() - t0
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _l2(err, mesh):
    v = mesh.volume
    return float(np.sqrt(np.sum(err**2 * v) / np.sum(v)))


def observed_orders(h, err):
    """Pairwise convergence orders ``log(e1/e2)/log(h1/h2)``."""
    h, err = np.asarray(h, float), np.asarray(err, float)
    return np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])


# --- analytic oracles --------------------------------------------------------


def stack_current(sigma, width, depth, length, V):
    return sigma * width * depth / length * V


@_timed
def check_laplace(ny=8, nz=40, sigma=2.5e4, V=1.0) -> Check:
    """Uniform slab between two contacts: linear potential, Ohmic current."""
    W, d, L = 40e-9, 20e-9, 100e-9
    mesh = uniform_mesh(W, L, ny, nz, depth=d)
    pf = fv.solve_conduction(mesh, np.full(mesh.shape, sigma), {"bottom": 0.0, "top": V})
    I = float(-np.sum(pf.boundary_current["top"]))
    I_exact = stack_current(sigma, W, d, L, V)
    lin = np.max(np.abs(pf.psi - V * mesh.zc[:, None] / L))
    rel = max(abs(I - I_exact) / I_exact, lin / V)
    return Check("laplace uniform stack", rel < 1e-8, rel, 1e-8, f"I = {I:.6e} A")


@_timed
def check_series_stack(ny=4, nz=60, s1=1e3, s2=7e4, V=1.0) -> Check:
    """Two layers in series match ``R = L1/(s1 A) + L2/(s2 A)``."""
    W, d, L1, L2 = 40e-9, 20e-9, 30e-9, 30e-9
    mesh = uniform_mesh(W, L1 + L2, ny, nz, depth=d)
    sigma = np.where(mesh.zc[:, None] < L1, s1, s2) * np.ones(mesh.shape)
    pf = fv.solve_conduction(mesh, sigma, {"bottom": 0.0, "top": V})
    I = float(-np.sum(pf.boundary_current["top"]))
    R_exact = (L1 / s1 + L2 / s2) / (W * d)
    rel = abs(V / I - R_exact) / R_exact
    return Check("series two-layer stack", rel < 1e-3, rel, 1e-3)


@_timed
def check_heat_1d(nz=41, q=1e15, k=1.5, L=50e-9) -> Check:
    """Uniform source between two isothermal walls: peak rise ``qL^2/8k``."""
    mesh = uniform_mesh(10e-9, L, 1, nz, depth=20e-9)
    zero = np.zeros(mesh.shape)
    T, _ = fv.diffusion_step(mesh, zero, np.full(mesh.shape, k), np.ones(mesh.shape),
                             np.full(mesh.shape, q), np.inf, {"bottom": 0.0, "top": 0.0})
    exact = q * L**2 / (8 * k)
    rel = abs(T.max() - exact) / exact
    return Check("1D heat peak qL^2/8k", rel < 1e-2, rel, 1e-2, f"dT = {T.max():.4g} K")


def gaussian_diffusion_error(n, D=1.0, s0=1.0, t_end=1.0, half=10.0):
    """Spread of a Gaussian by pure diffusion with zero-flux walls. Returns
    ``(h, L2 error, peak relative error)`` against the exact Gaussian."""
    mesh = uniform_mesh(1.0, 2 * half, 1, n)
    z = mesh.zc - half
    u0 = np.exp(-z**2 / (2 * s0**2))[:, None]
    conn = fv.connectivity(mesh)
    Dface = np.full(conn.n_faces, D)
    wface = np.zeros(conn.n_faces)
    h = 2 * half / n
    steps = int(np.ceil(t_end / (0.25 * h * h)))
    dt = t_end / steps
    u = u0.copy()
    act = np.ones(mesh.shape, bool)
    for _ in range(steps):
        u, _ = fv.sg_transport_step(mesh, u, Dface, wface, dt, act)
    var = s0**2 + 2 * D * t_end
    exact = (s0 / np.sqrt(var) * np.exp(-z**2 / (2 * var)))[:, None]
    return h, _l2(u - exact, mesh), abs(u.max() - exact.max()) / exact.max()


@_timed
def check_gaussian_diffusion(levels=(40, 80, 160)) -> Check:
    hs, errs, peak = [], [], []
    for n in levels:
        h, e, p = gaussian_diffusion_error(n)
        hs.append(h)
        errs.append(e)
        peak.append(p)
    order = float(observed_orders(hs, errs).min())
    ok = order >= 1.9 and peak[-1] < 1e-2
    return Check("gaussian diffusion order", ok, order, 1.9, f"errors {', '.join(f'{e:.2e}' for e in errs)}")


# --- conservation ------------------------------------------------------------


def _small_device():
    return build_mesh(DeviceGeometry(), Resolution(dy=2e-9, dz_switch=1.25e-9, dz_max=10e-9, growth=1.5))


@_timed
def check_conservation_zero_drive(steps=1000, mesh: Mesh | None = None) -> Check:
    """Coupled steps with both contacts grounded: vacancy count and sign."""
    mesh = mesh or build_mesh(DeviceGeometry())
    db = MaterialDB()
    bc, cfg = BoundaryConditions(), SolverConfig()
    state = initial_state(mesh, db)
    N0 = total_vacancies(state, mesh)
    worst, low, low_ox = 0.0, np.inf, np.inf
    prev = N0
    for _ in range(steps):
        state, _ = coupled_step(mesh, state, 1e-6, 0.0, bc, db, cfg)
        N = total_vacancies(state, mesh)
        worst = max(worst, abs(N - prev) / N0)
        low = min(low, float(state.n_D.min()))
        low_ox = min(low_ox, float(state.n_D[mesh.oxide].min()))
        prev = N
    ok = worst < 1e-8 and low >= 0.0
    return Check("conservation, zero drive", ok, worst, 1e-8, f"min oxide n_D {low_ox:.3g}, {steps} steps")


@_timed
def check_conservation_driven(steps=200, T=900.0, E=2e8) -> Check:
    """Hot, strongly driven transport: the oxide keeps its vacancy count and
    the density stays non-negative."""
    mesh = _small_device()
    db = MaterialDB()
    cfg = SolverConfig()
    state = initial_state(mesh, db)
    conn = fv.connectivity(mesh)
    E_face = np.where(conn.axis == 1, E, 0.0)
    Tf = np.full(mesh.shape, T)
    N0 = total_vacancies(state, mesh)
    worst, low = 0.0, np.inf
    prev = N0
    for _ in range(steps):
        state.n_D = step_transport(mesh, state, 1e-6, E_face, Tf, db, cfg)
        N = total_vacancies(state, mesh)
        worst = max(worst, abs(N - prev) / N0)
        low = min(low, float(state.n_D.min()))
        prev = N
    moved = state.n_D[mesh.mask(Region.SWITCH)].mean() / db.n_switch
    ok = worst < 1e-8 and low >= 0.0 and moved > 10
    return Check("conservation, driven transport", ok, worst, 1e-8, f"switch density x{moved:.3g}")


# --- manufactured solutions --------------------------------------------------

_PI = np.pi


def _mms_fields(y, z):
    u = np.sin(_PI * y) * np.sin(_PI * z) + y * z
    uy = _PI * np.cos(_PI * y) * np.sin(_PI * z) + z
    uz = _PI * np.sin(_PI * y) * np.cos(_PI * z) + y
    lap = -2 * _PI**2 * np.sin(_PI * y) * np.sin(_PI * z)
    return u, uy, uz, lap


def _coef(y, z):
    c = 1.0 + 0.5 * y + 0.3 * z**2
    return c, 0.5 * np.ones_like(y), 0.6 * z


def _boundary_values(mesh, fn):
    y, z = mesh.yc, mesh.zc
    W, H = mesh.y_faces[-1], mesh.z_faces[-1]
    return {
        "bottom": fn(y, np.zeros_like(y)),
        "top": fn(y, np.full_like(y, H)),
        "left": fn(np.zeros_like(z), z),
        "right": fn(np.full_like(z, W), z),
    }


def mms_elliptic_error(n, kind="potential"):
    """L2 error for ``-div(c grad u) = f`` on the unit square with Dirichlet
    data from the manufactured ``u``; the coefficient is sampled per cell."""
    mesh = uniform_mesh(1.0, 1.0, n, n)
    Y, Z = np.meshgrid(mesh.yc, mesh.zc)
    u, uy, uz, lap = _mms_fields(Y, Z)
    c, cy, cz = _coef(Y, Z)
    f = -(cy * uy + cz * uz + c * lap)
    bcs = _boundary_values(mesh, lambda y, z: _mms_fields(y, z)[0])
    if kind == "potential":
        num = fv.solve_conduction(mesh, c, bcs, source=f).psi
    elif kind == "heat":
        num, _ = fv.diffusion_step(mesh, np.zeros(mesh.shape), c, np.ones(mesh.shape), f, np.inf, bcs)
    else:
        raise ValueError(kind)
    return 1.0 / n, _l2(num - u, mesh)


def mms_transport_error(n, D=0.02, w0=1.0, L=1.0):
    """Drift-dominated steady balance with zero-flux walls.

    The velocity ``q(z) + D n'/n`` with ``q = 4 w0 z (L - z)/L^2`` makes the
    exact flux ``q n`` vanish at both walls. One backward-Euler step from the
    exact field isolates the spatial error.
    """
    mesh = uniform_mesh(1.0, L, 1, n)
    conn = fv.connectivity(mesh)
    k = _PI / L

    def n_ex(z):
        return 1.0 + 0.5 * np.sin(k * z) + 0.3 * np.cos(2 * k * z)

    def dn_ex(z):
        return 0.5 * k * np.cos(k * z) - 0.6 * k * np.sin(2 * k * z)

    def q(z):
        return 4 * w0 * z * (L - z) / L**2

    def dq(z):
        return 4 * w0 * (L - 2 * z) / L**2

    z = mesh.zc
    zf = mesh.z_faces[1:-1]
    w = q(zf) + D * dn_ex(zf) / n_ex(zf)
    S = (dq(z) * n_ex(z) + q(z) * dn_ex(z))[:, None]
    nx = n_ex(z)[:, None]
    dt = 0.05 * L / w0
    num, _ = fv.sg_transport_step(mesh, nx, np.full(conn.n_faces, D), w, dt, np.ones(mesh.shape, bool), source=S)
    return L / n, _l2(num - nx, mesh)


def _order_check(name, fn, levels, threshold, **kw):
    hs, errs = [], []
    for n in levels:
        h, e = fn(n, **kw)
        hs.append(h)
        errs.append(e)
    order = float(observed_orders(hs, errs).min())
    return Check(name, order >= threshold, order, threshold, f"errors {', '.join(f'{e:.2e}' for e in errs)}")


@_timed
def check_mms_potential(levels=(16, 32, 64)) -> Check:
    return _order_check("MMS potential order", mms_elliptic_error, levels, 1.9, kind="potential")


@_timed
def check_mms_heat(levels=(16, 32, 64)) -> Check:
    return _order_check("MMS heat order", mms_elliptic_error, levels, 1.9, kind="heat")


@_timed
def check_mms_transport(levels=(20, 40, 80)) -> Check:
    return _order_check("MMS drift-dominated transport order", mms_transport_error, levels, 0.9)


def run_all(quick: bool = False) -> list[Check]:
    checks = [
        check_laplace(),
        check_series_stack(),
        check_heat_1d(),
        check_gaussian_diffusion(),
        check_conservation_driven(),
        check_mms_potential(),
        check_mms_heat(),
        check_mms_transport(),
    ]
    mesh = _small_device() if quick else None
    checks.insert(4, check_conservation_zero_drive(200 if quick else 1000, mesh))
    return checks
