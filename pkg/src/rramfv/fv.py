"""Finite-volume building blocks on the structured mesh.

Cell-centred unknowns, two-point fluxes. Interior faces are listed once with
an orientation ``a -> b`` (increasing y or increasing z). Boundary faces are
grouped by side: ``bottom``, ``top`` (z) and ``left``, ``right`` (y).

A boundary value array of ``NaN`` marks a zero-flux face; finite values are
Dirichlet data imposed at the face.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded, solveh_banded
from scipy.sparse.linalg import spsolve

from .mesh import Mesh

SIDES = ("bottom", "top", "left", "right")


class SolverError(RuntimeError):
    """Raised when a linear or nonlinear solve fails. ``info`` carries the
    diagnostics available at the point of failure."""

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


@dataclass(frozen=True, eq=False)
class Boundary:
    cells: np.ndarray  # flat cell index
    h: np.ndarray  # centre-to-face distance
    area: np.ndarray
    outward: int  # +1 if the outward normal points along +axis
    axis: int  # 0 = y, 1 = z


@dataclass(frozen=True, eq=False)
class Connectivity:
    a: np.ndarray
    b: np.ndarray
    ha: np.ndarray
    hb: np.ndarray
    area: np.ndarray
    axis: np.ndarray
    boundary: dict
    volume: np.ndarray  # flat
    ny: int
    nz: int

    @property
    def dist(self) -> np.ndarray:
        return self.ha + self.hb

    @property
    def n_faces(self) -> int:
        return len(self.a)


@lru_cache(maxsize=16)
def connectivity(mesh: Mesh) -> Connectivity:
    nz, ny = mesh.shape
    idx = np.arange(nz * ny).reshape(nz, ny)
    dy, dz, depth = mesh.dy, mesh.dz, mesh.depth

    # y-faces between (k, i) and (k, i+1)
    ay, by = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    hay = np.broadcast_to(0.5 * dy[:-1], (nz, ny - 1)).ravel()
    hby = np.broadcast_to(0.5 * dy[1:], (nz, ny - 1)).ravel()
    Ay = np.broadcast_to(dz[:, None] * depth, (nz, ny - 1)).ravel()
    # z-faces between (k, i) and (k+1, i)
    az, bz = idx[:-1, :].ravel(), idx[1:, :].ravel()
    haz = np.broadcast_to(0.5 * dz[:-1, None], (nz - 1, ny)).ravel()
    hbz = np.broadcast_to(0.5 * dz[1:, None], (nz - 1, ny)).ravel()
    Az = np.broadcast_to(dy[None, :] * depth, (nz - 1, ny)).ravel()

    boundary = {
        "bottom": Boundary(idx[0, :], 0.5 * dz[0] * np.ones(ny), dy * depth, -1, 1),
        "top": Boundary(idx[-1, :], 0.5 * dz[-1] * np.ones(ny), dy * depth, +1, 1),
        "left": Boundary(idx[:, 0], 0.5 * dy[0] * np.ones(nz), dz * depth, -1, 0),
        "right": Boundary(idx[:, -1], 0.5 * dy[-1] * np.ones(nz), dz * depth, +1, 0),
    }
    return Connectivity(
        a=np.concatenate([ay, az]),
        b=np.concatenate([by, bz]),
        ha=np.concatenate([hay, haz]),
        hb=np.concatenate([hby, hbz]),
        area=np.concatenate([Ay, Az]),
        axis=np.concatenate([np.zeros(len(ay), int), np.ones(len(az), int)]),
        boundary=boundary,
        volume=mesh.volume.ravel(),
        ny=ny,
        nz=nz,
    )


def face_conductance(conn: Connectivity, coef: np.ndarray) -> np.ndarray:
    """Two-point conductance with the distance-weighted harmonic mean of the
    cell coefficients; exact for piecewise-constant layered media."""
    c = coef.ravel()
    ra = conn.ha / c[conn.a]
    rb = conn.hb / c[conn.b]
    return conn.area / (ra + rb)


def boundary_conductance(conn: Connectivity, side: str, coef: np.ndarray) -> np.ndarray:
    bd = conn.boundary[side]
    return bd.area * coef.ravel()[bd.cells] / bd.h


def _dirichlet_items(dirichlet):
    for side, values in (dirichlet or {}).items():
        if values is None:
            continue
        yield side, np.asarray(values, dtype=float)


def _scatter(idx, vals, n):
    return np.bincount(idx, weights=vals, minlength=n)


@dataclass
class SymmetricSystem:
    """``diag*u - sum_faces G (u_b - u_a) = rhs`` in face form."""

    conn: Connectivity
    diag: np.ndarray
    G: np.ndarray
    rhs: np.ndarray

    def matvec(self, x):
        c = self.conn
        n = len(x)
        return (self.diag * x - _scatter(c.a, self.G * x[c.b], n) - _scatter(c.b, self.G * x[c.a], n))

    def to_sparse(self):
        c = self.conn
        n = len(self.diag)
        rows = np.concatenate([np.arange(n), c.a, c.b])
        cols = np.concatenate([np.arange(n), c.b, c.a])
        vals = np.concatenate([self.diag, -self.G, -self.G])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def solve(self, what="linear system"):
        """Banded Cholesky; the natural ordering has half-bandwidth ny."""
        c = self.conn
        n = len(self.diag)
        bw = c.ny
        ab = np.zeros((bw + 1, n))
        ab[bw] = self.diag
        # upper storage: ab[bw - (b - a), b] = A[a, b]
        ab[bw - (c.b - c.a), c.b] = -self.G
        try:
            x = solveh_banded(ab, self.rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"{what}: factorisation failed ({exc})") from exc
        if not np.all(np.isfinite(x)):
            raise SolverError(f"{what}: solution is not finite")
        return x, self.relative_residual(x)

    def relative_residual(self, x):
        r = self.matvec(x) - self.rhs
        scale = np.linalg.norm(self.rhs) + (np.max(self.diag) * np.linalg.norm(x))
        return float(np.linalg.norm(r) / max(scale, 1e-300))


def assemble_diffusion(conn: Connectivity, coef: np.ndarray, dirichlet: dict | None,
                       diag: np.ndarray | None = None, rhs: np.ndarray | None = None) -> SymmetricSystem:
    """System for ``diag*u - div(coef grad u) = rhs`` integrated over cells
    (``diag`` and ``rhs`` are already volume-weighted)."""
    n = len(conn.volume)
    G = face_conductance(conn, coef)
    d = np.zeros(n) if diag is None else np.array(diag, dtype=float)
    r = np.zeros(n) if rhs is None else np.array(rhs, dtype=float)
    d += _scatter(conn.a, G, n) + _scatter(conn.b, G, n)
    for side, v in _dirichlet_items(dirichlet):
        bd = conn.boundary[side]
        v = np.broadcast_to(v, bd.cells.shape)
        on = np.isfinite(v)
        Gb = boundary_conductance(conn, side, coef)[on]
        d += _scatter(bd.cells[on], Gb, n)
        r += _scatter(bd.cells[on], Gb * v[on], n)
    return SymmetricSystem(conn, d, G, r)


def linear_solve(A, b, what="linear system"):
    """General sparse direct solve with a relative residual."""
    x = spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise SolverError(f"{what}: solution is not finite")
    scale = np.linalg.norm(b) + sp.linalg.norm(A, np.inf) * np.linalg.norm(x)
    residual = float(np.linalg.norm(A @ x - b) / max(scale, 1e-300))
    return x, residual


@dataclass
class PotentialField:
    psi: np.ndarray  # (nz, ny)
    E_face: np.ndarray  # field along each interior face normal a -> b
    E_cell: np.ndarray  # (nz, ny, 2) cell field vector (Ey, Ez)
    G: np.ndarray
    boundary_current: dict  # side -> per-face current leaving the domain, A
    residual: float


def solve_conduction(mesh: Mesh, sigma: np.ndarray, dirichlet: dict, source: np.ndarray | None = None
                     ) -> PotentialField:
    """Solve ``div(sigma grad psi) + source = 0``; ``source`` in A/m^3."""
    conn = connectivity(mesh)
    rhs = None if source is None else source.ravel() * conn.volume
    system = assemble_diffusion(conn, sigma, dirichlet, rhs=rhs)
    x, res = system.solve("potential")
    G = system.G
    psi = x.reshape(mesh.shape)
    E_face = -(x[conn.b] - x[conn.a]) / conn.dist

    bcur = {}
    bfield = {}
    for side in SIDES:
        bd = conn.boundary[side]
        v = np.broadcast_to(np.asarray(dirichlet.get(side, np.nan), dtype=float), bd.cells.shape)
        on = np.isfinite(v)
        Gb = boundary_conductance(conn, side, sigma)
        cur = np.where(on, Gb * (x[bd.cells] - np.where(on, v, 0.0)), 0.0)
        bcur[side] = cur
        # field along +axis at the boundary face
        bfield[side] = np.where(on, bd.outward * (x[bd.cells] - np.where(on, v, 0.0)) / bd.h, 0.0)
    E_cell = cell_field(mesh, conn, E_face, bfield)
    return PotentialField(psi=psi, E_face=E_face, E_cell=E_cell, G=G, boundary_current=bcur, residual=res)


def cell_field(mesh: Mesh, conn: Connectivity, E_face: np.ndarray, bfield: dict) -> np.ndarray:
    """Average the two face-normal components bracketing each cell."""
    n = len(conn.volume)
    acc = np.zeros((n, 2))
    for ax in (0, 1):
        m = conn.axis == ax
        acc[:, ax] = _scatter(conn.a[m], E_face[m], n) + _scatter(conn.b[m], E_face[m], n)
    for side, Eb in bfield.items():
        bd = conn.boundary[side]
        acc[:, bd.axis] += _scatter(bd.cells, Eb, n)
    # every cell has exactly two faces per axis (interior or boundary)
    return (0.5 * acc).reshape(mesh.shape + (2,))


def joule_source(sigma, E):
    """Power density sigma*|E|^2 (W/m^3) for colocated arrays; ``E`` may be
    a magnitude or carry vector components on its last axis of size 2."""
    E = np.asarray(E, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if E.ndim == sigma.ndim + 1:
        E2 = np.sum(E**2, axis=-1)
    else:
        E2 = E**2
    return sigma * E2


def joule_density(mesh: Mesh, sigma: np.ndarray, pot: PotentialField, dirichlet: dict) -> np.ndarray:
    """Cell Joule power density from face currents.

    Each face's dissipation is split between its two half-cells in proportion
    to their resistance, which makes the total equal to the terminal
    current times the applied voltage.
    """
    conn = connectivity(mesh)
    s = sigma.ravel()
    Ea_half = pot.G * np.abs(pot.E_face) * conn.dist / (conn.area * s[conn.a])
    Eb_half = pot.G * np.abs(pot.E_face) * conn.dist / (conn.area * s[conn.b])
    n = len(s)
    P = _scatter(conn.a, joule_source(s[conn.a], Ea_half) * conn.area * conn.ha, n)
    P += _scatter(conn.b, joule_source(s[conn.b], Eb_half) * conn.area * conn.hb, n)
    for side in SIDES:
        bd = conn.boundary[side]
        cur = pot.boundary_current[side]
        # I^2 R of the half cell next to the contact
        P += _scatter(bd.cells, cur**2 * bd.h / (s[bd.cells] * bd.area), n)
    return (P / conn.volume).reshape(mesh.shape)


def diffusion_step(mesh: Mesh, u_old: np.ndarray, coef: np.ndarray, capacity: np.ndarray,
                   source: np.ndarray, dt: float, dirichlet: dict) -> tuple[np.ndarray, float]:
    """One backward-Euler step of ``capacity du/dt - div(coef grad u) = source``.

    ``dt = inf`` gives the steady state.
    """
    conn = connectivity(mesh)
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = capacity.ravel() * conn.volume / dt if np.isfinite(dt) else np.zeros(len(conn.volume))
    rhs = m * u_old.ravel() + source.ravel() * conn.volume
    x, res = assemble_diffusion(conn, coef, dirichlet, diag=m, rhs=rhs).solve("heat")
    return x.reshape(mesh.shape), res


def bernoulli(x):
    """B(x) = x / (exp(x) - 1), evaluated without overflow or cancellation."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, np.minimum(x, 700.0))
    out = np.where(small, 1.0 - 0.5 * x, xs / np.expm1(xs))
    return np.where(x > 700.0, 0.0, out)


def sg_coefficients(D_face, w_face, dist):
    """Scharfetter-Gummel weights: flux a->b per unit area is
    ``ca * n_a - cb * n_b`` for diffusivity ``D`` and drift velocity ``w``."""
    P = w_face * dist / D_face
    ca = D_face / dist * bernoulli(-P)
    cb = D_face / dist * bernoulli(P)
    return ca, cb


def _banded_transport_solve(d, a, b, ca, cb, rhs, bw):
    """Banded LU for the transport matrix ``A[a,b] = -cb``, ``A[b,a] = -ca``."""
    n = len(d)
    ab = np.zeros((2 * bw + 1, n))
    ab[bw] = d
    ab[bw + a - b, b] = -cb
    ab[bw + b - a, a] = -ca
    try:
        x = solve_banded((bw, bw), ab, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"vacancy transport: factorisation failed ({exc})") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("vacancy transport: solution is not finite")
    r = d * x - _scatter(a, cb * x[b], n) - _scatter(b, ca * x[a], n) - rhs
    row_sum = d + _scatter(a, np.abs(cb), n) + _scatter(b, np.abs(ca), n)
    scale = np.linalg.norm(rhs) + np.max(row_sum) * np.linalg.norm(x)
    return x, float(np.linalg.norm(r) / max(scale, 1e-300))


def sg_transport_step(mesh: Mesh, n_old: np.ndarray, D_face: np.ndarray, w_face: np.ndarray,
                      dt: float, active: np.ndarray, source: np.ndarray | None = None
                      ) -> tuple[np.ndarray, float]:
    """Backward-Euler step of ``dn/dt + div(w n - D grad n) = source``.

    Only faces joining two active cells carry flux, so the active set sees
    zero-flux walls everywhere. Inactive cells keep their values.
    """
    conn = connectivity(mesh)
    act = active.ravel()
    cells = np.flatnonzero(act)
    local = np.full(len(act), -1)
    local[cells] = np.arange(len(cells))
    on = act[conn.a] & act[conn.b]
    a, b = local[conn.a[on]], local[conn.b[on]]
    ca, cb = sg_coefficients(D_face[on], w_face[on], conn.dist[on])
    ca = ca * conn.area[on]
    cb = cb * conn.area[on]

    n = len(cells)
    vol = conn.volume[cells]
    m = vol / dt if np.isfinite(dt) else np.zeros(n)
    d = m + _scatter(a, ca, n) + _scatter(b, cb, n)
    rhs = m * n_old.ravel()[cells]
    if source is not None:
        rhs = rhs + source.ravel()[cells] * vol
    bw = int(np.max(np.abs(b - a))) if a.size else 0
    if bw <= max(64, int(np.sqrt(n))):
        x, res = _banded_transport_solve(d, a, b, ca, cb, rhs, bw)
    else:
        rows = np.concatenate([np.arange(n), a, b])
        cols = np.concatenate([np.arange(n), b, a])
        vals = np.concatenate([d, -cb, -ca])
        A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        x, res = linear_solve(A, rhs, "vacancy transport")
    out = n_old.ravel().copy()
    out[cells] = x
    return out.reshape(mesh.shape), res
