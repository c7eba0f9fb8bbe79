"""Device stack geometry, structured finite-volume mesh and field state.

The device is simulated as a 2D (y, z) cross-section. ``y`` runs across the
device width, ``z`` runs up the layer stack from the bottom electrode. The
out-of-plane depth only enters as an extrusion factor on face areas and cell
volumes.

Fields are stored as ``(nz, ny)`` arrays; row ``k`` is a z-slice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Region",
    "OXIDE_REGIONS",
    "DeviceGeometry",
    "Resolution",
    "Mesh",
    "FieldState",
    "build_mesh",
    "uniform_mesh",
    "initial_state",
    "apply_nucleation_seed",
    "total_vacancies",
]


class Region(enum.IntEnum):
    BE = 0
    RESERVOIR = 1
    SWITCH = 2
    TE = 3
    CML = 4


OXIDE_REGIONS = (Region.RESERVOIR, Region.SWITCH)

# bottom to top
STACK_ORDER = (Region.BE, Region.RESERVOIR, Region.SWITCH, Region.TE, Region.CML)


@dataclass(frozen=True)
class DeviceGeometry:
    """Pd / TaOx / Ta2O5 / Pd / CML stack. Lengths in metres."""

    width_y: float = 40e-9
    depth_d: float = 20e-9
    t_BE: float = 35e-9
    t_reservoir: float = 30e-9
    t_switch: float = 5e-9
    t_TE: float = 50e-9
    t_CML: float = 10e-9

    def __post_init__(self):
        for name in ("width_y", "depth_d", "t_BE", "t_reservoir", "t_switch", "t_TE", "t_CML"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")

    def thickness(self, region: Region) -> float:
        return {
            Region.BE: self.t_BE,
            Region.RESERVOIR: self.t_reservoir,
            Region.SWITCH: self.t_switch,
            Region.TE: self.t_TE,
            Region.CML: self.t_CML,
        }[Region(region)]

    @property
    def total_height(self) -> float:
        return sum(self.thickness(r) for r in STACK_ORDER)

    def interface_z(self) -> float:
        """Height of the reservoir/switch interface above the stack bottom."""
        return self.t_BE + self.t_reservoir


@dataclass(frozen=True)
class Resolution:
    """Mesh resolution.

    The switch layer is meshed uniformly with ``dz_switch``. The other layers
    start at ``dz_switch * growth`` next to the switch layer and coarsen
    geometrically away from it up to ``dz_max``. Every layer gets at least
    ``min_cells`` rows.
    """

    dy: float = 1e-9
    dz_switch: float = 1e-9
    dz_max: float = 5e-9
    growth: float = 1.3
    min_cells: int = 2

    def __post_init__(self):
        for name in ("dy", "dz_switch", "dz_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"resolution {name} must be positive")
        if self.growth < 1.0:
            raise ValueError("growth factor must be >= 1")
        if self.min_cells < 2:
            raise ValueError("need at least 2 cells per layer")

    @classmethod
    def uniform(cls, h: float) -> "Resolution":
        return cls(dy=h, dz_switch=h, dz_max=h, growth=1.0)


def _graded_spacing(length, h_first, h_max, growth, min_cells):
    """Cell sizes growing from ``h_first`` (capped at ``h_max``) that tile
    ``length`` exactly after a final rescale."""
    sizes = []
    h = min(h_first, h_max)
    while sum(sizes) < length * (1 - 1e-9):
        sizes.append(h)
        h = min(h * growth, h_max)
    if len(sizes) > 1 and sum(sizes) - length > 0.5 * sizes[-1]:
        sizes.pop()
    if len(sizes) < min_cells:
        return np.full(min_cells, length / min_cells)
    sizes = np.asarray(sizes)
    return sizes * (length / sizes.sum())


@dataclass(frozen=True, eq=False)
class Mesh:
    """Structured rectilinear (y, z) finite-volume mesh.

    ``y_faces`` and ``z_faces`` are the cell edges; ``region`` holds the
    material tag of every cell, shape ``(nz, ny)``.
    """

    y_faces: np.ndarray
    z_faces: np.ndarray
    region: np.ndarray
    depth: float
    geometry: DeviceGeometry | None = None
    z_ref: float = 0.0
    y_ref: float = 0.0

    def __post_init__(self):
        if np.any(np.diff(self.y_faces) <= 0) or np.any(np.diff(self.z_faces) <= 0):
            raise ValueError("face coordinates must be strictly increasing")
        if self.region.shape != (len(self.z_faces) - 1, len(self.y_faces) - 1):
            raise ValueError("region array does not match mesh shape")
        if not self.depth > 0:
            raise ValueError("depth must be positive")
        for a in (self.y_faces, self.z_faces, self.region):
            a.setflags(write=False)
        object.__setattr__(self, "_masks", {})

    @property
    def ny(self) -> int:
        return len(self.y_faces) - 1

    @property
    def nz(self) -> int:
        return len(self.z_faces) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.ny)

    @property
    def size(self) -> int:
        return self.nz * self.ny

    @property
    def dy(self) -> np.ndarray:
        return np.diff(self.y_faces)

    @property
    def dz(self) -> np.ndarray:
        return np.diff(self.z_faces)

    @property
    def yc(self) -> np.ndarray:
        return 0.5 * (self.y_faces[1:] + self.y_faces[:-1])

    @property
    def zc(self) -> np.ndarray:
        return 0.5 * (self.z_faces[1:] + self.z_faces[:-1])

    @property
    def volume(self) -> np.ndarray:
        return np.outer(self.dz, self.dy) * self.depth

    @property
    def width(self) -> float:
        return float(self.y_faces[-1] - self.y_faces[0])

    @property
    def height(self) -> float:
        return float(self.z_faces[-1] - self.z_faces[0])

    def mask(self, *regions: Region) -> np.ndarray:
        key = tuple(sorted(int(r) for r in regions))
        m = self._masks.get(key)
        if m is None:
            m = np.isin(self.region, key)
            m.setflags(write=False)
            self._masks[key] = m
        return m

    @property
    def oxide(self) -> np.ndarray:
        return self.mask(*OXIDE_REGIONS)

    def rows(self, region: Region) -> np.ndarray:
        """Row indices whose cells are all tagged ``region``."""
        return np.flatnonzero(np.all(self.region == int(region), axis=1))

    def layer_volume(self, region: Region) -> float:
        return float(self.volume[self.mask(region)].sum())

    def region_bounds(self, region: Region) -> tuple[float, float]:
        rows = self.rows(region)
        return float(self.z_faces[rows[0]]), float(self.z_faces[rows[-1] + 1])


def build_mesh(geometry: DeviceGeometry, resolution: Resolution | None = None) -> Mesh:
    """Mesh the device stack with layer interfaces on cell faces.

    Coordinates are stored with ``z = 0`` at the bottom of the BE and
    ``y = 0`` at the left wall; ``z_ref``/``y_ref`` mark the reservoir/switch
    interface and the device centre for reporting.
    """
    res = resolution or Resolution()
    if res.dz_switch * 4 > geometry.t_switch * (1 + 1e-9):
        raise ValueError("switch layer needs at least 4 cells; decrease dz_switch")

    n_sw = max(4, int(round(geometry.t_switch / res.dz_switch)))
    sizes = {Region.SWITCH: np.full(n_sw, geometry.t_switch / n_sw)}
    h0 = geometry.t_switch / n_sw * res.growth
    for reg in (Region.RESERVOIR, Region.TE):
        sizes[reg] = _graded_spacing(geometry.thickness(reg), h0, res.dz_max, res.growth, res.min_cells)
    # reservoir grows downward away from the switch layer
    sizes[Region.RESERVOIR] = sizes[Region.RESERVOIR][::-1]
    h_be = sizes[Region.RESERVOIR][0] * res.growth
    sizes[Region.BE] = _graded_spacing(geometry.t_BE, h_be, res.dz_max, res.growth, res.min_cells)[::-1]
    h_cml = sizes[Region.TE][-1] * res.growth
    sizes[Region.CML] = _graded_spacing(geometry.t_CML, h_cml, res.dz_max, res.growth, res.min_cells)

    dz = np.concatenate([sizes[r] for r in STACK_ORDER])
    tags = np.concatenate([np.full(len(sizes[r]), int(r)) for r in STACK_ORDER])
    z_faces = np.concatenate([[0.0], np.cumsum(dz)])
    # snap layer interfaces to exact analytic positions
    edges = np.cumsum([0.0] + [geometry.thickness(r) for r in STACK_ORDER])
    counts = np.cumsum([0] + [len(sizes[r]) for r in STACK_ORDER])
    z_faces[counts] = edges

    ny = max(2, int(round(geometry.width_y / res.dy)))
    y_faces = np.linspace(0.0, geometry.width_y, ny + 1)
    region = np.repeat(tags[:, None], ny, axis=1).astype(np.int8)
    return Mesh(
        y_faces=y_faces,
        z_faces=z_faces,
        region=region,
        depth=geometry.depth_d,
        geometry=geometry,
        z_ref=geometry.interface_z(),
        y_ref=0.5 * geometry.width_y,
    )


def uniform_mesh(width: float, height: float, ny: int, nz: int, depth: float = 1.0,
                 region: Region = Region.RESERVOIR) -> Mesh:
    """Single-region uniform mesh, used by the verification problems."""
    if ny < 1 or nz < 1 or width <= 0 or height <= 0:
        raise ValueError("invalid uniform mesh specification")
    return Mesh(
        y_faces=np.linspace(0.0, width, ny + 1),
        z_faces=np.linspace(0.0, height, nz + 1),
        region=np.full((nz, ny), int(region), dtype=np.int8),
        depth=depth,
    )


@dataclass
class FieldState:
    """Unknowns of the coupled problem on a mesh.

    n_D in m^-3, T in K, psi in V, t in s.
    """

    n_D: np.ndarray
    T: np.ndarray
    psi: np.ndarray
    t: float = 0.0
    extras: dict = field(default_factory=dict)

    def copy(self) -> "FieldState":
        return replace(
            self,
            n_D=self.n_D.copy(),
            T=self.T.copy(),
            psi=self.psi.copy(),
            extras=dict(self.extras),
        )


def initial_state(mesh: Mesh, db) -> FieldState:
    """Pristine device: vacancy-rich reservoir under a nearly stoichiometric
    switching layer, everything at the ambient temperature."""
    n = np.zeros(mesh.shape)
    n[mesh.mask(Region.RESERVOIR)] = db.n_reservoir
    n[mesh.mask(Region.SWITCH)] = db.n_switch
    return FieldState(
        n_D=n,
        T=np.full(mesh.shape, db.T_initial),
        psi=np.zeros(mesh.shape),
        t=0.0,
    )


def apply_nucleation_seed(state: FieldState, mesh: Mesh, amplitude: float, width: float) -> FieldState:
    """Add a Gaussian vacancy bump centred on the device axis at the
    reservoir/switch interface. Returns a new state."""
    if amplitude == 0.0:
        return state.copy()
    if width <= 0:
        raise ValueError("seed width must be positive")
    Y, Z = np.meshgrid(mesh.yc - mesh.y_ref, mesh.zc - mesh.z_ref)
    bump = amplitude * np.exp(-(Y**2 + Z**2) / (2.0 * width**2))
    out = state.copy()
    out.n_D = np.where(mesh.oxide, out.n_D + bump, out.n_D)
    return out


def total_vacancies(state: FieldState, mesh: Mesh) -> float:
    """Number of vacancies held in the oxide cells."""
    return float(np.sum(state.n_D[mesh.oxide] * mesh.volume[mesh.oxide]))
