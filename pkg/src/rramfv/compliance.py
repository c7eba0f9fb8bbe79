"""Current-modulation layer (CML) that enforces the compliance current."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ComplianceConfig:
    """Compliance settings. ``active = False`` pins the CML at its base
    conductivity, which is how reset pulses and read-outs are run."""

    I_CC: float = 500e-6
    I_CC_sigma: float = 1e5
    w: float = 40e-9
    d: float = 20e-9
    h: float = 10e-9
    active: bool = True

    def __post_init__(self):
        for name in ("I_CC", "I_CC_sigma", "w", "d", "h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"compliance parameter {name} must be positive")

    @classmethod
    def for_geometry(cls, geometry, **kw) -> "ComplianceConfig":
        return cls(w=geometry.width_y, d=geometry.depth_d, h=geometry.t_CML, **kw)

    @property
    def E_max(self) -> float:
        return self.I_CC / (self.I_CC_sigma * self.w * self.d)

    @property
    def base_resistance(self) -> float:
        return self.h / (self.I_CC_sigma * self.w * self.d)


def cml_conductance(I_CC, V1, V2, dims, I_CC_sigma):
    """CML conductivity (S/m) for a CML drop ``|V1 - V2|``.

    Below the critical field the layer keeps its base conductivity; above
    it the conductivity is lowered so the layer passes exactly ``I_CC``.
    ``dims`` is ``(w, d, h)``.
    """
    w, d, h = dims
    drop = abs(V1 - V2)
    E_cml = drop / h
    E_max = I_CC / (I_CC_sigma * w * d)
    if drop == 0.0 or E_cml <= E_max:
        return I_CC_sigma
    return I_CC * h / (drop * w * d)
