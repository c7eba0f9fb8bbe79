"""Constitutive laws of the Ta2O5 / TaOx bilayer.

All functions are vectorised over numpy arrays and pure. Energies are in eV,
so Arrhenius factors use ``k_B`` in eV/K; everything else is SI.

The oxide conductivity and thermal conductivity are linear in the local
vacancy density with slopes ``K1`` and ``K2``. The scale factors
``K1_scale``/``K2_scale`` map the slope parameters onto the density-saturated
end points (``K1 = 9.4`` gives a 9.4e4 S/m prefactor increase, ``K2 = 5.75``
gives 57.5 W/m/K, the value of metallic Ta).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

K_B_EV = 8.617333262e-5  # eV/K
Q_E = 1.602176634e-19  # C

SINH_ARG_MAX = 50.0
K_BRACKET_MIN = 1e-2


@dataclass(frozen=True)
class MaterialDB:
    # vacancy hopping
    a: float = 3.2e-10
    f: float = 1e12
    E_a: float = 0.85
    # thermal conductivity of the insulating oxide
    lam: float = 0.1
    T0: float = 293.0
    k_floor: float = 0.12
    # Poole-Frenkel coefficients, field in V/m
    alpha: float = 5.48e-4
    beta: float = -5.7
    T_pf: float = 293.0
    k_B: float = K_B_EV
    q: float = Q_E
    # density dependence
    K1: float = 9.4
    K2: float = 5.75
    K1_scale: float = 1e4
    K2_scale: float = 10.0
    n_max: float = 1e28
    n_threshold: float = 5e27
    sigma_floor: float = 1e3
    E_AC_high: float = -0.006
    E_AC_low: float = 0.05
    # Pd electrodes
    sigma_Pd: float = 1e7
    k_Pd: float = 71.8
    rho_Pd: float = 11900.0
    cp_Pd: float = 50.0
    # oxides
    rho_ox: float = 8200.0
    cp_ox: float = 25.0
    # current modulation layer: electrical base value plus Pd-like heat transport
    I_CC_sigma: float = 1e5
    k_CML: float = 71.8
    rho_CML: float = 11900.0
    cp_CML: float = 50.0
    # pristine device
    n_reservoir: float = 1e28
    n_switch: float = 1e22
    T_initial: float = 300.0

    def __post_init__(self):
        for name in ("a", "f", "E_a", "lam", "sigma_floor", "k_floor", "n_max", "T0",
                     "sigma_Pd", "k_Pd", "rho_Pd", "cp_Pd", "rho_ox", "cp_ox",
                     "I_CC_sigma", "k_CML", "rho_CML", "cp_CML", "T_initial", "k_B", "q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"material parameter {name} must be positive")
        if not self.E_AC_low > self.E_AC_high:
            raise ValueError("E_AC_low must exceed E_AC_high")
        if not 0 < self.n_threshold < self.n_max:
            raise ValueError("need 0 < n_threshold < n_max")
        if self.K1 < 0 or self.K2 < 0:
            raise ValueError("K1 and K2 must be non-negative")
        if self.n_reservoir < 0 or self.n_switch < 0:
            raise ValueError("initial densities must be non-negative")

    def with_overrides(self, **kw) -> "MaterialDB":
        return replace(self, **kw)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _check_density(n_D):
    n = np.asarray(n_D, dtype=float)
    if np.any(n < 0):
        raise ValueError("vacancy density must be non-negative")
    return n


def _fill(n_D, db):
    return np.minimum(n_D / db.n_max, 1.0)


def sigma_prefactor(n_D, db: MaterialDB):
    """Conductivity prefactor sigma_0(n_D), S/m."""
    n = _check_density(n_D)
    return db.sigma_floor + db.K1_scale * db.K1 * _fill(n, db)


def activation_energy(n_D, db: MaterialDB):
    """Conduction activation energy, eV. Linear below the pinning
    threshold, constant above it."""
    n = _check_density(n_D)
    frac = np.minimum(n / db.n_threshold, 1.0)
    return db.E_AC_low + (db.E_AC_high - db.E_AC_low) * frac


def pf_term(E, T, db: MaterialDB):
    """Poole-Frenkel contribution, clamped at zero below the field where
    alpha*sqrt(E) + beta changes sign."""
    E = np.asarray(E, dtype=float)
    raw = np.exp(db.T_pf / np.asarray(T, dtype=float)) * (db.alpha * np.sqrt(np.maximum(E, 0.0)) + db.beta)
    return np.maximum(raw, 0.0)


def sigma_oxide(n_D, T, E, db: MaterialDB):
    T = np.asarray(T, dtype=float)
    arr = sigma_prefactor(n_D, db) * np.exp(-activation_energy(n_D, db) / (db.k_B * T))
    return arr + pf_term(E, T, db)


def thermal_conductivity(n_D, T, db: MaterialDB):
    """Oxide thermal conductivity, W/m/K. Only the insulating floor carries
    the linear temperature coefficient; its bracket is kept positive for
    temperatures far below ``T0``."""
    n = _check_density(n_D)
    T = np.asarray(T, dtype=float)
    bracket = np.maximum(1.0 + db.lam * (T - db.T0), K_BRACKET_MIN)
    return db.k_floor * bracket + db.K2_scale * db.K2 * _fill(n, db)


def _hop_rate(T, db):
    return db.f * np.exp(-db.E_a / (db.k_B * np.asarray(T, dtype=float)))


def diffusivity(T, db: MaterialDB):
    return 0.5 * db.a**2 * _hop_rate(T, db)


def drift_velocity(E, T, db: MaterialDB):
    """Vacancy drift velocity along a field component ``E`` (V/m).

    ``E`` is the electric field (minus the potential gradient); positive
    vacancies move with it, so the result has the sign of ``E``.
    """
    T = np.asarray(T, dtype=float)
    arg = db.a * np.asarray(E, dtype=float) / (db.k_B * T)
    arg = np.clip(arg, -SINH_ARG_MAX, SINH_ARG_MAX)
    return db.a * _hop_rate(T, db) * np.sinh(arg)


def soret_coefficient(T, db: MaterialDB):
    T = np.asarray(T, dtype=float)
    return -db.E_a / (db.k_B * T**2)
