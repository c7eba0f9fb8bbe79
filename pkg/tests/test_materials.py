"""Constitutive laws against hand evaluations."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rramfv.materials import (
    K_B_EV,
    MaterialDB,
    activation_energy,
    diffusivity,
    drift_velocity,
    pf_term,
    sigma_oxide,
    sigma_prefactor,
    soret_coefficient,
    thermal_conductivity,
)

DB = MaterialDB()
KT300 = K_B_EV * 300.0


def test_prefactor_endpoints():
    assert sigma_prefactor(1e28, DB) == pytest.approx(9.5e4)
    assert sigma_prefactor(0.0, DB) == pytest.approx(1e3)
    assert sigma_prefactor(5e27, DB.with_overrides(K1=18.8)) == pytest.approx(9.5e4)


def test_prefactor_saturates_above_nmax():
    assert sigma_prefactor(3e28, DB) == sigma_prefactor(1e28, DB)


def test_activation_energy_points():
    assert activation_energy(0.0, DB) == pytest.approx(0.05)
    assert activation_energy(1e28, DB) == pytest.approx(-0.006)
    assert activation_energy(2.5e27, DB) == pytest.approx(0.022)
    assert activation_energy(5e27, DB) == pytest.approx(-0.006)


@pytest.mark.parametrize("fn", [sigma_prefactor, activation_energy])
def test_negative_density_rejected(fn):
    with pytest.raises(ValueError):
        fn(-1.0, DB)


def test_pf_term_values():
    assert pf_term(0.0, 300.0, DB) == 0.0
    raw = math.exp(293 / 300) * (5.48e-4 * math.sqrt(4e8) - 5.7)
    assert pf_term(4e8, 300.0, DB) == pytest.approx(raw, rel=1e-12)
    assert raw == pytest.approx(13.97, rel=2e-3)
    root = (5.7 / 5.48e-4) ** 2
    assert pf_term(root, 300.0, DB) == pytest.approx(0.0, abs=1e-12)


def test_sigma_oxide_values():
    hi = 9.5e4 * math.exp(0.006 / KT300)
    assert sigma_oxide(1e28, 300.0, 0.0, DB) == pytest.approx(hi, rel=1e-12)
    assert hi == pytest.approx(1.20e5, rel=5e-3)
    lo = 1e3 * math.exp(-0.05 / KT300)
    assert sigma_oxide(0.0, 300.0, 0.0, DB) == pytest.approx(lo, rel=1e-12)
    assert lo == pytest.approx(144.6, rel=1e-3)


def test_sigma_tends_to_prefactor_at_high_T():
    T = np.array([300.0, 1e3, 1e4, 1e6])
    s = sigma_oxide(0.0, T, 0.0, DB)
    assert np.all(np.diff(s) > 0)
    assert s[-1] == pytest.approx(1e3, rel=1e-3)


def test_thermal_conductivity_values():
    assert thermal_conductivity(0.0, 293.0, DB) == pytest.approx(0.12)
    assert thermal_conductivity(1e28, 293.0, DB) == pytest.approx(57.62)
    assert thermal_conductivity(0.0, 393.0, DB) == pytest.approx(1.32)


def test_diffusivity_values():
    assert diffusivity(300.0, DB) == pytest.approx(2.69e-22, rel=5e-3)
    assert diffusivity(600.0, DB) == pytest.approx(3.71e-15, rel=5e-3)
    assert diffusivity(600.0, DB) / diffusivity(300.0, DB) > 1e6


def test_drift_velocity_example():
    kT = K_B_EV * 500.0
    arg = 3.2e-10 * 1e8 / kT
    assert arg == pytest.approx(0.7427, rel=1e-3)
    v = 3.2e-10 * 1e12 * math.exp(-0.85 / kT) * math.sinh(arg)
    assert abs(drift_velocity(1e8, 500.0, DB)) == pytest.approx(v, rel=1e-12)
    assert v == pytest.approx(7.1e-7, rel=2e-2)


def test_drift_follows_field():
    assert drift_velocity(1e8, 500.0, DB) > 0
    assert drift_velocity(0.0, 500.0, DB) == 0.0


def test_drift_overflow_guard():
    v = drift_velocity(np.array([1e13, -1e13]), 300.0, DB)
    assert np.all(np.isfinite(v)) and v[0] == -v[1]


def test_drift_small_field_limit():
    T = 400.0
    slope = 3.2e-10 * 1e12 * math.exp(-0.85 / (K_B_EV * T)) * 3.2e-10 / (K_B_EV * T)
    for E in (1e2, 1e0):
        assert drift_velocity(E, T, DB) / E == pytest.approx(slope, rel=1e-8)


def test_soret_values():
    assert soret_coefficient(300.0, DB) == pytest.approx(-0.1096, rel=1e-3)
    assert soret_coefficient(600.0, DB) == pytest.approx(-0.0274, rel=2e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(50.0, 5000.0))
def test_soret_scaling(T):
    assert soret_coefficient(2 * T, DB) / soret_coefficient(T, DB) == pytest.approx(0.25, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e10, 1e10), st.floats(200.0, 2000.0))
def test_drift_odd(E, T):
    assert drift_velocity(-E, T, DB) == -drift_velocity(E, T, DB)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 3e28), st.floats(1.0, 5000.0), st.floats(0.0, 1e10))
def test_positivity(n, T, E):
    assert sigma_oxide(n, T, E, DB) > 0
    assert thermal_conductivity(n, T, DB) > 0


@settings(max_examples=50, deadline=None)
@given(st.floats(200.0, 1500.0), st.floats(0.0, 1e9))
def test_monotone_in_T(T, E):
    assert diffusivity(T * 1.01, DB) > diffusivity(T, DB)
    assert abs(drift_velocity(E, T * 1.01, DB)) >= abs(drift_velocity(E, T, DB))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1e10), st.floats(0.0, 1e10), st.floats(200.0, 2000.0))
def test_pf_monotone_in_E(E1, E2, T):
    lo, hi = sorted((E1, E2))
    assert pf_term(hi, T, DB) >= pf_term(lo, T, DB)


def test_continuity_at_breakpoints():
    eps = 1e18
    a = activation_energy(np.array([5e27 - eps, 5e27 + eps]), DB)
    assert abs(a[0] - a[1]) < 1e-10
    s = sigma_prefactor(np.array([1e28 - eps, 1e28 + eps]), DB)
    assert abs(s[0] - s[1]) / s[0] < 1e-9


@pytest.mark.parametrize("kw", [dict(a=0.0), dict(E_AC_low=-0.01), dict(n_threshold=2e28), dict(K1=-1.0)])
def test_db_validation(kw):
    with pytest.raises(ValueError):
        MaterialDB(**kw)
