import pytest
from hypothesis import given, settings, strategies as st

from rramfv.compliance import ComplianceConfig, cml_conductance
from rramfv.mesh import DeviceGeometry

DIMS = (40e-9, 20e-9, 10e-9)


def test_emax_value():
    assert ComplianceConfig().E_max == pytest.approx(6.25e6, rel=1e-12)


def test_limiting_branch_value():
    assert cml_conductance(500e-6, -1.0, 0.0, DIMS, 1e5) == pytest.approx(6250.0, rel=1e-12)


def test_switchover_continuity():
    drop = 6.25e6 * 10e-9
    assert cml_conductance(500e-6, drop, 0.0, DIMS, 1e5) == pytest.approx(1e5, rel=1e-12)
    assert cml_conductance(500e-6, drop * (1 + 1e-9), 0.0, DIMS, 1e5) == pytest.approx(1e5, rel=1e-8)


def test_zero_drop_returns_base():
    assert cml_conductance(500e-6, 0.3, 0.3, DIMS, 1e5) == 1e5


def test_for_geometry_dimensions():
    cc = ComplianceConfig.for_geometry(DeviceGeometry())
    assert (cc.w, cc.d, cc.h) == DIMS


@pytest.mark.parametrize("kw", [dict(I_CC=0.0), dict(h=-1.0), dict(I_CC_sigma=0.0)])
def test_rejects_nonpositive(kw):
    with pytest.raises(ValueError):
        ComplianceConfig(**kw)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.07, 10.0))
def test_doubling_icc_doubles_limit(drop):
    a = cml_conductance(500e-6, drop, 0.0, DIMS, 1e5)
    b = cml_conductance(1000e-6, drop, 0.0, DIMS, 1e5)
    if drop / 10e-9 > 2 * 6.25e6:
        assert b == 2 * a


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 5.0))
def test_current_never_exceeds_icc(drop):
    s = cml_conductance(500e-6, drop, 0.0, DIMS, 1e5)
    assert s <= 1e5
    I = s * 40e-9 * 20e-9 * drop / 10e-9
    assert I <= 500e-6 * (1 + 1e-12)
