import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rramfv.materials import MaterialDB
from rramfv.mesh import (
    DeviceGeometry,
    Region,
    Resolution,
    apply_nucleation_seed,
    build_mesh,
    initial_state,
    total_vacancies,
    uniform_mesh,
)


def test_default_stack_height():
    g = DeviceGeometry()
    assert g.total_height == pytest.approx(130e-9, rel=1e-15)
    m = build_mesh(g)
    assert m.height == pytest.approx(130e-9, rel=1e-14)


def test_switch_layer_has_five_rows_at_1nm(default_mesh):
    rows = default_mesh.rows(Region.SWITCH)
    assert len(rows) == 5
    np.testing.assert_allclose(default_mesh.dz[rows], 1e-9, rtol=1e-12)


def test_switch_layer_is_finest(default_mesh):
    m = default_mesh
    assert m.dz[m.rows(Region.SWITCH)].max() <= m.dz.min() * (1 + 1e-12)


def test_volumes_partition_domain(default_mesh):
    m, g = default_mesh, DeviceGeometry()
    total = g.width_y * g.depth_d * g.total_height
    assert abs(m.volume.sum() - total) / total < 1e-12
    for reg in Region:
        exact = g.width_y * g.depth_d * g.thickness(reg)
        assert abs(m.layer_volume(reg) - exact) / exact < 1e-12


def test_interfaces_on_faces(default_mesh):
    m, g = default_mesh, DeviceGeometry()
    edges = np.cumsum([0.0] + [g.thickness(r) for r in (Region.BE, Region.RESERVOIR, Region.SWITCH,
                                                        Region.TE, Region.CML)])
    for e in edges:
        assert np.min(np.abs(m.z_faces - e)) < 1e-20
    # every row belongs to a single region
    assert np.all(m.region == m.region[:, :1])


def test_every_layer_has_two_cells():
    m = build_mesh(DeviceGeometry(), Resolution(dy=10e-9, dz_switch=1.25e-9, dz_max=50e-9, growth=3.0))
    for reg in Region:
        assert len(m.rows(reg)) >= 2
    assert len(m.rows(Region.SWITCH)) >= 4


@pytest.mark.parametrize("kw", [dict(t_switch=0.0), dict(width_y=-1e-9), dict(t_CML=-5e-9)])
def test_rejects_bad_geometry(kw):
    with pytest.raises(ValueError):
        DeviceGeometry(**kw)


def test_rejects_coarse_switch_layer():
    with pytest.raises(ValueError):
        build_mesh(DeviceGeometry(), Resolution(dz_switch=2e-9))


@pytest.mark.parametrize("kw", [dict(dy=0.0), dict(dz_max=-1.0), dict(growth=0.5), dict(min_cells=1)])
def test_rejects_bad_resolution(kw):
    with pytest.raises(ValueError):
        Resolution(**kw)


def test_initial_state_values(default_mesh):
    db = MaterialDB()
    s = initial_state(default_mesh, db)
    m = default_mesh
    assert np.all(s.n_D[m.mask(Region.RESERVOIR)] == 1e28)
    assert np.all(s.n_D[m.mask(Region.SWITCH)] == 1e22)
    assert np.all(s.n_D[m.mask(Region.BE, Region.TE, Region.CML)] == 0.0)
    assert np.all(s.T == 300.0)
    assert np.all(s.psi == 0.0) and s.t == 0.0


def test_initial_state_deterministic(default_mesh):
    db = MaterialDB()
    a, b = initial_state(default_mesh, db), initial_state(default_mesh, db)
    assert a.n_D.tobytes() == b.n_D.tobytes() and a.T.tobytes() == b.T.tobytes()


def test_total_vacancies_reservoir_block():
    m = uniform_mesh(40e-9, 30e-9, 8, 6, depth=20e-9)
    s = initial_state(m, MaterialDB())
    assert total_vacancies(s, m) == pytest.approx(2.4e5, rel=1e-12)
    s.n_D[:] = 0.0
    assert total_vacancies(s, m) == 0.0


def test_reservoir_dominates_switch(default_mesh):
    m = default_mesh
    s = initial_state(m, MaterialDB())
    v = m.volume
    res = np.sum(s.n_D[m.mask(Region.RESERVOIR)] * v[m.mask(Region.RESERVOIR)])
    sw = np.sum(s.n_D[m.mask(Region.SWITCH)] * v[m.mask(Region.SWITCH)])
    # (1e28 * 30 nm) / (1e22 * 5 nm)
    assert res / sw == pytest.approx(6e6, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.just(0.0) | st.floats(1e-100, 1e29))
def test_total_vacancies_linear(scale):
    m = uniform_mesh(1e-8, 1e-8, 3, 3, depth=1e-8)
    s = initial_state(m, MaterialDB())
    s.n_D[:] = scale
    a = total_vacancies(s, m)
    s.n_D *= 2.0
    assert total_vacancies(s, m) == 2.0 * a


def test_seed_centred_on_interface(default_mesh):
    m = default_mesh
    s = apply_nucleation_seed(initial_state(m, MaterialDB()), m, 5e26, 2e-9)
    bump = s.n_D - initial_state(m, MaterialDB()).n_D
    k, j = np.unravel_index(np.argmax(bump), bump.shape)
    assert abs(m.yc[j] - m.y_ref) <= m.dy[j]
    assert abs(m.zc[k] - m.z_ref) <= m.dz[k]
    assert np.all(bump[~m.oxide] == 0.0)
    np.testing.assert_allclose(s.n_D, s.n_D[:, ::-1], rtol=1e-12)
