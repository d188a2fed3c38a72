import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from difftomo.fields import Grid, RealField
from difftomo.phantom import (Primitive, SceneSpec, disk_potential, phantom1, phantom2,
                              potential_to_speed, render_scene, rotate_potential,
                              rotation_matrix, speed_to_potential)

OMEGA = 2 * np.pi
GRID = Grid(10.0, 240)


def _const(value, grid=Grid(1.0, 4)):
    return RealField(grid, np.full(grid.shape, float(value)))


def _at(fld, x1, x2):
    g = fld.grid
    i1 = int(round(x1 / g.h)) + g.n // 2
    i2 = int(round(x2 / g.h)) + g.n // 2
    return fld.values[i2, i1]


def test_disk_values():
    f = disk_potential(4.5, 1.0, GRID)
    assert _at(f, 0, 0) == 1.0
    assert _at(f, 5, 5) == 0.0
    assert _at(disk_potential(2.0, 5.0, GRID), 0, 0) == 5.0
    assert not np.any(disk_potential(1.0, 0.0, GRID).values)


def test_disk_rejects_bad_radius():
    with pytest.raises(ValueError):
        disk_potential(0.0, 1.0, GRID)
    with pytest.raises(ValueError):
        disk_potential(12.0, 1.0, GRID)


@pytest.mark.parametrize("f, c", [(5.0, 0.9421), (-5.0, 1.0701)])
def test_speed_from_potential_matches_published_values(f, c):
    assert potential_to_speed(_const(f), OMEGA, 1.0).values[0, 0] == pytest.approx(c, abs=5e-5)


def test_potential_from_published_speed():
    assert speed_to_potential(_const(0.9876), OMEGA, 1.0).values[0, 0] == pytest.approx(1.0, abs=0.01)


def test_zero_contrast_is_background():
    np.testing.assert_allclose(potential_to_speed(_const(0.0), OMEGA, 1.5).values, 1.5, rtol=1e-15)
    np.testing.assert_allclose(speed_to_potential(_const(1.5), OMEGA, 1.5).values, 0.0, atol=1e-13)


def test_evanescent_medium_rejected():
    with pytest.raises(ValueError):
        potential_to_speed(_const(-OMEGA**2 - 1), OMEGA, 1.0)
    with pytest.raises(ValueError):
        speed_to_potential(_const(-1.0), OMEGA, 1.0)


@given(st.floats(-30, 30), st.floats(0.5, 3.0), st.floats(0.5, 2.0))
def test_speed_potential_round_trip(f, omega, c0):
    k0 = omega / c0
    if k0**2 + f <= 1e-3:
        return
    back = speed_to_potential(potential_to_speed(_const(f), omega, c0), omega, c0)
    assert back.values[0, 0] == pytest.approx(f, rel=1e-12, abs=1e-12 * k0**2)


def test_render_scene_overwrite_and_consistency():
    assert not np.any(render_scene(SceneSpec(()), GRID).values)
    single = SceneSpec((Primitive("disk", 0.7, radius=3.0),))
    np.testing.assert_array_equal(render_scene(single, GRID).values,
                                  disk_potential(3.0, 0.7, GRID).values)
    spec = SceneSpec((Primitive("ellipse", 0.25, semi_axes=(4.5, 3.5)),
                      Primitive("heart", 0.5, center=(1.0, 0.0), scale=2.0)))
    f = render_scene(spec, GRID)
    assert _at(f, 1.0, 0.0) == 0.5
    assert _at(f, -3.0, 0.0) == 0.25


@pytest.mark.parametrize("spec", [phantom1(), phantom1(2.0), phantom2()])
def test_phantoms_inside_support(spec):
    spec.validate(r_m=6.0)
    f = render_scene(spec, GRID)
    x1, x2 = GRID.mesh()
    assert not np.any(f.values[np.hypot(x1, x2) > spec.extent() + GRID.h])
    assert f.values.max() == max(p.amplitude for p in spec.primitives)


def test_phantom1_layout():
    f = render_scene(phantom1(), GRID)
    assert _at(f, 0.0, 3.0) == 0.25
    assert _at(f, -2.0, 0.6) == 0.5
    assert _at(f, 1.6, -0.9) == 0.5
    assert _at(f, 0.0, 4.0) == 0.0
    assert _at(render_scene(phantom1(2.0), GRID), 1.6, -0.9) == 2.0


def test_scene_rejects_outside_support():
    with pytest.raises(ValueError):
        SceneSpec((Primitive("disk", 1.0, center=(5.0, 0.0), radius=1.5),)).validate(r_m=6.0)


def test_scene_json_round_trip(tmp_path):
    spec = phantom2()
    spec.save(tmp_path / "s.json")
    assert SceneSpec.load(tmp_path / "s.json") == spec


def test_rotation_identity():
    f = render_scene(phantom1(), GRID)
    np.testing.assert_array_equal(rotate_potential(f, 0.0).values, f.values)


def test_rotate_square_quarter_turn():
    g = Grid(4.0, 16)
    x1, x2 = g.mesh()
    sq = RealField(g, ((np.abs(x1 - 2) <= 0.5) & (np.abs(x2) <= 0.5)).astype(float))
    out = rotate_potential(sq, np.pi / 2)
    # f(R x) with R the counter-clockwise quarter turn moves (2, 0) to (0, -2)
    expect = ((np.abs(x1) <= 0.5) & (np.abs(x2 + 2) <= 0.5)).astype(float)
    np.testing.assert_allclose(out.values, expect, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_rotated_disk_interior_exact(alpha):
    g = Grid(5.0, 64)
    f = disk_potential(2.0, 1.0, g)
    out = rotate_potential(f, alpha)
    r = np.hypot(*g.mesh())
    interior = r < 2.0 - 1.5 * g.h
    exterior = r > 2.0 + 1.5 * g.h
    assert np.all(out.values[interior] == pytest.approx(1.0, abs=1e-12))
    assert np.all(np.abs(out.values[exterior]) < 1e-12)
    assert np.all(np.abs(out.values) <= 1.0 + 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_rotation_round_trip_smooth(alpha):
    g = Grid(5.0, 96)
    x1, x2 = g.mesh()
    f = RealField(g, np.exp(-(x1**2 + (x2 - 0.5) ** 2)))
    back = rotate_potential(rotate_potential(f, alpha), -alpha)
    inner = np.hypot(x1, x2) < 3.0
    # bilinear interpolation error is O(h^2 |f''|)
    assert np.max(np.abs(back.values - f.values)[inner]) < 2 * g.h**2


def test_rotation_matrix_adjoint():
    g = Grid(3.0, 20)
    rng = np.random.default_rng(4)
    m = rotation_matrix(g, 0.7)
    a, b = rng.standard_normal((2, g.size))
    assert b @ (m @ a) == pytest.approx((m.T @ b) @ a, rel=1e-12)
