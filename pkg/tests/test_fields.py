import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from difftomo.fields import (
    AcquisitionConfig,
    Dataset,
    Grid,
    RealField,
    SourceConfig,
    Trace,
    add_noise,
    centered_indices,
    grid_for_spacing,
    make_grid,
    psnr,
    receiver_positions,
)


def test_grid_nodes_small():
    g = make_grid(10.0, 4)
    assert np.array_equal(g.coords, [-10.0, -5.0, 0.0, 5.0])
    x1, x2 = g.mesh()
    assert x1[2, 2] == 0 and x2[2, 2] == 0
    # first axis runs along x2
    assert x2[0, 3] == -10.0 and x1[0, 3] == 5.0


def test_grid_spacing_of_reconstruction_grid():
    n = 240
    g = make_grid(n / (8 * math.sqrt(2)), n)
    assert g.h == pytest.approx(1 / (4 * math.sqrt(2)), rel=1e-14)
    assert g.h == pytest.approx(0.17678, abs=1e-5)


@pytest.mark.parametrize("r_s, n", [(10.0, 3), (10.0, 0), (10.0, -2), (0.0, 4), (-1.0, 4),
                                    (math.inf, 4)])
def test_grid_rejects_bad_parameters(r_s, n):
    with pytest.raises(ValueError):
        make_grid(r_s, n)


def test_grid_for_spacing_covers_and_is_even():
    g = grid_for_spacing(3.3, 0.1)
    assert g.n % 2 == 0 and g.half_width >= 3.3 and g.h <= 0.1 + 1e-15


def test_centered_indices():
    assert list(centered_indices(4)) == [-2, -1, 0, 1]


def test_window_mask_rejects_oversized_window():
    g = make_grid(5.0, 10)
    assert g.window_mask(None).all()
    assert g.window_mask(2.0).sum() == 9  # nodes -1, 0, 1 per axis
    with pytest.raises(ValueError):
        g.window_mask(10.5)


def test_fields_are_immutable_and_validated():
    g = make_grid(1.0, 4)
    f = RealField(g, np.zeros(16))
    assert f.values.shape == (4, 4)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0
    with pytest.raises(ValueError):
        RealField(g, np.zeros(15))
    with pytest.raises(ValueError):
        RealField(g, np.full((4, 4), np.nan))


def test_trace_requires_increasing_receivers():
    with pytest.raises(ValueError):
        Trace(np.array([0.0, 0.0, 1.0]), 1.0, np.zeros(3))
    with pytest.raises(ValueError):
        Trace(np.array([0.0, 1.0]), 1.0, np.zeros(3))


def test_receiver_grid_of_disk_experiments():
    x = receiver_positions(10.0, 200)
    assert x[0] == -10.0 and x[-1] == pytest.approx(9.9)
    assert np.allclose(np.diff(x), 0.1)


def test_acquisition_validation():
    acq = AcquisitionConfig(n_angles=40, wavenumbers=(2 * np.pi,), r_m=10, l_m=10, m=200)
    assert np.allclose(np.degrees(acq.angles[:3]), [0, 9, 18])
    assert len(acq.keys()) == 40
    for bad in (dict(n_angles=0), dict(wavenumbers=(-1.0,)), dict(m=199), dict(l_m=0.0)):
        kw = dict(n_angles=4, wavenumbers=(1.0,), r_m=1.0, l_m=1.0, m=4) | bad
        with pytest.raises(ValueError):
            AcquisitionConfig(**kw)
    with pytest.raises(ValueError):
        SourceConfig("line", distance=15.0)


def test_line_source_positions():
    p = SourceConfig("line", distance=15.0, half_length=22.0, count=441).positions()
    assert p.shape == (441, 2)
    assert np.allclose(np.diff(p[:, 0]), 0.1) and np.all(p[:, 1] == -15.0)


def test_dataset_needs_every_trace():
    acq = AcquisitionConfig(n_angles=2, wavenumbers=(1.0,), r_m=1.0, l_m=1.0, m=4)
    t = Trace(acq.receiver_x, 1.0, np.zeros(4))
    Dataset(acq, "total", {(0, 0): t, (1, 0): t})
    with pytest.raises(ValueError):
        Dataset(acq, "total", {(0, 0): t})
    with pytest.raises(ValueError):
        Dataset(acq, "weird", {(0, 0): t, (1, 0): t})


# -- PSNR ---------------------------------------------------------------------

def _field(values):
    values = np.asarray(values, dtype=float)
    return RealField(make_grid(1.0, values.shape[0]), values)


def test_psnr_examples():
    f = np.zeros((4, 4))
    f[1, 2] = 1.0
    assert psnr(_field(f), _field(f + 0.1)) == pytest.approx(20.0, abs=1e-12)
    f5 = 5 * f
    assert psnr(_field(f5), _field(f5 - 0.5)) == pytest.approx(20.0, abs=1e-12)
    with pytest.raises(ValueError, match="zero MSE"):
        psnr(_field(f), _field(f))


def test_psnr_window_restricts_the_mean():
    g = make_grid(2.0, 4)
    f = np.zeros((4, 4))
    f[2, 2] = 1.0
    err = np.zeros((4, 4))
    err[0, 0] = 1.0  # corner error, outside the 2x2-side window
    full = psnr(RealField(g, f), RealField(g, f + err))
    assert full == pytest.approx(10 * np.log10(16))
    assert psnr(RealField(g, f), RealField(g, f + err + 0.1), window=2.0) == pytest.approx(20.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10), st.integers(0, 2**31))
def test_psnr_depends_only_on_peak_and_mse(peak, seed):
    rng = np.random.default_rng(seed)
    f = rng.uniform(-1, 1, (6, 6))
    f = peak * f / np.max(np.abs(f))
    e = rng.standard_normal((6, 6))
    a = psnr(_field(f), _field(f + e))
    # moving the same errors to other nodes changes nothing
    b = psnr(_field(f), _field(f + np.roll(e, 3)))
    assert a == pytest.approx(b, rel=1e-12)
    expected = 10 * np.log10(peak**2 / np.mean(e**2))
    assert a == pytest.approx(expected, rel=1e-12)


# -- noise --------------------------------------------------------------------

def _trace(values):
    values = np.asarray(values, dtype=complex)
    return Trace(np.arange(values.size, dtype=float), 1.0, values)


def test_noise_vanishes_at_huge_snr():
    t = _trace(np.exp(1j * np.linspace(0, 3, 50)))
    out = add_noise(t, 300.0, 1)
    assert np.linalg.norm(out.values - t.values) <= 1e-10 * np.linalg.norm(t.values)


def test_noise_power_matches_snr():
    t = _trace(np.ones(1000))
    out = add_noise(t, 50.0, 1)
    p = np.mean(np.abs(out.values - t.values) ** 2)
    assert 0.5e-5 <= p <= 2.0e-5


def test_noise_is_seeded():
    t = _trace(np.ones(64))
    a, b, c = add_noise(t, 20, 7), add_noise(t, 20, 7), add_noise(t, 20, 8)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_noise_is_circular():
    t = _trace(np.ones(20000))
    n = add_noise(t, 0.0, (3, 1, 4)).values - 1.0
    assert np.var(n.real) == pytest.approx(0.5, rel=0.05)
    assert np.var(n.imag) == pytest.approx(0.5, rel=0.05)
    assert abs(np.mean(n.real * n.imag)) < 0.02


def test_noise_rejects_zero_trace():
    with pytest.raises(ValueError):
        add_noise(_trace(np.zeros(10)), 50.0, 1)
    with pytest.raises(ValueError):
        add_noise(_trace(np.ones(10)), math.inf, 1)
