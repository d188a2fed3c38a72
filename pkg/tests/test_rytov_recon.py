import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from difftomo.fields import AcquisitionConfig, Dataset, Trace, psnr, receiver_positions
from difftomo.helmholtz import forward_dataset, simulation_grid
from difftomo.phantom import disk_potential, potential_to_speed
from difftomo.recon import born_equivalent, calibrated, reconstruct, reconstruction_grid
from difftomo.rytov import rytov_dataset, rytov_to_born, unwrap_1d

K0 = 2 * np.pi


def test_unwrap_examples():
    np.testing.assert_allclose(unwrap_1d([0, 3.0, 6.2]), [0, 3.0, 6.2 - 2 * np.pi])
    assert unwrap_1d([0, 3.0, 6.2])[2] == pytest.approx(-0.0832, abs=1e-4)
    smooth = np.linspace(-1, 1, 11)
    np.testing.assert_array_equal(unwrap_1d(smooth), smooth)
    np.testing.assert_array_equal(unwrap_1d(np.full(5, 2.5)), np.full(5, 2.5))
    with pytest.raises(ValueError):
        unwrap_1d([])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40))
def test_unwrap_properties(phases):
    out = unwrap_1d(phases)
    assert out[0] == phases[0]
    d = np.diff(out)
    assert np.all((d > -np.pi - 1e-9) & (d <= np.pi + 1e-9))
    # only multiples of 2 pi are added
    k = (out - np.asarray(phases)) / (2 * np.pi)
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)


def _trace(values):
    return Trace(receiver_positions(5.0, len(values)), 5.0, values)


def test_rytov_identity_and_errors():
    inc = _trace(np.exp(1j * np.linspace(0, 3, 20)))
    np.testing.assert_allclose(rytov_to_born(inc, inc).values, 0.0, atol=1e-15)
    with pytest.raises(ValueError):
        rytov_to_born(inc, inc.with_values(np.zeros(20)))
    with pytest.raises(ValueError):
        rytov_to_born(inc.with_values(np.zeros(20)), inc)
    with pytest.raises(ValueError):
        rytov_to_born(_trace(np.ones(10)), inc)


def test_rytov_phase_crossing_branch_cut_stays_continuous():
    x = np.linspace(0, 1, 64)
    inc = _trace(np.ones(64, complex))
    # phase ramps through +-pi twice
    tot = _trace(np.exp(1j * 4 * np.pi * x))
    out = rytov_to_born(tot, inc).values
    assert np.max(np.abs(np.diff(out.imag))) < np.pi
    np.testing.assert_allclose(out.imag, 4 * np.pi * x, atol=1e-12)


@pytest.fixture(scope="module")
def weak_disk_data():
    acq = AcquisitionConfig(n_angles=8, wavenumbers=(K0,), r_m=5.0, l_m=5.0, m=100)
    grid = simulation_grid(acq, ppw=11)
    speed = potential_to_speed(disk_potential(1.5, 0.1, grid), K0, 1.0)
    return forward_dataset(speed, acq)


def test_rytov_of_weak_scattering_approximates_scattered_field():
    acq = AcquisitionConfig(n_angles=2, wavenumbers=(K0,), r_m=5.0, l_m=5.0, m=100)
    grid = simulation_grid(acq, ppw=11)
    sim = forward_dataset(potential_to_speed(disk_potential(1.5, 0.01, grid), K0, 1.0), acq)
    ryt = rytov_dataset(sim.total, sim.incident)
    for key in sim.total.traces:
        sca = sim.scattered[key].values
        ratio = np.max(np.abs(sca / sim.incident[key].values))
        rel = np.linalg.norm(ryt[key].values - sca) / np.linalg.norm(sca)
        assert rel <= 2 * ratio


def test_born_equivalent_dispatch(weak_disk_data):
    sim = weak_disk_data
    assert born_equivalent("born", scattered=sim.scattered) is sim.scattered
    r = born_equivalent("rytov", total=sim.total, incident=sim.incident)
    assert r.kind == "born-equivalent"
    with pytest.raises(ValueError):
        born_equivalent("born")
    with pytest.raises(ValueError):
        born_equivalent("rytov", total=sim.total)
    with pytest.raises(ValueError):
        born_equivalent("radon", scattered=sim.scattered)


def test_calibration_scales_both_rytov_inputs(weak_disk_data):
    sim = weak_disk_data
    cal = {key: 0.5 * np.exp(0.3j) for key in sim.total.traces}
    scaled = calibrated(sim.total, cal)
    key = next(iter(sim.total.traces))
    np.testing.assert_allclose(scaled[key].values, cal[key] * sim.total[key].values)
    # a common scale cancels in the ratio and only rescales the prefactor
    a = born_equivalent("rytov", total=sim.total, incident=sim.incident)
    b = born_equivalent("rytov", total=sim.total, incident=sim.incident, calibration=cal)
    np.testing.assert_allclose(b[key].values, cal[key] * a[key].values, rtol=1e-12)
    assert calibrated(sim.total, None) is sim.total


def test_reconstruction_grid_default():
    g = reconstruction_grid()
    assert g.n == 240
    assert g.h == pytest.approx(1 / (8 * np.sqrt(2)))
    assert reconstruction_grid(64, 5.0).half_width == 5.0


def test_born_and_rytov_agree_at_low_contrast(weak_disk_data):
    sim = weak_disk_data
    grid = reconstruction_grid(96, 6.0)
    truth = disk_potential(1.5, 0.1, grid)
    rec = {m: reconstruct(born_equivalent(m, scattered=sim.scattered, total=sim.total,
                                          incident=sim.incident), grid, 12)
           for m in ("born", "rytov")}
    a, b = rec["born"].potential.values, rec["rytov"].potential.values
    assert np.linalg.norm(a - b) / np.linalg.norm(a) <= 0.05
    rep = rec["born"].report(truth, 8.0)
    assert rep["psnr"] == psnr(truth, rec["born"].potential, 8.0)
    assert rep["cg_iterations"] == 12 and len(rep["residuals"]) == 13
    assert rep["n_samples"] == rec["born"].n_samples > 0


def test_zero_data_reconstructs_zero():
    acq = AcquisitionConfig(n_angles=2, wavenumbers=(K0,), r_m=5.0, l_m=5.0, m=100)
    zero = Trace(acq.receiver_x, 5.0, np.zeros(100))
    ds = Dataset(acq, "born-equivalent", {key: zero for key in acq.keys()})
    rec = reconstruct(ds, reconstruction_grid(32, 4.0), 5)
    assert not np.any(rec.potential.values)
