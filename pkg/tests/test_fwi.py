import numpy as np
import pytest

from difftomo import fwi
from difftomo.fields import AcquisitionConfig, Grid, RealField, SourceConfig
from difftomo.phantom import disk_potential, potential_to_speed

K0 = np.pi
GRID = Grid(4.0, 32)

# the 32 x 32 model of the gradient check is deliberately coarse
pytestmark = pytest.mark.filterwarnings("ignore:only .* points per wavelength")


def _setup(rotate="acquisition", source=SourceConfig(), dispersion=0.0, n_iter=3, parameter="speed"):
    acq = AcquisitionConfig(n_angles=4, wavenumbers=(K0,), r_m=2.5, l_m=2.5, m=10, source=source)
    cfg = fwi.FwiConfig(acq, (K0,), n_iter, window_radius=2.0, rotate=rotate,
                        dispersion=dispersion, parameter=parameter)
    truth = potential_to_speed(disk_potential(1.2, 2.0, GRID), K0, 1.0)
    return cfg, truth, fwi.simulate(truth, cfg)


def _fd_errors(cfg, data, n_dirs=5, seed=1):
    rng = np.random.default_rng(seed)
    win = cfg.window(GRID)
    c = RealField(GRID, 1.0 + 0.02 * rng.standard_normal(GRID.shape) * win)
    g = fwi.gradient(c, data, cfg)
    assert not np.any(g.values[~win])
    errs = []
    for _ in range(n_dirs):
        d = rng.standard_normal(GRID.shape) * win
        eps = 1e-6 * np.linalg.norm(c.values) / np.linalg.norm(d)
        jp = fwi.misfit(RealField(GRID, c.values + eps * d), data, cfg)
        jm = fwi.misfit(RealField(GRID, c.values - eps * d), data, cfg)
        fd = (jp - jm) / (2 * eps)
        an = float(np.sum(g.values * d))
        errs.append(abs(fd - an) / abs(an))
    return errs


@pytest.mark.parametrize("rotate, source, dispersion", [
    ("acquisition", SourceConfig(), 0.0),
    ("acquisition", SourceConfig(), 0.75),
    ("medium", SourceConfig(), 1.0),
    ("acquisition", SourceConfig("point", distance=3.0), 0.0),
    ("medium", SourceConfig("line", distance=3.0, half_length=2.0, count=5), 0.0),
])
def test_gradient_matches_finite_differences(rotate, source, dispersion):
    cfg, _, data = _setup(rotate, source, dispersion)
    assert max(_fd_errors(cfg, data)) <= 1e-5


def test_cached_and_uncached_evaluations_agree():
    cfg, _, data = _setup()
    c = RealField(GRID, 1.0 + 0.01 * cfg.window(GRID))
    cache = {}
    j0 = fwi.misfit(c, data, cfg, cache=cache)
    j1, g1 = fwi.gradient(c, data, cfg, with_misfit=True, cache=cache)
    j2, g2 = fwi.gradient(c, data, cfg, with_misfit=True)
    assert j0 == j1 == j2
    np.testing.assert_array_equal(g1.values, g2.values)


def test_truth_is_a_fixed_point():
    cfg, truth, data = _setup()
    assert fwi.misfit(truth, data, cfg) < 1e-20
    speed, _, report = fwi.fwi_run(cfg, data, truth)
    np.testing.assert_allclose(speed.values, truth.values, atol=1e-8)


def test_misfit_monotone_and_run_deterministic():
    cfg, truth, data = _setup(n_iter=4)
    init = RealField(GRID, np.ones(GRID.shape))
    s1, f1, r1 = fwi.fwi_run(cfg, data, init, truth=disk_potential(1.2, 2.0, GRID), psnr_window=4.0)
    s2, _, r2 = fwi.fwi_run(cfg, data, init)
    hist = r1.blocks[0]["misfit"]
    assert len(hist) == 5
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
    assert hist[-1] < 0.5 * hist[0]
    np.testing.assert_array_equal(s1.values, s2.values)
    assert r1.to_dict(False)["blocks"][0]["misfit"] == r2.to_dict(False)["blocks"][0]["misfit"]
    assert "psnr" in r1.blocks[0] and "seconds" not in r1.to_dict(False)["blocks"][0]
    # updates stay inside the window
    win = cfg.window(GRID)
    assert np.all(s1.values[~win] == 1.0)


def test_potential_parameterization_descends():
    cfg, truth, data = _setup(n_iter=3, parameter="potential")
    init = RealField(GRID, np.ones(GRID.shape))
    _, _, report = fwi.fwi_run(cfg, data, init)
    hist = report.blocks[0]["misfit"]
    assert hist[-1] < hist[0]


def test_multi_frequency_blocks():
    acq = AcquisitionConfig(n_angles=4, wavenumbers=(0.5 * K0, K0), r_m=2.5, l_m=2.5, m=10)
    cfg = fwi.FwiConfig(acq, (0.5 * K0, K0), 2, window_radius=2.0)
    truth = potential_to_speed(disk_potential(1.2, 2.0, GRID), K0, 1.0)
    data = fwi.simulate(truth, cfg)
    _, _, report = fwi.fwi_run(cfg, data, RealField(GRID, np.ones(GRID.shape)))
    assert [b["wavenumber"] for b in report.blocks] == [0.5 * K0, K0]
    for b in report.blocks:
        assert all(y <= x + 1e-12 for x, y in zip(b["misfit"], b["misfit"][1:]))


def test_config_validation():
    acq = AcquisitionConfig(n_angles=2, wavenumbers=(K0,), r_m=2.5, l_m=2.5, m=10)
    with pytest.raises(ValueError):
        fwi.FwiConfig(acq, (K0, 0.5 * K0), 1)
    with pytest.raises(ValueError):
        fwi.FwiConfig(acq, (K0,), 0)
    with pytest.raises(ValueError):
        fwi.FwiConfig(acq, (K0,), 1, parameter="density")
    with pytest.raises(ValueError):
        fwi.FwiConfig(acq, (K0,), 1).k_index(2.0)
    with pytest.raises(ValueError):
        fwi.LineSearch(c1=1.5)


def test_rejects_mismatched_inputs():
    cfg, truth, data = _setup()
    with pytest.raises(ValueError):
        fwi.misfit(RealField(GRID, -truth.values), data, cfg)
    with pytest.raises(ValueError):
        fwi.misfit(truth, data.map(lambda k, t: t, kind="scattered"), cfg)


def test_nlcg_direction():
    g = np.array([1.0, -2.0])
    d, beta = fwi.nlcg_direction(g, None, None)
    np.testing.assert_array_equal(d, -g)
    assert beta == 0.0
    gp = np.array([2.0, 0.0])
    d, beta = fwi.nlcg_direction(g, gp, np.array([-2.0, 0.0]))
    assert beta == pytest.approx(max(0.0, g @ (g - gp) / (gp @ gp)))
    # negative Polak-Ribiere coefficient is clipped to a restart
    d, beta = fwi.nlcg_direction(np.array([1.0, 0.0]), np.array([3.0, 0.0]), np.array([-3.0, 0.0]))
    assert beta == 0.0


def test_armijo_search():
    a = np.diag([1.0, 10.0])
    fun = lambda x: 0.5 * x @ a @ x  # noqa: E731
    x = np.array([1.0, 1.0])
    g = a @ x
    params = fwi.LineSearch(step_fraction=10.0)
    res = fwi.armijo_search(fun, x, fun(x), g, -g, params, scale=1.0)
    assert res.accepted and res.trials > 1
    assert res.misfit <= fun(x) + params.c1 * res.step * (g @ -g)
    # ascent direction is refused without evaluating
    res = fwi.armijo_search(fun, x, fun(x), g, g, params, scale=1.0)
    assert not res.accepted and res.trials == 0
    # infeasible trials shrink until feasible
    guarded = lambda x: np.inf if np.any(x < 0.5) else fun(x)  # noqa: E731
    res = fwi.armijo_search(guarded, x, fun(x), g, -g, params, scale=1.0)
    assert res.accepted and np.all(res.model >= 0.5)


def test_minimize_nlcg_on_a_quadratic():
    rng = np.random.default_rng(0)
    q = rng.standard_normal((6, 6))
    a = q @ q.T + 6 * np.eye(6)
    b = rng.standard_normal(6)
    fun = lambda x: 0.5 * x @ a @ x - b @ x  # noqa: E731
    seen = []
    x, hist, status = fwi.minimize_nlcg(lambda x: (fun(x), a @ x - b), fun, np.zeros(6), 60,
                                        fwi.LineSearch(), callback=lambda *args: seen.append(args[0]))
    assert status == "completed" or status.startswith("line search failed")
    assert np.all(np.diff(hist) <= 1e-12)
    np.testing.assert_allclose(x, np.linalg.solve(a, b), rtol=1e-4, atol=1e-6)
    assert seen == list(range(len(hist) - 1))


def test_fwi_grid_holds_rotated_receivers():
    acq = AcquisitionConfig(n_angles=4, wavenumbers=(2 * np.pi,), r_m=10.0, l_m=10.0, m=200)
    g = fwi.fwi_grid(acq, ppw=10)
    assert g.half_width >= np.hypot(10, 10) + 2.0
    assert g.h <= 0.1 + 1e-12
