"""Quick deterministic self-check behind ``python -m difftomo verify``.

Runs small, seeded versions of the acceptance checks and writes a JSON
report and the fields it produced.  Nothing time- or machine-dependent
enters the outputs, so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import fwi
from .fdt import coverage_geometry, dft_frequencies, disk_spectrum, fdt_samples, in_interval_coverage
from .fields import AcquisitionConfig, Dataset, Grid, RealField, Trace, grid_for_spacing, make_rng, psnr
from .greens import born_convolution
from .helmholtz import forward_dataset, receiver_points, simulation_grid
from .io import write_field
from .ndft import NdftOperator
from .phantom import disk_potential, potential_to_speed
from .recon import born_equivalent, reconstruct, reconstruction_grid
from .special import bessel_j0, bessel_j1, bessel_y0, bessel_y1, hankel_h0_1

SEED = 20240601


def _special() -> dict:
    h = complex(hankel_h0_1(1.0))
    x = np.logspace(-1, 2, 100)
    w = bessel_j1(x) * bessel_y0(x) - bessel_j0(x) * bessel_y1(x)
    wr = float(np.max(np.abs(w - 2 / (np.pi * x)) / (2 / (np.pi * x))))
    err = abs(h - (0.7651976866 + 0.0882569642j))
    return {"h0_at_1": [h.real, h.imag], "abs_error": err, "wronskian_rel": wr,
            "passed": err <= 1e-9 and wr <= 1e-8}


def _adjoint() -> dict:
    rng = make_rng(SEED)
    grid = Grid(2.0, 16)
    worst = 0.0
    for _ in range(100):
        pts = rng.uniform(-3, 3, (50, 2))
        op = NdftOperator(grid, pts)
        x = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        y = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        lhs = np.vdot(y, op.forward(x))
        rhs = np.vdot(op.adjoint(y), x)
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(x) * np.linalg.norm(y)))
    return {"max_rel": float(worst), "passed": bool(worst <= 1e-10)}


def _fdt() -> dict:
    k0 = 2 * np.pi
    acq = AcquisitionConfig(n_angles=4, wavenumbers=(k0,), r_m=10.0, l_m=10.0, m=200)
    grid = grid_for_spacing(2.1, 0.05)
    f = disk_potential(2.0, 0.1, grid)
    traces = {}
    for ia, alpha in enumerate(acq.angles):
        direction = (-np.sin(alpha), np.cos(alpha))
        pts = receiver_points(acq.receiver_x, acq.r_m, alpha)
        traces[(ia, 0)] = Trace(acq.receiver_x, acq.r_m, born_convolution(f, k0, pts, direction))
    cs = fdt_samples(Dataset(acq, "born-equivalent", traces))
    k1 = dft_frequencies(acq.l_m, acq.m)[cs.k1_index]
    sel = np.abs(k1) <= 0.8 * k0
    exact = disk_spectrum(cs.points[sel], 2.0, 0.1)
    rel = float(np.linalg.norm(cs.values[sel] - exact) / np.linalg.norm(exact))
    return {"relative_l2": rel, "passed": rel <= 0.05}


def _coverage() -> dict:
    k0, l_m = 2 * np.pi, 10.0
    cs = coverage_geometry((k0,), 2 * np.pi * np.arange(64) / 64, 200, l_m, closed=True)
    mx = cs.max_norm()
    ok_norm = bool(np.all(cs.norms <= np.sqrt(2) * k0 + 1e-12))
    inside = in_interval_coverage([[0.0, -0.5 * k0], [k0, -k0]], k0, 2 * k0)
    ok = (np.sqrt(2) * k0 - np.pi / l_m <= mx <= np.sqrt(2) * k0 + 1e-12) and ok_norm \
        and not inside[0] and inside[1]
    return {"max_norm": mx, "passed": bool(ok)}


def _reconstruction(out: Path) -> dict:
    k0 = 2 * np.pi
    acq = AcquisitionConfig(n_angles=16, wavenumbers=(k0,), r_m=5.0, l_m=5.0, m=100,
                            snr_db=50.0, seed=SEED)
    speed_min = potential_to_speed(RealField(Grid(1.0, 2), np.full((2, 2), 0.5)), k0, 1.0)
    grid = simulation_grid(acq, ppw=10, speed_min=float(speed_min.values[0, 0]))
    sim = forward_dataset(potential_to_speed(disk_potential(1.5, 0.5, grid), k0, 1.0), acq)
    rg = reconstruction_grid(96, 6.0)
    truth = disk_potential(1.5, 0.5, rg)
    res = {}
    for method in ("born", "rytov"):
        data = born_equivalent(method, scattered=sim.scattered, total=sim.total,
                               incident=sim.incident)
        rec = reconstruct(data, rg, 12)
        write_field(out / f"{method}.fld", rec.potential)
        res[method] = psnr(truth, rec.potential, 8.0)
    return {"psnr": res, "passed": min(res.values()) >= 15.0}


def _fwi(out: Path) -> dict:
    k0 = np.pi
    acq = AcquisitionConfig(n_angles=4, wavenumbers=(k0,), r_m=2.5, l_m=2.5, m=10)
    grid = Grid(4.0, 32)
    cfg = fwi.FwiConfig(acq, (k0,), 3, window_radius=2.0)
    rng = make_rng(SEED)
    truth = RealField(grid, 1.0 + 0.05 * np.exp(-np.hypot(*grid.mesh()) ** 2))
    data = fwi.simulate(truth, cfg)
    c = RealField(grid, 1.0 + 0.01 * rng.standard_normal(grid.shape) * cfg.window(grid))
    j, g = fwi.gradient(c, data, cfg, with_misfit=True)
    worst = 0.0
    for _ in range(3):
        d = rng.standard_normal(grid.shape) * cfg.window(grid)
        eps = 1e-6
        jp = fwi.misfit(RealField(grid, c.values + eps * d), data, cfg)
        jm = fwi.misfit(RealField(grid, c.values - eps * d), data, cfg)
        fd = (jp - jm) / (2 * eps)
        an = float(np.sum(g.values * d))
        worst = max(worst, abs(fd - an) / max(abs(fd), abs(an)))
    speed, _, report = fwi.fwi_run(cfg, data, RealField(grid, np.ones(grid.shape)))
    write_field(out / "fwi_speed.fld", speed)
    hist = report.blocks[0]["misfit"]
    mono = all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
    return {"gradient_rel_error": worst, "misfit_history": hist, "monotone": mono,
            "passed": worst <= 1e-5 and mono}


CHECKS = {
    "special_functions": lambda out: _special(),
    "ndft_adjoint": lambda out: _adjoint(),
    "fdt_consistency": lambda out: _fdt(),
    "kspace_geometry": lambda out: _coverage(),
    "born_rytov_small": _reconstruction,
    "fwi_small": _fwi,
}


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def run_verify(out_dir, checks=None) -> dict:
    """Run the quick checks, write ``verify_report.json``; returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = list(CHECKS) if checks is None else list(checks)
    results = {}
    for name in names:
        if name not in CHECKS:
            raise ValueError(f"unknown check {name!r}; available: {sorted(CHECKS)}")
        results[name] = CHECKS[name](out)
    report = {"seed": SEED, "checks": results,
              "passed": bool(all(r["passed"] for r in results.values()))}
    (out / "verify_report.json").write_text(json.dumps(report, indent=1, sort_keys=True, default=_plain) + "\n")
    return report
