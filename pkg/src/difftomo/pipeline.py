"""File-producing pipelines behind the command line interface.

Every function here writes deterministic artifacts (field files, dataset
manifests, CSV, PGM); wall-clock timings only ever appear in reports and
only when asked for.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from . import fwi
from .fields import Dataset, Grid, RealField, SourceConfig, Trace, relative_l2
from .greens import born_convolution
from .helmholtz import (
    PlaneWaveContrast,
    assemble,
    effective_k2,
    forward_dataset,
    interpolation_matrix,
    receiver_points,
    rhs_for,
    simulation_grid,
)
from .io import read_dataset, read_field, write_dataset, write_field
from .phantom import speed_to_potential
from .recipes import REFERENCE_OMEGA, Recipe
from .recon import born_equivalent, reconstruct, reconstruction_grid


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def fwi_config(recipe: Recipe, n_iter: int | None = None) -> fwi.FwiConfig:
    f = recipe.fwi
    return fwi.FwiConfig(
        acquisition=recipe.acquisition_config(),
        wavenumbers=recipe.fwi_wavenumbers(),
        n_iter=int(n_iter or f["n_iter"]),
        window_radius=f["window_radius"],
        line_search=fwi.LineSearch(step_fraction=float(f["step_fraction"])),
        parameter=f["parameter"],
    )


def simulation_grid_for(recipe: Recipe) -> Grid:
    """Grid on which ``forward`` simulates the recipe's data."""
    acq = recipe.acquisition_config()
    if recipe.reconstruction["method"] == "fwi":
        # FWI data come from the inversion's own grid and forward model
        return fwi.fwi_grid(acq, ppw=recipe.fwi["ppw"], speed_min=recipe.speed_min(),
                            margin=recipe.fwi["margin"])
    fw = recipe.forward
    return simulation_grid(acq, ppw=fw["ppw"], margin_wavelengths=fw["margin_wavelengths"],
                           speed_min=recipe.speed_min(), rotate=fw["rotate"])


def simulate(recipe: Recipe):
    """Run the recipe's forward model; returns ``(SimulatedData, truth)``."""
    acq = recipe.acquisition_config()
    grid = simulation_grid_for(recipe)
    speed = recipe.speed(grid)
    if recipe.reconstruction["method"] == "fwi":
        cfg = fwi_config(recipe)
        sim = forward_dataset(speed, acq, rotate=cfg.rotate, dispersion=cfg.dispersion,
                              receiver_order=cfg.receiver_order)
    else:
        fw = recipe.forward
        sim = forward_dataset(speed, acq, rotate=fw["rotate"], dispersion=fw["dispersion"],
                              receiver_order=fw["receiver_order"])
    return sim, recipe.potential(grid)


def cmd_forward(recipe: Recipe, out_dir) -> dict:
    """Write total, incident and scattered datasets plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim, truth = simulate(recipe)
    extra = {"recipe": recipe.name}
    for name in ("total", "incident", "scattered"):
        write_dataset(out / f"{name}.json", getattr(sim, name), extra)
    write_field(out / "truth_sim.fld", truth)
    manifest = {
        "recipe": recipe.to_dict(),
        "diagnostics": sim.diagnostics,
        "calibration": [[ia, ik, c.real, c.imag] for (ia, ik), c in sorted(sim.calibration.items())],
        "files": ["total.json", "incident.json", "scattered.json", "truth_sim.fld"],
    }
    _dump(out / "manifest.json", manifest)
    return manifest


def _load_calibration(data_dir: Path) -> dict | None:
    path = data_dir / "manifest.json"
    if not path.exists():
        return None
    rows = json.loads(path.read_text()).get("calibration", [])
    return {(int(a), int(k)): complex(re, im) for a, k, re, im in rows}


def cmd_reconstruct(recipe: Recipe, data_dir, out_dir, timings: bool = True) -> dict:
    """Reconstruct from ``data_dir`` (as written by :func:`cmd_forward`)."""
    data_dir, out = Path(data_dir), Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    method = recipe.reconstruction["method"]
    acq = recipe.acquisition_config()
    t0 = time.perf_counter()
    report = {"recipe": recipe.name, "method": method}
    window = recipe.reconstruction["psnr_window"]
    if method == "fwi":
        total = read_dataset(data_dir / "total.json")
        if total.acquisition != acq:
            raise ValueError("dataset acquisition does not match the recipe")
        grid = simulation_grid_for(recipe)
        truth = recipe.potential(grid)
        initial = RealField(grid, np.full(grid.shape, acq.c0))
        speed, potential, fwi_report = fwi.fwi_run(fwi_config(recipe), total, initial,
                                                   truth=truth, psnr_window=window)
        report["fwi"] = fwi_report.to_dict(include_timings=timings)
        write_field(out / "speed.fld", speed)
    else:
        def load(name):
            ds = read_dataset(data_dir / f"{name}.json")
            if ds.acquisition != acq:
                raise ValueError("dataset acquisition does not match the recipe")
            return ds

        if method == "born":
            data = born_equivalent("born", scattered=load("scattered"))
        else:
            data = born_equivalent("rytov", total=load("total"), incident=load("incident"),
                                   calibration=_load_calibration(data_dir))
        rc = recipe.reconstruction
        grid = reconstruction_grid(rc["grid_n"], rc["half_width"])
        truth = recipe.potential(grid)
        rec = reconstruct(data, grid, rc["cg_iters"])
        potential = rec.potential
        report.update(rec.report())
    from .fields import psnr

    report["psnr"] = psnr(truth, potential, window) if np.any(truth.values) else None
    report["psnr_window"] = window
    write_field(out / "reconstruction.fld", potential)
    write_field(out / "truth.fld", truth)
    if timings:
        report["seconds"] = time.perf_counter() - t0
    _dump(out / "report.json", report)
    return report


# -- forward model comparison --------------------------------------------------


def _compare_traces(recipe: Recipe) -> tuple[np.ndarray, dict, dict]:
    cmp_ = recipe.compare
    acq = recipe.acquisition_config()
    c0 = acq.c0
    k0 = 2 * np.pi * float(cmp_["frequency"]) / c0
    k_ref = REFERENCE_OMEGA / c0
    alpha = acq.angles[int(cmp_["angle_index"])]
    x_rec = acq.receiver_x
    fw = recipe.forward
    traces, calib = {}, {}

    def run_sources(src: SourceConfig):
        a = type(acq)(n_angles=acq.n_angles, wavenumbers=(k0,), r_m=acq.r_m, l_m=acq.l_m,
                      m=acq.m, c0=c0, source=src)
        grid = simulation_grid(a, ppw=fw["ppw"], margin_wavelengths=fw["margin_wavelengths"],
                               speed_min=recipe.speed_min(), rotate="medium")
        single = type(acq)(n_angles=1, wavenumbers=(k0,), r_m=acq.r_m, l_m=acq.l_m, m=acq.m,
                           c0=c0, source=src)
        speed = recipe.speed(grid)
        if alpha != 0.0:
            from .phantom import rotate_potential

            speed = RealField(grid, rotate_potential(RealField(grid, speed.values - c0),
                                                     alpha).values + c0)
        sim = forward_dataset(speed, single, rotate="medium", dispersion=fw["dispersion"],
                              receiver_order=fw["receiver_order"])
        return sim.scattered[(0, 0)].values, sim.calibration[(0, 0)], grid

    for model in cmp_["models"]:
        if model in traces:
            continue
        if model == "pde-scattered":
            traces[model], calib[model], _ = run_sources(SourceConfig("plane"))
        elif model == "line-source":
            ls = cmp_["line_source"]
            traces[model], calib[model], _ = run_sources(
                SourceConfig("line", distance=ls["distance"], half_length=ls["half_length"],
                             count=int(ls["count"])))
        elif model == "point-source":
            traces[model], calib[model], _ = run_sources(
                SourceConfig("point", distance=cmp_["point_source"]["distance"]))
        elif model in ("born-pde", "born-convolution"):
            a = type(acq)(n_angles=1, wavenumbers=(k0,), r_m=acq.r_m, l_m=acq.l_m, m=acq.m, c0=c0)
            grid = simulation_grid(a, ppw=fw["ppw"], margin_wavelengths=fw["margin_wavelengths"],
                                   speed_min=recipe.speed_min(), rotate="medium")
            f_k0 = RealField(grid, (k0 / k_ref) ** 2 * recipe.potential(grid).values)
            if alpha != 0.0:
                from .phantom import rotate_potential

                f_k0 = rotate_potential(f_k0, alpha)
            pts = receiver_points(x_rec, acq.r_m)
            if model == "born-convolution":
                traces[model] = born_convolution(f_k0, k0, pts)
            else:
                disp = 1.0 if fw["dispersion"] is None else fw["dispersion"]
                op = assemble(RealField(grid, np.full(grid.shape, k0)), k0 * c0, dispersion=disp)
                g = rhs_for(PlaneWaveContrast(f_k0, k0), grid)
                u = op.solve_many(g.ravel())
                P = interpolation_matrix(grid, pts, order=fw["receiver_order"])
                traces[model] = P @ u
            calib[model] = 1.0 + 0j
    return x_rec, traces, calib


def cmd_compare_forward(recipe: Recipe, out_csv) -> dict:
    """Receiver-line traces of several forward models in one CSV.

    Columns: ``x1`` then ``<model>_re, <model>_im`` per model.  The report
    lists calibration scalars and pairwise relative L2 differences (each
    model against the first).
    """
    models = recipe.compare["models"]
    if len(models) < 2:
        raise ValueError("compare-forward needs at least two models")
    x, traces, calib = _compare_traces(recipe)
    out = Path(out_csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1"] + [f"{m}_{part}" for m in models for part in ("re", "im")])
        for j, xj in enumerate(x):
            row = [repr(float(xj))]
            for m in models:
                row += [repr(float(traces[m][j].real)), repr(float(traces[m][j].imag))]
            w.writerow(row)
    ref = models[0]
    central = np.abs(x) <= 0.5 * np.max(np.abs(x)) + 1e-12
    report = {
        "models": models,
        "calibration": {m: [calib[m].real, calib[m].imag] for m in models},
        "relative_l2_vs_first": {m: relative_l2(traces[m], traces[ref]) for m in models[1:]},
        "relative_l2_vs_first_central": {
            m: relative_l2(traces[m][central], traces[ref][central]) for m in models[1:]
        },
    }
    _dump(out.with_suffix(".json"), report)
    return report


# -- images ----------------------------------------------------------------------


def to_gray(values: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    """Map ``[vmin, vmax]`` linearly to ``0..255`` with ``floor(t + 1/2)``
    rounding (the midpoint goes to 128); values outside are clipped.  A
    degenerate range maps everything to 128."""
    if not vmax >= vmin:
        raise ValueError("need vmin <= vmax")
    if vmax == vmin:
        return np.full(values.shape, 128, dtype=np.uint8)
    t = (np.asarray(values, dtype=float) - vmin) / (vmax - vmin) * 255.0
    return np.clip(np.floor(t + 0.5), 0, 255).astype(np.uint8)


def cmd_render(field_path, out_pgm, window: float | None = None, vmin: float | None = None,
               vmax: float | None = None, part: str = "real") -> dict:
    """Write a binary (P5) PGM of a field file.

    The image shows the centered square of side ``window`` (whole grid by
    default); the top row is the largest ``x2``.  The value range defaults
    to the min and max inside the window.
    """
    fld = read_field(field_path)
    vals = fld.values
    if np.iscomplexobj(vals):
        ops = {"real": np.real, "imag": np.imag, "abs": np.abs}
        if part not in ops:
            raise ValueError(f"part must be one of {sorted(ops)}")
        vals = ops[part](vals)
    mask = fld.grid.window_mask(window)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    crop = vals[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    lo = float(crop.min()) if vmin is None else float(vmin)
    hi = float(crop.max()) if vmax is None else float(vmax)
    img = to_gray(crop, lo, hi)[::-1]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(out_pgm).write_bytes(header + img.tobytes())
    return {"width": int(img.shape[1]), "height": int(img.shape[0]), "vmin": lo, "vmax": hi}
