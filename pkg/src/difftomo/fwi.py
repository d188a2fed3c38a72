"""Full waveform inversion of the wave speed.

The misfit is ``J(c) = 1/2 sum_(omega, alpha) w ||R u - d||^2`` over the
receiver traces, with ``w = 2 l_M / m`` the receiver spacing.  Gradients
come from the discrete adjoint: with ``A(c) u = S g(c)`` the assembled
(complex symmetric) system, solve ``A^H lambda = w R^T r`` once per source
and accumulate

    dJ/dc_n = Re(conj(lambda_n) (S_n dg_n/dc_n - dA_nn/dc_n u_n)).

Only the diagonal of ``A`` depends on ``c``, so the sensitivity is
node-wise.  Updates use nonlinear conjugate gradients (Polak-Ribiere+)
with a backtracking Armijo search, one frequency block at a time from low
to high frequency.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fields import AcquisitionConfig, Dataset, Grid, RealField, grid_for_spacing, psnr
from .helmholtz import (
    PointSources,
    assemble,
    effective_k2,
    forward_dataset,
    interpolation_matrix,
    receiver_points,
    rhs_for,
)
from .phantom import potential_to_speed, rotation_matrix, speed_to_potential

REFERENCE_OMEGA = 2 * np.pi

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineSearch:
    """Backtracking Armijo parameters.

    The first trial step moves the largest node by ``step_fraction`` times
    the current maximum speed; each rejection multiplies the step by
    ``shrink``.
    """

    c1: float = 1e-4
    shrink: float = 0.5
    max_trials: int = 20
    step_fraction: float = 0.01

    def __post_init__(self):
        if not (0 < self.c1 < 1 and 0 < self.shrink < 1):
            raise ValueError("need 0 < c1 < 1 and 0 < shrink < 1")
        if self.max_trials < 1 or self.step_fraction <= 0:
            raise ValueError("need max_trials >= 1 and step_fraction > 0")


@dataclass(frozen=True)
class FwiConfig:
    """Everything that defines an inversion run.

    ``wavenumbers`` is the frequency schedule (as background wavenumbers
    ``omega / c0``, ascending); each entry must appear in the data's
    acquisition.  ``window_radius`` restricts updates to ``|x| <
    window_radius`` (default ``r_M``; ``inf`` disables the window).
    ``parameter`` selects the unknown: ``"speed"`` or ``"potential"``
    (the reference-frequency potential; the speed is derived from it).
    ``rotate``, ``dispersion`` and ``receiver_order`` must match the
    settings used to simulate the data.
    """

    acquisition: AcquisitionConfig
    wavenumbers: tuple
    n_iter: int
    window_radius: float | None = None
    line_search: LineSearch = field(default_factory=LineSearch)
    parameter: str = "speed"
    rotate: str = "acquisition"
    dispersion: float = 0.0
    receiver_order: int = 1

    def __post_init__(self):
        ks = tuple(float(k) for k in self.wavenumbers)
        if not ks or any(k <= 0 for k in ks):
            raise ValueError("frequencies must be positive")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("frequency schedule must be strictly ascending")
        object.__setattr__(self, "wavenumbers", ks)
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.parameter not in ("speed", "potential"):
            raise ValueError("parameter must be 'speed' or 'potential'")
        if self.rotate not in ("acquisition", "medium"):
            raise ValueError("rotate must be 'acquisition' or 'medium'")

    @property
    def radius(self) -> float:
        return self.acquisition.r_m if self.window_radius is None else self.window_radius

    def window(self, grid: Grid) -> np.ndarray:
        x1, x2 = grid.mesh()
        return np.hypot(x1, x2) < self.radius

    def k_index(self, k0: float) -> int:
        ks = np.asarray(self.acquisition.wavenumbers)
        hit = np.flatnonzero(np.isclose(ks, k0, rtol=1e-12, atol=0))
        if hit.size != 1:
            raise ValueError(f"wavenumber {k0} is not in the acquisition")
        return int(hit[0])


@dataclass
class FwiState:
    """Current model and optimizer memory."""

    speed: RealField
    iteration: int = 0
    prev_grad: np.ndarray | None = None
    prev_dir: np.ndarray | None = None
    misfits: list = field(default_factory=list)


def simulate(speed: RealField, config: FwiConfig) -> Dataset:
    """Total-field data generated with the inversion's own forward model."""
    acq = config.acquisition
    sim = forward_dataset(speed, acq, rotate=config.rotate, dispersion=config.dispersion,
                          receiver_order=config.receiver_order)
    return sim.total


# -- misfit and gradient ------------------------------------------------------


def _check(c: RealField, data: Dataset, config: FwiConfig):
    if data.kind != "total":
        raise ValueError(f"FWI needs total-field data, got {data.kind!r}")
    if data.acquisition != config.acquisition:
        raise ValueError("data acquisition does not match the configuration")
    if np.any(c.values <= 0):
        raise ValueError("wave speed must be positive")


def _sources(grid, acq, k0, k2_eff, frame, disp):
    """Source densities (columns) and their diagonal c-sensitivity factor."""
    rot = np.array([[np.cos(frame), -np.sin(frame)], [np.sin(frame), np.cos(frame)]])
    if acq.source.kind == "plane":
        s = rot @ [0.0, 1.0]
        x1, x2 = grid.mesh()
        wave = np.exp(1j * k0 * (s[0] * x1 + s[1] * x2)).ravel()
        g = (np.ravel(k2_eff) - effective_k2(k0, grid.h, disp)) * wave
        return g, wave
    g = rhs_for(PointSources(acq.source.positions() @ rot.T), grid, spread="bilinear").ravel()
    return g, None


def _block(c: RealField, data: Dataset, config: FwiConfig, ik: int, want_grad: bool,
           cache: dict | None = None):
    """Misfit (and gradient w.r.t. nodal speed) for one wavenumber.

    ``cache`` (optional) keeps the factorizations and forward fields of the
    last model seen per wavenumber, so that a gradient at the model just
    accepted by the line search needs only the adjoint solves.
    """
    acq = config.acquisition
    grid = c.grid
    k0 = acq.wavenumbers[ik]
    omega = k0 * acq.c0
    weight = 2.0 * acq.l_m / acq.m
    inc = np.exp(1j * k0 * acq.r_m) if acq.source.kind == "plane" else 0.0
    x_rec = acq.receiver_x
    cv = c.values.ravel()

    def operator(c_frame):
        return assemble(RealField(grid, (omega / c_frame).reshape(grid.shape)), omega,
                        check_resolution=False, dispersion=config.dispersion)

    def sensitivity(op, c_frame, u, lam, wave):
        sens = -op.diag_derivative(c_frame)[:, None] * u
        if wave is not None:
            # d(k2_eff)/dc = -(2 k^2 - w h^2 k^4 / 3) / c
            k = omega / c_frame
            dk2 = -(2 * k**2 - config.dispersion * grid.h**2 * k**4 / 3) / c_frame
            sens = sens + (op.row_scale * dk2)[:, None] * wave
        return np.real(np.conj(lam) * sens).sum(axis=1)

    if config.rotate == "acquisition":
        # one operator; all angles solved as one batch
        groups = [(operator(cv), cv, list(enumerate(acq.angles)), None)]
    else:
        groups = []
        for ia, alpha in enumerate(acq.angles):
            rot = rotation_matrix(grid, alpha)
            c_frame = rot @ (cv - acq.c0) + acq.c0
            groups.append((None, c_frame, [(ia, 0.0)], rot))

    key = cv.tobytes()
    hit = cache is not None and cache.get(ik, (None,))[0] == key
    stored = cache[ik][1] if hit else []
    total = 0.0
    grad = np.zeros(grid.size)
    for n, (op, c_frame, frames, rot) in enumerate(groups):
        if hit:
            op, u, waves, projs = stored[n]
        else:
            op = op or operator(c_frame)
            cols, waves, projs = [], [], []
            for _, frame in frames:
                g, wave = _sources(grid, acq, k0, op.k2_eff, frame, config.dispersion)
                cols.append(g)
                waves.append(wave)
                projs.append(interpolation_matrix(grid, receiver_points(x_rec, acq.r_m, frame),
                                                  order=config.receiver_order))
            u = op.solve_many(np.column_stack(cols))
            stored.append((op, u, waves, projs))
        rhs_adj = np.empty_like(u)
        for j, (ia, _) in enumerate(frames):
            r = inc + projs[j] @ u[:, j] - data[(ia, ik)].values
            total += 0.5 * weight * float(np.vdot(r, r).real)
            rhs_adj[:, j] = weight * (projs[j].T @ r)
        if not want_grad:
            continue
        lam = op.solve_many(rhs_adj, adjoint=True)
        wave = None if waves[0] is None else np.column_stack(waves)
        g_frame = sensitivity(op, c_frame, u, lam, wave)
        grad += g_frame if rot is None else rot.T @ g_frame
    if cache is not None:
        cache.clear()
        cache[ik] = (key, stored)
    return total, grad


def misfit(c: RealField, data: Dataset, config: FwiConfig, wavenumbers=None,
           cache: dict | None = None) -> float:
    """``1/2 sum w ||R u - d||^2`` over the configured (or given) wavenumbers."""
    _check(c, data, config)
    ks = config.wavenumbers if wavenumbers is None else wavenumbers
    return float(sum(_block(c, data, config, config.k_index(k), False, cache)[0] for k in ks))


def gradient(c: RealField, data: Dataset, config: FwiConfig, wavenumbers=None,
             with_misfit: bool = False, cache: dict | None = None):
    """Adjoint-state gradient of :func:`misfit` w.r.t. the nodal speed.

    Zero outside the inversion window.
    """
    _check(c, data, config)
    ks = config.wavenumbers if wavenumbers is None else wavenumbers
    total, grad = 0.0, np.zeros(c.grid.size)
    for k in ks:
        j, g = _block(c, data, config, config.k_index(k), True, cache)
        total += j
        grad += g
    grad = np.where(config.window(c.grid).ravel(), grad, 0.0).reshape(c.grid.shape)
    out = RealField(c.grid, grad)
    return (total, out) if with_misfit else out


# -- optimizer ----------------------------------------------------------------


def nlcg_direction(grad: np.ndarray, prev_grad: np.ndarray | None,
                   prev_dir: np.ndarray | None) -> tuple[np.ndarray, float]:
    """Polak-Ribiere+ direction ``-g + beta d_prev``.

    Restarts (``beta = 0``) without history or when the result is not a
    descent direction.
    """
    g = np.asarray(grad, dtype=float)
    if prev_grad is None or prev_dir is None:
        return -g, 0.0
    denom = float(np.vdot(prev_grad, prev_grad))
    beta = 0.0 if denom == 0 else max(0.0, float(np.vdot(g, g - prev_grad)) / denom)
    d = -g + beta * prev_dir
    if float(np.vdot(d, -g)) <= 0:
        return -g, 0.0
    return d, beta


@dataclass
class StepResult:
    accepted: bool
    step: float
    misfit: float
    trials: int
    model: np.ndarray | None = None


def armijo_search(fun, x: np.ndarray, f0: float, grad: np.ndarray, direction: np.ndarray,
                  params: LineSearch, scale: float, first: float | None = None) -> StepResult:
    """Backtracking search for ``fun(x + t d) <= f0 + c1 t <g, d>``.

    The first trial is ``first`` if given, else ``t = step_fraction * scale
    / max|d|``.  A rejected trial is replaced by the minimizer of the
    quadratic through ``f0``, the slope and the trial value, kept within
    ``[shrink / 5, shrink]`` times the old step.  Trials leaving the
    admissible set (``fun`` returns ``inf``) shrink by ``shrink``.
    """
    slope = float(np.vdot(grad, direction))
    dmax = float(np.max(np.abs(direction)))
    if slope >= 0 or dmax == 0:
        return StepResult(False, 0.0, f0, 0)
    t = first if first else params.step_fraction * scale / dmax
    for trial in range(1, params.max_trials + 1):
        xt = x + t * direction
        ft = fun(xt)
        if np.isfinite(ft) and ft <= f0 + params.c1 * t * slope:
            return StepResult(True, t, ft, trial, xt)
        if np.isfinite(ft):
            curv = ft - f0 - slope * t
            t_q = -slope * t * t / (2 * curv) if curv > 0 else params.shrink * t
            t = min(max(t_q, 0.2 * params.shrink * t), params.shrink * t)
        else:
            t *= params.shrink
    return StepResult(False, 0.0, f0, params.max_trials)


def minimize_nlcg(fun_grad, fun, x0: np.ndarray, n_iter: int, params: LineSearch,
                  scale_fn=None, callback=None):
    """Generic NLCG loop (used for each frequency block and in tests).

    ``fun_grad(x) -> (f, g)``; ``fun(x) -> f``.  Returns ``(x, history,
    status)`` where ``history`` lists the objective after each accepted
    step, starting with ``f(x0)``.  After the first iteration the trial
    step reuses the last accepted one, rescaled by the ratio of directional
    derivatives.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    history = [f]
    prev_g = prev_d = None
    prev_step = prev_slope = None
    status = "completed"
    for it in range(n_iter):
        d, _ = nlcg_direction(g, prev_g, prev_d)
        slope = float(np.vdot(g, d))
        first = None
        if prev_step is not None and slope < 0:
            first = prev_step * prev_slope / slope
        scale = scale_fn(x) if scale_fn else 1.0
        res = armijo_search(fun, x, f, g, d, params, scale, first)
        if not res.accepted:
            status = f"line search failed at iteration {it + 1}"
            break
        x = res.model
        prev_g, prev_d = g, d
        prev_step, prev_slope = res.step, slope
        f, g = fun_grad(x)
        history.append(f)
        if callback:
            callback(it, x, f, res)
    return x, history, status


@dataclass
class FwiReport:
    blocks: list = field(default_factory=list)
    status: str = "completed"

    def to_dict(self, include_timings: bool = True) -> dict:
        blocks = []
        for b in self.blocks:
            b = dict(b)
            if not include_timings:
                b.pop("seconds", None)
            blocks.append(b)
        return {"status": self.status, "blocks": blocks}

    def save(self, path, include_timings: bool = True) -> None:
        Path(path).write_text(json.dumps(self.to_dict(include_timings), indent=1, sort_keys=True))


def _to_speed(x: np.ndarray, grid: Grid, config: FwiConfig) -> np.ndarray:
    if config.parameter == "speed":
        return x
    return potential_to_speed(RealField(grid, x.reshape(grid.shape)), REFERENCE_OMEGA,
                              config.acquisition.c0).values.ravel()


def fwi_run(config: FwiConfig, data: Dataset, initial: RealField,
            truth: RealField | None = None, psnr_window: float | None = None):
    """Frequency continuation with ``n_iter`` NLCG iterations per block.

    Returns ``(speed, potential, report)``; the potential is taken at the
    reference frequency ``omega / 2 pi = 1``.  A failed line search ends
    its block early and is recorded in the report.
    """
    grid = initial.grid
    c0 = config.acquisition.c0
    window = config.window(grid).ravel()
    if config.parameter == "speed":
        x = initial.values.ravel().copy()
    else:
        x = speed_to_potential(initial, REFERENCE_OMEGA, c0).values.ravel().copy()
    report = FwiReport()
    cache: dict = {}

    for k0 in config.wavenumbers:
        ks = (k0,)

        def fun(xv, ks=ks):
            cv = _to_speed(xv, grid, config)
            if not np.all(np.isfinite(cv)) or np.any(cv <= 0):
                return np.inf
            return misfit(RealField(grid, cv.reshape(grid.shape)), data, config, ks, cache)

        def fun_grad(xv, ks=ks):
            cv = _to_speed(xv, grid, config)
            j, g = gradient(RealField(grid, cv.reshape(grid.shape)), data, config, ks,
                            with_misfit=True, cache=cache)
            g = g.values.ravel()
            if config.parameter == "potential":
                # c = omega_ref / sqrt(k_ref^2 + f)  =>  dc/df = -c^3 / (2 omega_ref^2)
                g = g * (-(cv**3) / (2 * REFERENCE_OMEGA**2))
            return j, np.where(window, g, 0.0)

        if config.parameter == "speed":
            scale_fn = lambda xv: float(np.max(np.abs(xv)))  # noqa: E731
        else:
            scale_fn = lambda xv: max(float(np.max(np.abs(xv))), (REFERENCE_OMEGA / c0) ** 2 * 0.01)  # noqa: E731

        def progress(it, xv, f, res, k0=k0):
            log.debug("k0=%.4g iter %d misfit %.6e step %.3e trials %d",
                      k0, it + 1, f, res.step, res.trials)

        t0 = time.perf_counter()
        x, history, status = minimize_nlcg(fun_grad, fun, x, config.n_iter, config.line_search,
                                           scale_fn, progress)
        block = {
            "wavenumber": k0,
            "frequency": k0 * c0 / (2 * np.pi),
            "iterations": len(history) - 1,
            "misfit": history,
            "status": status,
            "seconds": time.perf_counter() - t0,
        }
        if truth is not None:
            cv = _to_speed(x, grid, config)
            f = speed_to_potential(RealField(grid, cv.reshape(grid.shape)), REFERENCE_OMEGA, c0)
            block["psnr"] = psnr(truth, f, psnr_window)
        report.blocks.append(block)
        if status != "completed":
            report.status = "partial"

    speed = RealField(grid, _to_speed(x, grid, config).reshape(grid.shape))
    return speed, speed_to_potential(speed, REFERENCE_OMEGA, c0), report


def fwi_grid(acq: AcquisitionConfig, ppw: float = 10.0, speed_min: float | None = None,
             margin: float = 2.0) -> Grid:
    """Grid holding all rotated receivers plus ``margin`` (length units)."""
    c_min = speed_min or acq.c0
    k_max = max(acq.wavenumbers) * acq.c0 / c_min
    h = 2 * np.pi / (k_max * ppw)
    pts = np.vstack([[[acq.l_m, acq.r_m]], acq.source.positions()])
    reach = float(np.max(np.hypot(pts[:, 0], pts[:, 1])))
    return grid_for_spacing(reach + margin, h)


def config_dict(config: FwiConfig) -> dict:
    d = asdict(config)
    d["acquisition"]["wavenumbers"] = list(config.acquisition.wavenumbers)
    d["wavenumbers"] = list(config.wavenumbers)
    return d
