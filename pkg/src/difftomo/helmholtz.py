"""Finite-difference Helmholtz solver with a first-order absorbing boundary.

The operator is ``-Laplace - k(x)^2`` on the 5-point stencil.  On the
boundary, the Robin condition ``-i k u + du/dn = 0`` eliminates a ghost
node through a centered difference; boundary rows are then scaled by 1/2
(edges) and 1/4 (corners), which makes the assembled matrix complex
symmetric.  Right-hand sides are scaled the same way inside
:meth:`MediumOperator.solve`, so callers pass plain source densities.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import (
    AcquisitionConfig,
    ComplexField,
    Dataset,
    Grid,
    RealField,
    Trace,
    add_noise,
    grid_for_spacing,
)

MIN_PPW = 5.0
WARN_PPW = 10.0
RESIDUAL_TOL = 1e-8
SOLVE_BATCH = 8


class SolverError(RuntimeError):
    """The linear solve failed or did not reach the residual tolerance."""


def _rotation(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def points_per_wavelength(k_max: float, h: float) -> float:
    return 2 * np.pi / (k_max * h)


class MediumOperator:
    """Assembled Helmholtz matrix for one wavenumber field.

    Attributes
    ----------
    matrix : scipy.sparse.csc_matrix
        Complex symmetric system matrix of dimension ``N^2``.
    row_scale : ndarray
        1 inside, 1/2 on edges, 1/4 at corners (flattened).
    boundary_coef : ndarray
        ``2/h`` times the number of boundary directions of each node; the
        diagonal carries ``-i * boundary_coef * k``.
    """

    def __init__(self, grid: Grid, k: np.ndarray, matrix, row_scale, boundary_coef,
                 dispersion: float = 0.0):
        self.grid = grid
        self.k = k
        self.dispersion = float(dispersion)
        self.matrix = matrix
        self.row_scale = row_scale
        self.boundary_coef = boundary_coef
        self._lu = None

    @property
    def lu(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix, permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SolverError(f"sparse factorization failed: {exc}") from None
        return self._lu

    def diag_derivative(self, speed: np.ndarray) -> np.ndarray:
        """d(diagonal)/d(c) for ``k = omega / c``, flattened."""
        k = self.k.ravel()
        c = speed.ravel()
        # d(-k2_eff)/dc with dk/dc = -k/c
        dk2 = (2 * k**2 - self.dispersion * self.grid.h**2 * k**4 / 3) / c
        return self.row_scale * (dk2 + 1j * self.boundary_coef * k / c)

    @property
    def k2_eff(self) -> np.ndarray:
        """The squared wavenumber on the diagonal (after any correction)."""
        return effective_k2(self.k, self.grid.h, self.dispersion)

    def _solve_scaled(self, b: np.ndarray, adjoint: bool = False) -> np.ndarray:
        u = self.lu.solve(b, trans="H" if adjoint else "N")
        a = self.matrix.conj().T if adjoint else self.matrix
        for _ in range(2):
            r = b - a @ u
            bn = np.linalg.norm(b, axis=0)
            rel = np.linalg.norm(r, axis=0) / np.where(bn > 0, bn, 1.0)
            if np.all(rel <= RESIDUAL_TOL):
                return u
            # one step of iterative refinement
            u = u + self.lu.solve(r, trans="H" if adjoint else "N")
        raise SolverError(f"relative residual {rel.max():.2e} above {RESIDUAL_TOL:g}")

    def solve_many(self, g: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """Solve for columns of source densities ``g`` (shape ``(N^2, n)``).

        With ``adjoint=True`` the conjugate-transpose system is solved and
        ``g`` is taken as already scaled (it is a data-space residual).
        """
        g = np.asarray(g, dtype=complex)
        one = g.ndim == 1
        g2 = g[:, None] if one else g
        u = np.empty(g2.shape, dtype=complex)
        # batches bound the memory held by refinement temporaries
        for s in range(0, g2.shape[1], SOLVE_BATCH):
            b = g2[:, s:s + SOLVE_BATCH]
            if not adjoint:
                b = self.row_scale[:, None] * b
            u[:, s:s + SOLVE_BATCH] = self._solve_scaled(b, adjoint=adjoint)
        return u[:, 0] if one else u

    def solve(self, rhs_list) -> list:
        """Solve for each right-hand side; the factorization is shared."""
        rhs = [np.asarray(r).ravel() for r in rhs_list]
        for r in rhs:
            if r.size != self.grid.size:
                raise ValueError(f"rhs length {r.size} != {self.grid.size}")
        if not rhs:
            return []
        u = self.solve_many(np.column_stack(rhs))
        return [ComplexField(self.grid, u[:, j].reshape(self.grid.shape)) for j in range(u.shape[1])]

    def apply(self, u) -> np.ndarray:
        """Unscaled operator applied to a field (interior rows are exact)."""
        vals = np.asarray(getattr(u, "values", u)).ravel()
        return (self.matrix @ vals) / self.row_scale


def effective_k2(k, h: float, dispersion: float = 0.0):
    """Squared wavenumber placed on the diagonal: ``k^2 (1 - w (k h)^2 / 12)``.

    The 5-point Laplacian has the symbol ``|xi|^2 - h^2 (xi1^4 + xi2^4) / 12``.
    For a wave travelling at angle ``theta`` to the x1 axis this equals
    ``k^2 - w k^4 h^2 / 12`` with ``w = cos^4 + sin^4`` in ``[1/2, 1]``, so
    the weight ``w = dispersion`` cancels the leading phase error for that
    family of directions: 1 for waves along the axes, 3/4 for the average
    over all directions, 0 for the plain stencil.
    """
    if not 0.0 <= dispersion <= 1.0:
        raise ValueError("dispersion weight must lie in [0, 1]")
    k = np.asarray(k, dtype=float)
    return k**2 * (1.0 - dispersion * (k * h) ** 2 / 12.0)


def assemble(k: RealField, omega: float | None = None, check_resolution: bool = True,
             dispersion: float = 0.0) -> MediumOperator:
    """Assemble ``-Laplace - k^2`` with the absorbing boundary rows.

    ``k`` is the wavenumber field ``omega / c``.  ``omega`` is accepted for
    bookkeeping only.  See :func:`effective_k2` for ``dispersion``.
    """
    grid = k.grid
    kv = k.values
    if np.any(kv <= 0):
        raise ValueError("wavenumber must be positive everywhere")
    h = grid.h
    n = grid.n
    if check_resolution:
        ppw = points_per_wavelength(kv.max(), h)
        # grids built for exactly MIN_PPW / WARN_PPW may land a rounding below
        ppw *= 1 + 1e-9
        if ppw < MIN_PPW:
            raise ValueError(f"{ppw:.1f} points per wavelength, at least {MIN_PPW} needed")
        if ppw < WARN_PPW:
            warnings.warn(f"only {ppw:.1f} points per wavelength", RuntimeWarning, stacklevel=2)

    edge = np.ones(n)
    edge[[0, -1]] = 0.5
    s2, s1 = np.meshgrid(edge, edge, indexing="ij")
    scale = (s1 * s2).ravel()
    nb = ((s1 < 1).astype(int) + (s2 < 1).astype(int)).ravel()
    bcoef = 2.0 * nb / h

    idx = np.arange(n * n).reshape(n, n)
    k2 = effective_k2(kv.ravel(), h, dispersion)
    diag = scale * (4.0 / h**2 - k2 - 1j * bcoef * kv.ravel())
    # x1 couplings carry the x2 scaling of the pair and vice versa
    r1, c1 = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    v1 = -s2[:, :-1].ravel() / h**2
    r2, c2 = idx[:-1, :].ravel(), idx[1:, :].ravel()
    v2 = -s1[:-1, :].ravel() / h**2
    rows = np.concatenate([idx.ravel(), r1, c1, r2, c2])
    cols = np.concatenate([idx.ravel(), c1, r1, c2, r2])
    vals = np.concatenate([diag, v1, v1, v2, v2]).astype(complex)
    mat = sp.csc_matrix((vals, (rows, cols)), shape=(n * n, n * n))
    return MediumOperator(grid, kv, mat, scale, bcoef, dispersion)


def solve(op: MediumOperator, rhs_list) -> list:
    return op.solve(rhs_list)


# -- sources --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlaneWaveContrast:
    """Contrast source ``f(x) exp(i k0 x.s)`` for the scattered field."""

    f: RealField
    k0: float
    direction: tuple = (0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PointSources:
    """Sum of unit point sources (one for a point source, many for a line)."""

    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if p.shape[1] != 2 or len(p) < 1:
            raise ValueError("need at least one source position")
        object.__setattr__(self, "positions", p)


def point_source(x0) -> PointSources:
    return PointSources(np.asarray(x0, dtype=float)[None, :])


def line_source(x1_min: float, x1_max: float, x2: float, count: int) -> PointSources:
    x1 = np.linspace(x1_min, x1_max, count)
    return PointSources(np.column_stack([x1, np.full(count, float(x2))]))


def _lagrange_cubic(t):
    """Weights of the 4-point Lagrange stencil at nodes -1, 0, 1, 2."""
    return np.column_stack([
        -t * (t - 1) * (t - 2) / 6,
        (t + 1) * (t - 1) * (t - 2) / 2,
        -(t + 1) * t * (t - 2) / 2,
        (t + 1) * t * (t - 1) / 6,
    ])


def interpolation_matrix(grid: Grid, points, order: int = 1) -> sp.csr_matrix:
    """Sparse interpolation from grid nodes to ``points``.

    ``order=1`` is bilinear; ``order=3`` is the tensor-product cubic
    Lagrange stencil on the surrounding 4 x 4 nodes (error ``O(h^4)``),
    which requires one extra layer of nodes around the point.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(grid.contains(p)):
        raise ValueError("interpolation points outside the grid")
    n, h = grid.n, grid.h
    f1 = p[:, 0] / h + n // 2
    f2 = p[:, 1] / h + n // 2
    if order == 1:
        i1 = np.clip(np.floor(f1).astype(int), 0, n - 2)
        i2 = np.clip(np.floor(f2).astype(int), 0, n - 2)
        t1 = f1 - i1
        t2 = f2 - i2
        w1 = np.column_stack([1 - t1, t1])
        w2 = np.column_stack([1 - t2, t2])
        offsets = np.arange(2)
    elif order == 3:
        i1 = np.floor(f1).astype(int)
        i2 = np.floor(f2).astype(int)
        if np.any((i1 < 1) | (i1 > n - 3) | (i2 < 1) | (i2 > n - 3)):
            raise ValueError("cubic interpolation needs one node of margin around each point")
        w1 = _lagrange_cubic(f1 - i1)
        w2 = _lagrange_cubic(f2 - i2)
        i1, i2 = i1 - 1, i2 - 1
        offsets = np.arange(4)
    else:
        raise ValueError("order must be 1 or 3")
    # all (a, b) offset pairs: node (i2 + b, i1 + a), weight w2[b] * w1[a]
    a, b = np.meshgrid(offsets, offsets, indexing="xy")
    a, b = a.ravel(), b.ravel()
    cols = (i2[:, None] + b) * n + (i1[:, None] + a)
    w = w2[:, b] * w1[:, a]
    rows = np.repeat(np.arange(len(p)), len(a))
    mat = sp.csr_matrix((w.ravel(), (rows, cols.ravel())), shape=(len(p), grid.size))
    mat.eliminate_zeros()
    return mat


def rhs_for(source, grid: Grid, spread: str = "nearest") -> np.ndarray:
    """Source density on the grid, shape ``(N, N)``.

    Point sources become discrete deltas ``1/h^2``: at the nearest node
    (``spread="nearest"``) or shared bilinearly among the four surrounding
    nodes (``spread="bilinear"``), summed over positions.
    """
    if isinstance(source, PlaneWaveContrast):
        if source.f.grid != grid:
            raise ValueError("contrast lives on a different grid")
        x1, x2 = grid.mesh()
        s = source.direction
        return source.f.values * np.exp(1j * source.k0 * (s[0] * x1 + s[1] * x2))
    if not isinstance(source, PointSources):
        raise TypeError(f"unsupported source {source!r}")
    p = source.positions
    if not np.all(grid.contains(p)):
        raise ValueError("source position outside the grid")
    out = np.zeros(grid.size, dtype=complex)
    if spread == "nearest":
        i1 = np.rint(p[:, 0] / grid.h).astype(int) + grid.n // 2
        i2 = np.rint(p[:, 1] / grid.h).astype(int) + grid.n // 2
        np.add.at(out, i2 * grid.n + i1, 1.0 / grid.h**2)
    elif spread == "bilinear":
        out += interpolation_matrix(grid, p).T @ np.full(len(p), 1.0 / grid.h**2)
    else:
        raise ValueError(f"unknown spread {spread!r}")
    return out.reshape(grid.shape)


# -- traces ---------------------------------------------------------------


def receiver_points(receiver_x, r_m: float, angle: float = 0.0) -> np.ndarray:
    """Receiver coordinates ``R_angle (x1, r_M)``."""
    x = np.asarray(receiver_x, dtype=float)
    pts = np.column_stack([x, np.full_like(x, r_m)])
    return pts @ _rotation(angle).T


def sample_receivers(fld: ComplexField, receiver_x, r_m: float, angle: float = 0.0) -> Trace:
    """Bilinear samples of ``fld`` on the (optionally rotated) receiver line."""
    vals = fld.values.ravel()
    mat = interpolation_matrix(fld.grid, receiver_points(receiver_x, r_m, angle))
    return Trace(receiver_x, r_m, mat @ vals)


def scattered_from_total(u_tot, u_inc, alpha: complex = 1.0):
    """``alpha (u_tot - u_inc)`` for fields or traces."""
    if isinstance(u_tot, Trace):
        if not np.array_equal(u_tot.receiver_x, u_inc.receiver_x):
            raise ValueError("traces use different receivers")
    elif u_tot.grid != u_inc.grid:
        raise ValueError("fields live on different grids")
    return u_tot.with_values(alpha * (u_tot.values - u_inc.values))


def calibrate_incident(trace: Trace, k0: float, central_fraction: float = 0.5) -> complex:
    """Complex scale taking an incident trace closest to ``exp(i k0 r_M)``.

    Least squares over the central ``central_fraction`` of the line.
    """
    x = trace.receiver_x
    half = central_fraction * max(abs(x[0]), abs(x[-1]))
    sel = np.abs(x) <= half + 1e-12
    u = trace.values[sel]
    power = np.vdot(u, u).real
    if power == 0:
        raise ValueError("cannot calibrate a zero incident trace")
    ideal = np.exp(1j * k0 * trace.height)
    return complex(np.sum(np.conj(u)) * ideal / power)


# -- datasets -------------------------------------------------------------


def simulation_grid(acq: AcquisitionConfig, ppw: float = 12.0, margin_wavelengths: float = 2.0,
                    speed_min: float | None = None, rotate: str = "medium") -> Grid:
    """Square grid holding every receiver and source plus a margin.

    With ``rotate="acquisition"`` the receivers and sources of all angles
    must fit; with ``rotate="medium"`` only the unrotated ones.  The
    spacing gives ``ppw`` points per wavelength at the largest wavenumber
    for speed ``speed_min`` (default ``c0``).
    """
    c_min = speed_min or acq.c0
    k_max = max(acq.wavenumbers) * acq.c0 / c_min
    lam_bg = 2 * np.pi / min(acq.wavenumbers)
    h = 2 * np.pi / (k_max * ppw)
    pts = np.vstack([[[acq.l_m, acq.r_m]], acq.source.positions()])
    if rotate == "acquisition":
        reach = float(np.max(np.hypot(pts[:, 0], pts[:, 1])))
    elif rotate == "medium":
        reach = float(np.max(np.abs(pts)))
    else:
        raise ValueError("rotate must be 'acquisition' or 'medium'")
    return grid_for_spacing(reach + margin_wavelengths * lam_bg, h)


@dataclass
class SimulatedData:
    """Traces from :func:`forward_dataset`.

    ``total`` and ``incident`` are raw solver traces; ``scattered`` holds
    ``alpha (total - incident)`` with the per-trace calibration ``alpha``
    (1 for plane-wave data), i.e. the Born-equivalent measurement.
    """

    total: Dataset
    incident: Dataset
    scattered: Dataset
    calibration: dict
    diagnostics: dict


def _speed_to_k(c: RealField, omega: float) -> RealField:
    return RealField(c.grid, omega / c.values)


def _rotated_speed(c: RealField, c0: float, alpha: float) -> RealField:
    from .phantom import rotate_potential

    d = rotate_potential(RealField(c.grid, c.values - c0), alpha)
    return RealField(c.grid, d.values + c0)


def forward_dataset(speed: RealField, acq: AcquisitionConfig, rotate: str = "medium",
                    spread: str = "bilinear", dispersion: float | None = None,
                    receiver_order: int = 3) -> SimulatedData:
    """Simulate traces for every ``(angle, wavenumber)`` of ``acq``.

    ``speed`` is the wave speed on the simulation grid.  ``rotate="medium"``
    resamples the medium at ``R_alpha x`` for each angle (one factorization
    per angle), so incidence and receivers never move relative to the grid
    and the absorbing boundary.  With ``rotate="acquisition"`` the medium
    stays fixed and the incidence direction, sources and receivers are
    rotated by ``R_alpha``; one factorization per wavenumber then serves all
    angles.  Noise, if configured, is added to the total traces last.
    ``dispersion`` is the weight passed to :func:`assemble`; by default 1
    for ``rotate="medium"`` (the main propagation direction is then always
    ``e2``) and 3/4 for rotated acquisitions.  ``receiver_order`` selects
    bilinear (1) or cubic (3) receiver sampling.
    """
    if rotate not in ("acquisition", "medium"):
        raise ValueError("rotate must be 'acquisition' or 'medium'")
    if dispersion is None:
        dispersion = 1.0 if rotate == "medium" else 0.75
    grid = speed.grid
    x_rec = acq.receiver_x
    src_kind = acq.source.kind
    totals, incs, calib = {}, {}, {}
    diag = {"grid_n": grid.n, "grid_half_width": grid.half_width, "h": grid.h,
            "min_points_per_wavelength": None}
    ppw_min = np.inf
    for ik, k0 in enumerate(acq.wavenumbers):
        omega = k0 * acq.c0
        k_bg = RealField(grid, np.full(grid.shape, k0))
        ppw_min = min(ppw_min, points_per_wavelength(omega / speed.values.min(), grid.h))
        media = {}
        if rotate == "acquisition":
            op = assemble(_speed_to_k(speed, omega), omega, dispersion=dispersion)
            media = {ia: (op, 0.0) for ia in range(acq.n_angles)}
        op_bg = assemble(k_bg, omega, dispersion=dispersion) if src_kind != "plane" else None
        # group angles that share an operator so solves are batched
        rhs_cols, meta = [], []
        for ia, alpha in enumerate(acq.angles):
            if rotate == "medium":
                op = assemble(_speed_to_k(_rotated_speed(speed, acq.c0, alpha), omega), omega,
                              dispersion=dispersion)
                frame = 0.0
            else:
                op, frame = media[ia][0], alpha
            rot = _rotation(frame)
            if src_kind == "plane":
                k2 = op.k2_eff.reshape(grid.shape)
                contrast = RealField(grid, k2 - effective_k2(k0, grid.h, dispersion))
                g = rhs_for(PlaneWaveContrast(contrast, k0, tuple(rot @ [0.0, 1.0])), grid)
            else:
                g = rhs_for(PointSources(acq.source.positions() @ rot.T), grid, spread=spread)
            if rotate == "medium":
                u = op.solve_many(g.ravel())
                _collect(acq, grid, ia, ik, k0, frame, u, g, op_bg, x_rec, totals, incs, calib,
                         order=receiver_order)
            else:
                rhs_cols.append(g.ravel())
                meta.append((ia, frame))
        if rhs_cols:
            u_all = op.solve_many(np.column_stack(rhs_cols))
            g_all = np.column_stack(rhs_cols)
            inc_all = op_bg.solve_many(g_all) if op_bg is not None else None
            for j, (ia, frame) in enumerate(meta):
                _collect(acq, grid, ia, ik, k0, frame, u_all[:, j], None, None, x_rec,
                         totals, incs, calib, u_inc=None if inc_all is None else inc_all[:, j],
                         order=receiver_order)
    diag["min_points_per_wavelength"] = float(ppw_min)

    if acq.snr_db is not None:
        totals = {key: add_noise(t, acq.snr_db, (acq.seed, key[0], key[1])) for key, t in totals.items()}
    scattered = {
        key: scattered_from_total(totals[key], incs[key], calib[key]) for key in totals
    }
    return SimulatedData(
        total=Dataset(acq, "total", totals),
        incident=Dataset(acq, "incident", incs),
        scattered=Dataset(acq, "born-equivalent", scattered),
        calibration=calib,
        diagnostics=diag,
    )


def _collect(acq, grid, ia, ik, k0, frame, u, g, op_bg, x_rec, totals, incs, calib, u_inc=None,
             order=1):
    pts = receiver_points(x_rec, acq.r_m, frame)
    P = interpolation_matrix(grid, pts, order=order)
    key = (ia, ik)
    if acq.source.kind == "plane":
        inc_vals = np.full(len(x_rec), np.exp(1j * k0 * acq.r_m))
        totals[key] = Trace(x_rec, acq.r_m, inc_vals + P @ u)
        incs[key] = Trace(x_rec, acq.r_m, inc_vals)
        calib[key] = 1.0 + 0j
        return
    if u_inc is None:
        u_inc = op_bg.solve_many(g.ravel())
    totals[key] = Trace(x_rec, acq.r_m, P @ u)
    incs[key] = Trace(x_rec, acq.r_m, P @ u_inc)
    calib[key] = calibrate_incident(incs[key], k0)
