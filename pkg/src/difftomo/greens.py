"""Outgoing 2D Green's function and Born-series quadrature."""

from __future__ import annotations

import numpy as np

from .fields import ComplexField, RealField
from .special import hankel_h0_1, hankel_h1_1

_BLOCK = 1 << 21


class GreensKernel:
    """``G(x) = (i/4) H0^(1)(k0 |x|)``, the outgoing solution of
    ``(-Laplace - k0^2) G = delta``."""

    def __init__(self, k0: float):
        if not k0 > 0:
            raise ValueError("wavenumber must be positive")
        self.k0 = float(k0)

    def __call__(self, r):
        return 0.25j * hankel_h0_1(self.k0 * np.asarray(r, dtype=float))

    def cell_average(self, h: float) -> complex:
        """Mean of G over the disk whose area equals one ``h x h`` cell.

        Uses ``int_0^rho r H0(k r) dr = rho H1(k rho) / k + 2i / (pi k^2)``.
        """
        k = self.k0
        rho = h / np.sqrt(np.pi)
        integral = rho * hankel_h1_1(k * rho) / k + 2j / (np.pi * k * k)
        return complex(0.25j * 2 * np.pi * integral / (np.pi * rho * rho))


def greens_2d(x, k0: float):
    """Evaluate the Green's function at point(s) ``x`` (last axis = 2)."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if np.any(r == 0):
        raise ValueError("Green's function is singular at x = 0")
    return GreensKernel(k0)(r)


def _plane_wave(points, k0, direction):
    s = np.asarray(direction, dtype=float)
    return np.exp(1j * k0 * (points @ s))


def _apply_kernel(kernel: GreensKernel, targets, sources, weights, h, self_cell):
    """``sum_j G(t_i - s_j) w_j`` with optional singular-cell replacement."""
    out = np.zeros(len(targets), dtype=complex)
    if len(sources) == 0:
        return out
    close_tol = h / 2
    g_cell = kernel.cell_average(h) if self_cell else None
    step = max(1, _BLOCK // len(sources))
    for start in range(0, len(targets), step):
        t = targets[start:start + step]
        r = np.hypot(t[:, None, 0] - sources[None, :, 0], t[:, None, 1] - sources[None, :, 1])
        near = r < close_tol
        if np.any(near):
            if not self_cell:
                raise ValueError(
                    "evaluation point within h/2 of the potential's support; enable self_cell"
                )
            r = np.where(near, 1.0, r)
            g = kernel(r)
            g[near] = g_cell
        else:
            g = kernel(r)
        out[start:start + step] = g @ weights
    return out


def born_convolution(f: RealField, k0: float, eval_points, direction=(0.0, 1.0),
                     self_cell: bool = False) -> np.ndarray:
    """First-order Born field ``h^2 sum_y G(x - y) f(y) exp(i k0 y.s)``.

    Only nodes where ``f != 0`` enter the sum, so the quadrature grid is in
    effect the support's bounding box.  ``direction`` is the unit incidence
    vector ``s`` (default ``e2``).
    """
    kernel = GreensKernel(k0)
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    g = f.grid
    x1, x2 = g.mesh()
    mask = f.values != 0
    src = np.column_stack([x1[mask], x2[mask]])
    w = g.h**2 * f.values[mask] * _plane_wave(src, k0, direction)
    return _apply_kernel(kernel, pts, src, w, g.h, self_cell)


def born_iterate(f: RealField, k0: float, order: int, direction=(0.0, 1.0)) -> ComplexField:
    """Born approximation of the given order, evaluated on the grid nodes.

    Order q replaces the plane wave under the integral by the plane wave plus
    the order q-1 field.  The singular self-cell is replaced by the
    cell-averaged Green's function.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    kernel = GreensKernel(k0)
    g = f.grid
    x1, x2 = g.mesh()
    nodes = np.column_stack([x1.ravel(), x2.ravel()])
    mask = f.values.ravel() != 0
    src = nodes[mask]
    if len(src) == 0:
        return ComplexField(g, np.zeros(g.shape, dtype=complex))
    fw = g.h**2 * f.values.ravel()[mask]
    inc = _plane_wave(src, k0, direction)
    u_src = np.zeros(len(src), dtype=complex)
    if order > 1:
        # support-to-support kernel, reused by every iteration
        r = np.hypot(src[:, None, 0] - src[None, :, 0], src[:, None, 1] - src[None, :, 1])
        diag = r == 0
        gmat = kernel(np.where(diag, 1.0, r))
        gmat[diag] = kernel.cell_average(g.h)
        for _ in range(order - 1):
            u_src = gmat @ (fw * (inc + u_src))
    out = _apply_kernel(kernel, nodes, src, fw * (inc + u_src), g.h, True)
    return ComplexField(g, out.reshape(g.shape))
