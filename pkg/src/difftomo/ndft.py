"""Nonuniform discrete Fourier transform on a grid and its CGNE inversion.

``F_N f(y) = (2 pi)^-1 (2 r_s / N)^2 sum_x f(x) exp(-i x.y)`` over the grid
nodes ``x``.  The exponential separates in ``x1`` and ``x2``, so for ``M``
points the transform is one ``(N, N) @ (N, M)`` product followed by a
column-wise reduction; the adjoint is the transposed pair of operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ComplexField, Grid, RealField

_BLOCK = 1 << 22


def _points(points) -> np.ndarray:
    y = np.atleast_2d(np.asarray(points, dtype=float))
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError("points must have shape (M, 2)")
    if not np.all(np.isfinite(y)):
        raise ValueError("points must be finite")
    return y


def _weight(grid: Grid) -> float:
    return grid.h**2 / (2 * np.pi)


def _values(f) -> np.ndarray:
    return np.asarray(getattr(f, "values", f))


def ndft_direct(f, points, grid: Grid | None = None) -> np.ndarray:
    """Reference evaluation as an explicit sum over all nodes, blocked
    over points."""
    grid = grid or f.grid
    y = _points(points)
    x1, x2 = grid.mesh()
    vals = _values(f).ravel()
    xs = np.column_stack([x1.ravel(), x2.ravel()])
    out = np.empty(len(y), dtype=complex)
    step = max(1, _BLOCK // grid.size)
    for s in range(0, len(y), step):
        phase = np.exp(-1j * (xs @ y[s:s + step].T))
        out[s:s + step] = vals @ phase
    return _weight(grid) * out


class NdftOperator:
    """``F_N`` for a fixed grid and point set, with cached 1D exponentials."""

    def __init__(self, grid: Grid, points):
        self.grid = grid
        self.points = _points(points)
        x = grid.coords
        self._e1 = np.exp(-1j * np.outer(x, self.points[:, 0]))
        self._e2 = np.exp(-1j * np.outer(x, self.points[:, 1]))
        self._w = _weight(grid)

    @property
    def shape(self) -> tuple:
        return (len(self.points), self.grid.size)

    def forward(self, f) -> np.ndarray:
        vals = np.asarray(_values(f)).reshape(self.grid.shape)
        # rows index x2, columns x1
        t = vals @ self._e1
        return self._w * np.einsum("im,im->m", self._e2, t)

    def adjoint(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if v.shape != (len(self.points),):
            raise ValueError(f"expected {len(self.points)} values, got shape {v.shape}")
        return self._w * ((self._e2.conj() * v) @ self._e1.conj().T)


def ndft_forward(f, points, grid: Grid | None = None) -> np.ndarray:
    grid = grid or f.grid
    return NdftOperator(grid, points).forward(f)


def ndft_adjoint(values, points, grid: Grid) -> ComplexField:
    """Adjoint of :func:`ndft_forward` for the standard inner products."""
    y = _points(points)
    v = np.asarray(values, dtype=complex).ravel()
    if v.size != len(y):
        raise ValueError("values and points differ in length")
    return ComplexField(grid, NdftOperator(grid, y).adjoint(v))


@dataclass
class CgneInfo:
    """Diagnostics of :func:`cgne_invert`.

    ``residuals[j]`` is ``||b - A f_j||`` after ``j`` iterations
    (``residuals[0] = ||b||``).
    """

    iterations: int
    residuals: list = field(default_factory=list)
    estimate: ComplexField | None = None


def cgne_invert(points, values, grid: Grid, iters: int,
                operator: NdftOperator | None = None) -> tuple[RealField, CgneInfo]:
    """Solve ``F_N f = b`` by conjugate gradients on ``F_N^H F_N f = F_N^H b``.

    Starts from zero and runs exactly ``iters`` iterations (fewer only if
    the normal-equation residual vanishes).  The iterate stays complex; the
    real part is returned as the reconstruction.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    op = operator or NdftOperator(grid, points)
    b = np.asarray(values, dtype=complex).ravel()
    if b.size != len(op.points):
        raise ValueError("values and points differ in length")
    if b.size == 0:
        raise ValueError("no samples")
    x = np.zeros(grid.shape, dtype=complex)
    r = b.copy()
    s = op.adjoint(r)
    p = s.copy()
    gamma = np.vdot(s, s).real
    info = CgneInfo(0, [float(np.linalg.norm(r))])
    for _ in range(iters):
        if gamma == 0:
            break
        q = op.forward(p)
        qq = np.vdot(q, q).real
        if qq == 0:
            break
        a = gamma / qq
        x += a * p
        r -= a * q
        s = op.adjoint(r)
        gamma_new = np.vdot(s, s).real
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
        info.iterations += 1
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            raise FloatingPointError("CGNE diverged (non-finite residual)")
        info.residuals.append(res)
    info.estimate = ComplexField(grid, x)
    return RealField(grid, x.real), info
