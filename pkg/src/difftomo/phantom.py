"""Scattering potentials: disks, phantoms, speed conversion and rotation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fields import Grid, RealField


@dataclass(frozen=True)
class Primitive:
    """One shape of a scene.

    ``shape`` is one of ``disk`` (``radius``), ``ellipse`` (``semi_axes``,
    ``tilt`` in radians), ``heart`` (``scale`` = total width) or ``polygon``
    (``vertices`` relative to ``center``).  ``amplitude`` is the value of the
    potential at ``omega / 2 pi = 1``.
    """

    shape: str
    amplitude: float
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    semi_axes: tuple = (0.0, 0.0)
    tilt: float = 0.0
    scale: float = 0.0
    vertices: tuple = ()

    def __post_init__(self):
        if self.shape not in ("disk", "ellipse", "heart", "polygon"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if self.shape == "disk" and self.radius <= 0:
            raise ValueError("disk radius must be positive")
        if self.shape == "ellipse" and min(self.semi_axes) <= 0:
            raise ValueError("ellipse semi-axes must be positive")
        if self.shape == "heart" and self.scale <= 0:
            raise ValueError("heart scale must be positive")
        if self.shape == "polygon" and len(self.vertices) < 3:
            raise ValueError("polygon needs at least three vertices")

    def outline(self) -> np.ndarray:
        """Boundary points (absolute coordinates), used for support checks."""
        c = np.asarray(self.center, dtype=float)
        t = np.linspace(0, 2 * np.pi, 721)
        if self.shape == "disk":
            pts = self.radius * np.column_stack([np.cos(t), np.sin(t)])
        elif self.shape == "ellipse":
            a, b = self.semi_axes
            pts = np.column_stack([a * np.cos(t), b * np.sin(t)]) @ _rot(self.tilt).T
        elif self.shape == "heart":
            pts = _heart_curve(t, self.scale)
        else:
            pts = np.asarray(self.vertices, dtype=float)
        return pts + c

    def mask(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        d1 = x1 - self.center[0]
        d2 = x2 - self.center[1]
        if self.shape == "disk":
            return d1**2 + d2**2 < self.radius**2
        if self.shape == "ellipse":
            ct, st = np.cos(self.tilt), np.sin(self.tilt)
            u = ct * d1 + st * d2
            v = -st * d1 + ct * d2
            a, b = self.semi_axes
            return (u / a) ** 2 + (v / b) ** 2 < 1
        if self.shape == "heart":
            return _inside_polygon(d1, d2, _heart_curve(np.linspace(0, 2 * np.pi, 721), self.scale))
        return _inside_polygon(d1, d2, np.asarray(self.vertices, dtype=float))


def _rot(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def _heart_curve(t, width):
    x = 16 * np.sin(t) ** 3
    y = 13 * np.cos(t) - 5 * np.cos(2 * t) - 2 * np.cos(3 * t) - np.cos(4 * t)
    s = width / 32.0
    return np.column_stack([s * x, s * (y + 2.5)])


def _inside_polygon(px, py, poly) -> np.ndarray:
    # even-odd ray casting, vectorized over query points
    inside = np.zeros(np.shape(px), dtype=bool)
    xs, ys = poly[:, 0], poly[:, 1]
    xe, ye = np.roll(xs, -1), np.roll(ys, -1)
    for x0, y0, x1, y1 in zip(xs, ys, xe, ye):
        if y0 == y1:
            continue
        crosses = (y0 > py) != (y1 > py)
        xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xint)
    return inside


@dataclass(frozen=True)
class SceneSpec:
    """Ordered primitives; later ones overwrite earlier ones."""

    primitives: tuple = field(default_factory=tuple)

    def extent(self) -> float:
        """Largest distance from the origin reached by any primitive."""
        if not self.primitives:
            return 0.0
        return float(max(np.max(np.hypot(*p.outline().T)) for p in self.primitives))

    def validate(self, r_m: float | None = None) -> None:
        if r_m is not None and self.extent() >= r_m:
            raise ValueError(
                f"scene reaches radius {self.extent():.3f}, outside the measurement ball r_M={r_m}"
            )

    def to_dict(self) -> dict:
        out = []
        for p in self.primitives:
            d = {"shape": p.shape, "amplitude": p.amplitude, "center": list(p.center)}
            if p.shape == "disk":
                d["radius"] = p.radius
            elif p.shape == "ellipse":
                d["semi_axes"] = list(p.semi_axes)
                d["tilt"] = p.tilt
            elif p.shape == "heart":
                d["scale"] = p.scale
            else:
                d["vertices"] = [list(v) for v in p.vertices]
            out.append(d)
        return {"primitives": out}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        prims = []
        for p in d.get("primitives", []):
            p = dict(p)
            for key in ("center", "semi_axes"):
                if key in p:
                    p[key] = tuple(p[key])
            if "vertices" in p:
                p["vertices"] = tuple(tuple(v) for v in p["vertices"])
            prims.append(Primitive(**p))
        return cls(tuple(prims))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "SceneSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def disk_potential(radius: float, amplitude: float, grid: Grid) -> RealField:
    """Indicator of the open disk ``|x| < radius`` times ``amplitude``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if radius >= grid.half_width:
        raise ValueError(f"disk radius {radius} does not fit in the grid (r_s={grid.half_width})")
    x1, x2 = grid.mesh()
    return RealField(grid, np.where(x1**2 + x2**2 < radius**2, float(amplitude), 0.0))


def render_scene(spec: SceneSpec, grid: Grid) -> RealField:
    x1, x2 = grid.mesh()
    out = np.zeros(grid.shape)
    for p in spec.primitives:
        out[p.mask(x1, x2)] = p.amplitude
    return RealField(grid, out)


def phantom1(heart_amplitude: float = 0.5) -> SceneSpec:
    """Ellipse containing a disk and a heart (``heart_amplitude=2`` for the
    high-contrast variant)."""
    return SceneSpec((
        Primitive("ellipse", 0.25, semi_axes=(4.5, 3.5)),
        Primitive("disk", 0.5, center=(-2.0, 0.6), radius=0.9),
        Primitive("heart", heart_amplitude, center=(1.6, -0.9), scale=2.5),
    ))


def phantom2(amplitude: float = 0.5) -> SceneSpec:
    """Small convex and non-convex inclusions inside radius 4."""
    a = amplitude
    return SceneSpec((
        Primitive("disk", a, center=(-2.0, 2.0), radius=0.5),
        Primitive("polygon", a, center=(1.6, 2.0),
                  vertices=((-0.8, -0.4), (0.8, -0.4), (0.8, 0.4), (-0.8, 0.4))),
        Primitive("polygon", a, center=(-2.0, -1.5),
                  vertices=((-0.6, -0.6), (0.6, -0.6), (0.6, -0.2), (-0.2, -0.2), (-0.2, 0.8), (-0.6, 0.8))),
        Primitive("ellipse", a, center=(1.8, -1.6), semi_axes=(0.9, 0.35), tilt=0.6),
        Primitive("heart", a, center=(0.0, 0.2), scale=1.2),
        Primitive("disk", a, center=(0.2, -3.0), radius=0.3),
    ))


def potential_to_speed(f: RealField, omega: float, c0: float) -> RealField:
    """``c = sqrt(omega^2 / (k0^2 + f))`` with ``k0 = omega / c0``."""
    k0 = omega / c0
    if not k0 > 0:
        raise ValueError("omega / c0 must be positive")
    denom = k0**2 + f.values
    if np.any(denom <= 0):
        raise ValueError("k0^2 + f must be positive everywhere (evanescent media are not modeled)")
    return RealField(f.grid, np.sqrt(omega**2 / denom))


def speed_to_potential(c: RealField, omega: float, c0: float) -> RealField:
    """``f = (omega / c)^2 - (omega / c0)^2``."""
    if np.any(c.values <= 0) or c0 <= 0:
        raise ValueError("wave speeds must be positive")
    return RealField(c.grid, (omega / c.values) ** 2 - (omega / c0) ** 2)


def rotation_matrix(grid: Grid, alpha: float) -> sp.csr_matrix:
    """Sparse bilinear operator sampling a nodal field at ``R_alpha x``.

    Points ``R_alpha x`` outside the grid read zero.  The transpose is the
    exact adjoint used to pull gradients back into the unrotated frame.
    """
    x1, x2 = grid.mesh()
    ca, sa = np.cos(alpha), np.sin(alpha)
    # fractional indices of R_alpha x: x = (i - N/2) h
    f1 = ((ca * x1 - sa * x2) / grid.h + grid.n // 2).ravel()
    f2 = ((sa * x1 + ca * x2) / grid.h + grid.n // 2).ravel()
    i1 = np.floor(f1).astype(int)
    i2 = np.floor(f2).astype(int)
    t1 = f1 - i1
    t2 = f2 - i2
    inside = (f1 >= 0) & (f1 <= grid.n - 1) & (f2 >= 0) & (f2 <= grid.n - 1)
    rows, cols, vals = [], [], []
    target = np.arange(grid.size)
    for d2, w2 in ((0, 1 - t2), (1, t2)):
        for d1, w1 in ((0, 1 - t1), (1, t1)):
            j1, j2 = i1 + d1, i2 + d2
            ok = inside & (j1 < grid.n) & (j2 < grid.n) & (w1 * w2 != 0)
            rows.append(target[ok])
            cols.append(j2[ok] * grid.n + j1[ok])
            vals.append((w1 * w2)[ok])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )


def rotate_potential(f: RealField, alpha: float) -> RealField:
    """Sample ``f(R_alpha x)`` at the nodes by bilinear interpolation.

    Points that map outside the grid read zero.
    """
    vals = rotation_matrix(f.grid, alpha) @ f.values.ravel()
    return RealField(f.grid, vals.reshape(f.grid.shape))
