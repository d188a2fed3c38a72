"""Grids, sampled fields, receiver traces and acquisition descriptions.

All arrays are stored as ``(N, N)`` numpy arrays indexed ``[i2, i1]``: the
first axis runs along x2, the second along x1.  Flattening in C order
therefore gives the x2-major, row-major layout used by the field files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def centered_indices(n: int) -> np.ndarray:
    """The index set ``{-n/2, ..., n/2 - 1}``."""
    return np.arange(n) - n // 2


@dataclass(frozen=True)
class Grid:
    """Uniform square grid on ``[-r_s, r_s)^2`` with ``N`` nodes per axis.

    Node ``(i2, i1)`` sits at ``x1 = (i1 - N/2) h``, ``x2 = (i2 - N/2) h``
    with ``h = 2 r_s / N``; node ``(N/2, N/2)`` is the origin.
    """

    half_width: float
    n: int

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2 and self.n % 2 == 0):
            raise ValueError(f"grid resolution must be an even integer >= 2, got {self.n!r}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"grid half width must be positive, got {self.half_width!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def size(self) -> int:
        return self.n * self.n

    @property
    def coords(self) -> np.ndarray:
        """1D node coordinates, shared by both axes."""
        return self.h * centered_indices(self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x1, x2)`` arrays of shape ``(N, N)``."""
        c = self.coords
        x2, x1 = np.meshgrid(c, c, indexing="ij")
        return x1, x2

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        """Whether points lie inside the node hull ``[x_min, x_max]^2``."""
        p = np.atleast_2d(points)
        lo = self.coords[0] + margin
        hi = self.coords[-1] - margin
        return np.all((p >= lo - 1e-12) & (p <= hi + 1e-12), axis=-1)

    def window_mask(self, side: float | None) -> np.ndarray:
        """Boolean mask of nodes in the centered square of the given side."""
        if side is None:
            return np.ones(self.shape, dtype=bool)
        if side <= 0:
            raise ValueError("window side must be positive")
        if side / 2 > self.half_width + 1e-12:
            raise ValueError(
                f"window side {side} exceeds the grid extent {2 * self.half_width}"
            )
        x1, x2 = self.mesh()
        half = side / 2 + 1e-9
        return (np.abs(x1) <= half) & (np.abs(x2) <= half)


def make_grid(half_width: float, n: int) -> Grid:
    return Grid(half_width, n)


def grid_for_spacing(half_width: float, h: float) -> Grid:
    """Smallest even-resolution grid covering ``half_width`` with spacing <= h."""
    n = int(math.ceil(2.0 * half_width / h))
    n += n % 2
    return Grid(n * h / 2.0, n)


class _GridField:
    dtype: type = float

    def __init__(self, grid: Grid, values):
        values = np.asarray(values)
        if values.shape != grid.shape:
            if values.size == grid.size:
                values = values.reshape(grid.shape)
            else:
                raise ValueError(
                    f"field has {values.size} values, grid needs {grid.size}"
                )
        values = _frozen(values, self.dtype)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"{type(self).__name__}(grid={self.grid!r})"

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def with_values(self, values):
        return type(self)(self.grid, values)


class RealField(_GridField):
    """Real samples (a potential ``f`` or a wave speed ``c``) on a grid."""

    dtype = np.float64


class ComplexField(_GridField):
    """Complex wavefield samples on a grid."""

    dtype = np.complex128


def _check_same_grid(a: _GridField, b: _GridField):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class Trace:
    """Complex samples on the receiver line ``x2 = r_M``.

    ``receiver_x`` are positions along the line (x1 in the unrotated frame).
    """

    receiver_x: np.ndarray
    height: float
    values: np.ndarray

    def __post_init__(self):
        x = _frozen(self.receiver_x, np.float64)
        v = _frozen(self.values, np.complex128)
        if x.ndim != 1 or v.shape != x.shape:
            raise ValueError("receiver positions and values must be 1D of equal length")
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("receiver positions must be strictly increasing")
        object.__setattr__(self, "receiver_x", x)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "height", float(self.height))

    def with_values(self, values) -> "Trace":
        return Trace(self.receiver_x, self.height, values)

    def __len__(self):
        return self.values.size


def receiver_positions(l_m: float, m: int) -> np.ndarray:
    """Uniform receiver grid ``(2 l_M / m) I_m``."""
    if m < 1 or m % 2:
        raise ValueError("receiver count must be a positive even integer")
    return (2.0 * l_m / m) * centered_indices(m)


@dataclass(frozen=True)
class SourceConfig:
    """Incident-field model of an acquisition.

    kind
        ``"plane"`` (ideal plane wave; the scattered field is simulated
        directly), ``"point"`` (single point source at ``(0, -distance)``) or
        ``"line"`` (``count`` point sources on ``x2 = -distance`` spanning
        ``|x1| <= half_length``).
    """

    kind: str = "plane"
    distance: float = 0.0
    half_length: float = 0.0
    count: int = 1

    def __post_init__(self):
        if self.kind not in ("plane", "point", "line"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind != "plane" and self.distance <= 0:
            raise ValueError("point/line sources need a positive distance")
        if self.kind == "line" and (self.count < 1 or self.half_length <= 0):
            raise ValueError("line sources need count >= 1 and half_length > 0")

    def positions(self) -> np.ndarray:
        """Source positions in the unrotated frame, shape ``(count, 2)``."""
        if self.kind == "plane":
            return np.zeros((0, 2))
        if self.kind == "point":
            return np.array([[0.0, -self.distance]])
        x1 = np.linspace(-self.half_length, self.half_length, self.count)
        return np.column_stack([x1, np.full_like(x1, -self.distance)])


@dataclass(frozen=True)
class AcquisitionConfig:
    """Angles, wavenumbers, sources and receivers of an experiment.

    Angles are ``2 pi j / n_angles``; receivers are ``m`` points on
    ``(2 l_M / m) I_m`` at height ``r_M``.  ``snr_db=None`` means noiseless.
    """

    n_angles: int
    wavenumbers: tuple
    r_m: float
    l_m: float
    m: int
    c0: float = 1.0
    source: SourceConfig = field(default_factory=SourceConfig)
    snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_angles < 1:
            raise ValueError("need at least one angle")
        ks = tuple(float(k) for k in np.atleast_1d(self.wavenumbers))
        if not ks or any(not (k > 0) for k in ks):
            raise ValueError("wavenumbers must be positive")
        object.__setattr__(self, "wavenumbers", ks)
        if self.l_m <= 0 or self.r_m <= 0 or self.c0 <= 0:
            raise ValueError("r_M, l_M and c0 must be positive")
        receiver_positions(self.l_m, self.m)

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_angles) / self.n_angles

    @property
    def receiver_x(self) -> np.ndarray:
        return receiver_positions(self.l_m, self.m)

    @property
    def omegas(self) -> tuple:
        return tuple(k * self.c0 for k in self.wavenumbers)

    def keys(self):
        """All ``(angle index, wavenumber index)`` pairs."""
        return [(ia, ik) for ik in range(len(self.wavenumbers)) for ia in range(self.n_angles)]


DATASET_KINDS = ("total", "incident", "scattered", "born-equivalent")


@dataclass(frozen=True, eq=False)
class Dataset:
    """One trace per ``(angle index, wavenumber index)`` of an acquisition."""

    acquisition: AcquisitionConfig
    kind: str
    traces: Mapping

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        traces = dict(self.traces)
        expected = set(self.acquisition.keys())
        if set(traces) != expected:
            missing = sorted(expected - set(traces))
            raise ValueError(f"dataset traces do not match acquisition (missing {missing[:4]})")
        x = self.acquisition.receiver_x
        for t in traces.values():
            if t.receiver_x.shape != x.shape or not np.allclose(t.receiver_x, x):
                raise ValueError("all traces must share the acquisition receiver geometry")
        object.__setattr__(self, "traces", traces)

    def __getitem__(self, key) -> Trace:
        return self.traces[key]

    def map(self, fn, kind: str | None = None) -> "Dataset":
        return Dataset(
            self.acquisition,
            kind or self.kind,
            {key: fn(key, t) for key, t in self.traces.items()},
        )


def psnr(reference: RealField, candidate: RealField, window: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB.

    ``10 log10(max|f|^2 / mean((f - g)^2))`` over all nodes, or over the
    centered square of side ``window`` when given.
    """
    _check_same_grid(reference, candidate)
    mask = reference.grid.window_mask(window)
    f = reference.values[mask]
    g = candidate.values[mask]
    if f.size == 0:
        raise ValueError("empty evaluation region")
    mse = np.mean((f - g) ** 2)
    if mse == 0:
        raise ValueError("zero MSE: candidate equals reference")
    return float(10.0 * np.log10(np.max(np.abs(f)) ** 2 / mse))


def relative_l2(a, b) -> float:
    """``||a - b|| / ||b||`` for arrays or fields."""
    a = getattr(a, "values", a)
    b = getattr(b, "values", b)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator seeded through ``SeedSequence`` (ints or int tuples)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def add_noise(trace: Trace, snr_db: float, seed) -> Trace:
    """Add circular complex white Gaussian noise at the given SNR.

    The noise variance is ``mean|u|^2 * 10^(-snr/10)``, split evenly between
    real and imaginary parts.  Draws come from PCG64 standard normals, so
    equal seeds give bit-identical output.
    """
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    u = trace.values
    if u.size == 0:
        raise ValueError("empty trace")
    power = np.mean(np.abs(u) ** 2)
    if power == 0:
        raise ValueError("SNR undefined for an all-zero trace")
    sigma = math.sqrt(power * 10.0 ** (-snr_db / 10.0) / 2.0)
    z = make_rng(seed).standard_normal((2, u.size))
    return trace.with_values(u + sigma * (z[0] + 1j * z[1]))
