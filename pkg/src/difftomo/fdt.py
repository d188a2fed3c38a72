"""Fourier diffraction theorem: trace spectra, k-space samples, coverage.

A Born-equivalent trace ``u`` measured on ``x2 = r_M`` under incidence
``R_alpha e2`` with wavenumber ``k0`` determines the Fourier transform of
the potential ``f_k0`` at that wavenumber on a rotated semicircle::

    F f_k0(R_alpha (k1, kappa - k0)) = -i sqrt(2/pi) kappa exp(-i kappa r_M) F1 u(k1)

with ``kappa = sqrt(k0^2 - k1^2)`` and ``|k1| < k0``.  Potentials scale with
the square of the wavenumber, so every sample is reported for the reference
frequency ``omega / 2 pi = 1``: the unknown is ``f_ref = (k_ref / k0)^2 f_k0``
with ``k_ref = 2 pi / c0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .fields import Dataset, Trace, centered_indices

EVANESCENT_EPS = 1e-6
REFERENCE_FREQUENCY = 1.0


def kappa(k1, k0: float):
    """``sqrt(k0^2 - k1^2)``; raises for evanescent ``|k1| > k0``."""
    k1 = np.asarray(k1, dtype=float)
    if np.any(np.abs(k1) > k0):
        raise ValueError("|k1| > k0 is evanescent")
    out = np.sqrt(k0 * k0 - k1 * k1)
    return out[()] if out.ndim == 0 else out


def dft_frequencies(l_m: float, m: int) -> np.ndarray:
    """The DFT grid ``(pi / l_M) I_m``."""
    return (np.pi / l_m) * centered_indices(m)


def _check_receivers(trace: Trace, l_m: float) -> int:
    m = len(trace)
    expected = (2.0 * l_m / m) * centered_indices(m)
    if m % 2 or not np.allclose(trace.receiver_x, expected, rtol=0, atol=1e-9 * l_m):
        raise ValueError("trace is not sampled on the uniform grid (2 l_M / m) I_m")
    return m


def trace_dft(trace: Trace, l_m: float) -> np.ndarray:
    """``(2 pi)^(-1/2) (2 l_M / m) sum_x u(x) exp(-i x k1)`` on ``(pi / l_M) I_m``.

    Output index ``j`` corresponds to ``k1 = (j - m/2) pi / l_M``.  Both index
    sets are centered, so the sum is an ordinary FFT between shifted arrays.
    """
    m = _check_receivers(trace, l_m)
    spec = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(trace.values)))
    return (2.0 * l_m / m) / np.sqrt(2 * np.pi) * spec


def trace_dft_direct(trace: Trace, l_m: float) -> np.ndarray:
    """Direct ``O(m^2)`` evaluation of :func:`trace_dft` (reference)."""
    m = _check_receivers(trace, l_m)
    k1 = dft_frequencies(l_m, m)
    x = trace.receiver_x
    phase = np.exp(-1j * np.outer(k1, x))
    return (2.0 * l_m / m) / np.sqrt(2 * np.pi) * (phase @ trace.values)


def _rotate(points: np.ndarray, alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return points @ np.array([[c, s], [-s, c]])


@dataclass(frozen=True, eq=False)
class CoverageSet:
    """k-space sample points with provenance and optional values.

    ``points`` has shape ``(M, 2)``; ``angle``, ``k0`` and ``k1_index``
    record the ``(alpha, k0, DFT bin)`` each point came from.  ``values``
    (if present) are samples of ``F f_ref``.
    """

    points: np.ndarray
    angle: np.ndarray
    k0: np.ndarray
    k1_index: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.points)
        for name in ("angle", "k0", "k1_index"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match the number of points")
        if self.values is not None and len(self.values) != n:
            raise ValueError("values length does not match the number of points")

    def __len__(self):
        return len(self.points)

    @property
    def norms(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def max_norm(self) -> float:
        return float(self.norms.max()) if len(self) else 0.0

    def with_values(self, values) -> "CoverageSet":
        return replace(self, values=np.asarray(values, dtype=complex))

    def disk_fill_fraction(self, radius: float, cell: float) -> float:
        """Fraction of ``cell``-sized boxes inside the disk of ``radius``
        that hold at least one sample."""
        n = int(np.ceil(radius / cell))
        centers = (np.arange(-n, n) + 0.5) * cell
        c1, c2 = np.meshgrid(centers, centers)
        inside = np.hypot(c1, c2) <= radius
        idx = np.floor(self.points / cell).astype(int) + n
        ok = np.all((idx >= 0) & (idx < 2 * n), axis=1)
        hit = np.zeros(c1.shape, dtype=bool)
        hit[idx[ok, 1], idx[ok, 0]] = True
        return float(np.count_nonzero(hit & inside) / np.count_nonzero(inside))

    def to_csv(self, path) -> None:
        """Columns ``y1, y2, re, im, alpha, k0`` (``re, im`` empty without values)."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y1", "y2", "re", "im", "alpha", "k0"])
            for j, (y1, y2) in enumerate(self.points):
                if self.values is None:
                    re = im = ""
                else:
                    re, im = repr(float(self.values[j].real)), repr(float(self.values[j].imag))
                w.writerow([repr(float(y1)), repr(float(y2)), re, im,
                            repr(float(self.angle[j])), repr(float(self.k0[j]))])


def _kept_bins(k1: np.ndarray, k0: float, closed: bool = False) -> np.ndarray:
    if closed:
        return np.flatnonzero(np.abs(k1) <= k0 * (1 + 1e-12))
    return np.flatnonzero(np.abs(k1) < k0 * (1 - EVANESCENT_EPS))


def coverage_geometry(wavenumbers, angles, m: int, l_m: float,
                      closed: bool = False) -> CoverageSet:
    """All points ``R_alpha (k1, kappa - k0)`` for the given acquisition.

    By default the bins match :func:`fdt_samples` (``|k1| < k0`` up to the
    evanescent cutoff).  ``closed=True`` keeps ``|k1| <= k0``, i.e. the
    semicircle endpoints ``(+-k0, -k0)`` whenever ``k0`` falls on the DFT
    grid; these carry no usable data (``kappa = 0``) but belong to the
    covered set.
    """
    k1_all = dft_frequencies(l_m, m)
    pts, ang, ks, idx = [], [], [], []
    for k0 in wavenumbers:
        keep = _kept_bins(k1_all, k0, closed)
        k1 = np.clip(k1_all[keep], -k0, k0)
        base = np.column_stack([k1, kappa(k1, k0) - k0])
        for alpha in angles:
            pts.append(_rotate(base, alpha))
            ang.append(np.full(len(k1), alpha))
            ks.append(np.full(len(k1), k0))
            idx.append(keep)
    if not pts:
        return CoverageSet(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0, dtype=int))
    return CoverageSet(np.concatenate(pts), np.concatenate(ang), np.concatenate(ks),
                       np.concatenate(idx))


def in_interval_coverage(y, k_min: float, k_max: float) -> np.ndarray:
    """Membership in the unrotated coverage for ``K = [k_min, k_max]``.

    The covered set is ``|y1| <= k_max`` and
    ``sqrt(k_max^2 - y1^2) - k_max >= y2 >= lower(y1)`` where ``lower`` is
    ``-|y1|`` for ``|y1| >= k_min`` and ``sqrt(k_min^2 - y1^2) - k_min``
    otherwise.
    """
    if not 0 < k_min <= k_max:
        raise ValueError("need 0 < k_min <= k_max")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    y1, y2 = np.abs(y[:, 0]), y[:, 1]
    inside = y1 <= k_max
    upper = np.sqrt(np.clip(k_max**2 - y1**2, 0, None)) - k_max
    lower = np.where(y1 >= k_min, -y1, np.sqrt(np.clip(k_min**2 - y1**2, 0, None)) - k_min)
    return inside & (upper >= y2) & (y2 >= lower)


def reference_wavenumber(c0: float = 1.0) -> float:
    return 2 * np.pi * REFERENCE_FREQUENCY / c0


def fdt_samples(dataset: Dataset) -> CoverageSet:
    """k-space samples of ``F f_ref`` from Born-equivalent traces."""
    if dataset.kind not in ("born-equivalent", "scattered"):
        raise ValueError(f"expected a born-equivalent dataset, got {dataset.kind!r}")
    acq = dataset.acquisition
    k_ref = reference_wavenumber(acq.c0)
    geom = coverage_geometry(acq.wavenumbers, acq.angles, acq.m, acq.l_m)
    k1_all = dft_frequencies(acq.l_m, acq.m)
    values = []
    for ik, k0 in enumerate(acq.wavenumbers):
        keep = _kept_bins(k1_all, k0)
        kap = kappa(k1_all[keep], k0)
        # the theorem yields F f_k0; f_k0 = (k0 / k_ref)^2 f_ref
        factor = -1j * np.sqrt(2 / np.pi) * kap * np.exp(-1j * kap * acq.r_m)
        factor = factor * (k_ref / k0) ** 2
        for ia in range(acq.n_angles):
            if (ia, ik) not in dataset.traces:
                raise ValueError(f"missing trace for angle {ia}, wavenumber {ik}")
            spec = trace_dft(dataset[(ia, ik)], acq.l_m)
            values.append(factor * spec[keep])
    return geom.with_values(np.concatenate(values) if values else np.zeros(0, complex))


def disk_spectrum(y, radius: float, amplitude: float):
    """``F`` of ``amplitude * 1_{|x| < radius}`` with the ``(2 pi)^-1`` convention:
    ``amplitude * radius * J1(radius |y|) / |y|``."""
    from .special import bessel_j1

    r = np.hypot(*np.atleast_2d(np.asarray(y, dtype=float)).T)
    out = np.full(r.shape, amplitude * radius**2 / 2.0)
    nz = r > 0
    out[nz] = amplitude * radius * bessel_j1(radius * r[nz]) / r[nz]
    return out
