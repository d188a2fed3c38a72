"""Bessel functions J0, J1, Y0, Y1 and the Hankel function H0^(1).

Small arguments use the ascending power series, large arguments the
Hankel asymptotic expansion written in modulus/phase form

    J_nu(x) = sqrt(2 / (pi x)) (P cos chi - Q sin chi)
    Y_nu(x) = sqrt(2 / (pi x)) (P sin chi + Q cos chi)
    chi = x - (nu / 2 + 1 / 4) pi

with P, Q truncated at their smallest term.  The crossover sits at x = 12,
where the asymptotic series still reaches ~1e-12 and the ascending series
loses fewer than four digits to cancellation.
"""

from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.57721566490153286061
CROSSOVER = 12.0
_SERIES_TERMS = 60
_ASYM_TERMS = 26


def _as_array(x):
    x = np.asarray(x, dtype=float)
    return x, x.ndim == 0


def _series(x, nu):
    """Ascending series for J_nu and Y_nu (nu in {0, 1})."""
    q = -(x * x) / 4.0
    lg = np.log(x / 2.0) + EULER_GAMMA
    if nu == 0:
        # J0 = sum q^k / (k!)^2
        # Y0 = (2/pi) [lg J0 + sum_{k>=1} -H_k q^k / (k!)^2]
        term = np.ones_like(x)
        j = term.copy()
        ysum = np.zeros_like(x)
        harm = 0.0
        for k in range(1, _SERIES_TERMS):
            term = term * q / (k * k)
            harm += 1.0 / k
            j = j + term
            ysum = ysum - harm * term
        y = (2.0 / np.pi) * (lg * j + ysum)
        return j, y
    # J1 = (x/2) sum q^k / (k! (k+1)!)
    # Y1 = (2/pi) lg J1 - 2/(pi x) - (x/(2 pi)) sum q^k (H_k + H_{k+1}) / (k! (k+1)!)
    term = np.ones_like(x)
    s = term.copy()
    harm_k, harm_k1 = 0.0, 1.0
    ysum = (harm_k + harm_k1) * term
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + 1))
        harm_k += 1.0 / k
        harm_k1 += 1.0 / (k + 1)
        s = s + term
        ysum = ysum + (harm_k + harm_k1) * term
    j = (x / 2.0) * s
    y = (2.0 / np.pi) * lg * j - 2.0 / (np.pi * x) - (x / (2.0 * np.pi)) * ysum
    return j, y


def _asymptotic(x, nu):
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    qq = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _ASYM_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(term)
        # stop each point at its smallest term
        active &= mag < prev
        prev = np.where(active, mag, prev)
        contrib = np.where(active, term, 0.0)
        if k % 2 == 1:
            sign = 1.0 if (k // 2) % 2 == 0 else -1.0
            qq = qq + sign * contrib
        else:
            sign = -1.0 if (k // 2) % 2 == 1 else 1.0
            p = p + sign * contrib
    chi = x - (nu / 2.0 + 0.25) * np.pi
    amp = np.sqrt(2.0 / (np.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - qq * s), amp * (p * s + qq * c)


def _jy(x, nu):
    x, scalar = _as_array(x)
    j = np.empty_like(x)
    y = np.empty_like(x)
    small = x <= CROSSOVER
    if np.any(small):
        j[small], y[small] = _series(x[small], nu)
    if np.any(~small):
        j[~small], y[~small] = _asymptotic(x[~small], nu)
    if scalar:
        return j[()], y[()]
    return j, y


def _check_positive(x):
    if np.any(np.asarray(x) <= 0):
        raise ValueError("Y_n and H_n^(1) are singular for x <= 0")


def bessel_j0(x):
    x, scalar = _as_array(x)
    if np.any(x < 0):
        raise ValueError("bessel_j0 is implemented for x >= 0")
    j = np.ones_like(x)
    pos = x > 0
    if np.any(pos):
        j[pos] = _jy(x[pos], 0)[0]
    return j[()] if scalar else j


def bessel_j1(x):
    x, scalar = _as_array(x)
    if np.any(x < 0):
        raise ValueError("bessel_j1 is implemented for x >= 0")
    j = np.zeros_like(x)
    pos = x > 0
    if np.any(pos):
        j[pos] = _jy(x[pos], 1)[0]
    return j[()] if scalar else j


def bessel_y0(x):
    _check_positive(x)
    return _jy(x, 0)[1]


def bessel_y1(x):
    _check_positive(x)
    return _jy(x, 1)[1]


def hankel_h0_1(x):
    """H0^(1)(x) = J0(x) + i Y0(x) for x > 0."""
    _check_positive(x)
    j, y = _jy(x, 0)
    return j + 1j * y


def hankel_h1_1(x):
    _check_positive(x)
    j, y = _jy(x, 1)
    return j + 1j * y
