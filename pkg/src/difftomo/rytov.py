"""Rytov preprocessing: turn total-field traces into Born-equivalent data."""

from __future__ import annotations

import numpy as np

from .fields import Dataset, Trace


def unwrap_1d(phases) -> np.ndarray:
    """Remove ``2 pi`` jumps so that successive differences lie in ``(-pi, pi]``.

    Each difference ``d`` is replaced by ``d - 2 pi ceil((d - pi) / (2 pi))``
    and the result is re-accumulated from the first sample, which is the same
    as shifting the whole tail by ``-/+ 2 pi`` at every jump.
    """
    p = np.asarray(phases, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("expected a nonempty 1D sequence")
    d = np.diff(p)
    shift = 2 * np.pi * np.ceil((d - np.pi) / (2 * np.pi))
    return np.concatenate([p[:1], p[0] + np.cumsum(d - shift)])


def rytov_to_born(total: Trace, incident: Trace) -> Trace:
    """``u_inc (i unwrap(arg(u_tot / u_inc)) + ln|u_tot / u_inc|)``."""
    if total.values.shape != incident.values.shape or not np.array_equal(
        total.receiver_x, incident.receiver_x
    ):
        raise ValueError("total and incident traces must share the receiver geometry")
    inc = incident.values
    if np.any(inc == 0):
        raise ValueError("incident trace vanishes at a receiver")
    ratio = total.values / inc
    mag = np.abs(ratio)
    if np.any(mag == 0):
        raise ValueError("total field vanishes at a receiver (log diverges)")
    phase = unwrap_1d(np.angle(ratio))
    return total.with_values(inc * (1j * phase + np.log(mag)))


def rytov_dataset(total: Dataset, incident: Dataset) -> Dataset:
    """Apply :func:`rytov_to_born` to every trace pair."""
    if set(total.traces) != set(incident.traces):
        raise ValueError("datasets cover different (angle, wavenumber) pairs")
    return total.map(lambda key, t: rytov_to_born(t, incident[key]), kind="born-equivalent")
