"""Born and Rytov reconstruction pipelines built on the diffraction theorem.

Both pipelines turn traces into Born-equivalent data, extract k-space
samples of the reference-frequency potential and invert the NDFT with a
fixed number of CGNE iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fdt import fdt_samples
from .fields import Dataset, Grid, RealField, psnr
from .ndft import CgneInfo, cgne_invert
from .rytov import rytov_dataset

METHODS = ("born", "rytov")


def reconstruction_grid(n: int = 240, half_width: float | None = None) -> Grid:
    """Reconstruction grid; the default half width ``n / (16 sqrt 2)`` gives
    spacing ``1 / (8 sqrt 2)`` (about 10.6 for ``n = 240``)."""
    if half_width is None:
        half_width = n / (16 * np.sqrt(2))
    return Grid(float(half_width), int(n))


def calibrated(dataset: Dataset, calibration: dict | None) -> Dataset:
    """Multiply each trace by its calibration scalar (identity if ``None``)."""
    if not calibration:
        return dataset
    return dataset.map(lambda key, t: t.with_values(calibration[key] * t.values))


def born_equivalent(method: str, scattered: Dataset | None = None, total: Dataset | None = None,
                    incident: Dataset | None = None, calibration: dict | None = None) -> Dataset:
    """Born-equivalent traces for ``method``.

    ``"born"`` uses the (already calibrated) scattered traces.  ``"rytov"``
    needs total and incident traces; for point or line sources both are
    scaled by the calibration first so that the incident trace matches a
    unit plane wave.
    """
    if method == "born":
        if scattered is None:
            raise ValueError("born reconstruction needs scattered traces")
        return scattered
    if method == "rytov":
        if total is None or incident is None:
            raise ValueError("rytov reconstruction needs total and incident traces")
        return rytov_dataset(calibrated(total, calibration), calibrated(incident, calibration))
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass
class Reconstruction:
    potential: RealField
    info: CgneInfo
    n_samples: int

    def report(self, truth: RealField | None = None, window: float | None = None) -> dict:
        out = {
            "cg_iterations": self.info.iterations,
            "residuals": list(self.info.residuals),
            "n_samples": self.n_samples,
        }
        if truth is not None:
            out["psnr"] = psnr(truth, self.potential, window)
        return out


def reconstruct(data: Dataset, grid: Grid, iters: int = 20) -> Reconstruction:
    """CGNE inversion of the k-space samples of Born-equivalent ``data``."""
    samples = fdt_samples(data)
    f, info = cgne_invert(samples.points, samples.values, grid, iters)
    return Reconstruction(f, info, len(samples))
