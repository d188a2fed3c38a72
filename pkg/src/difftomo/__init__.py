"""Diffraction tomography with Born, Rytov and full-waveform reconstruction.

Submodules
----------
fields      grids, fields, traces, acquisitions, PSNR, noise
io          binary field files and trace datasets
phantom     disks, scenes, speed/potential conversion, rotation
special     Bessel and Hankel functions of orders 0 and 1
greens      2D Green's function and Born integrals
helmholtz   finite-difference Helmholtz solver and data simulation
fdt         trace DFT, diffraction-theorem k-space samples, coverage
ndft        nonuniform DFT and its CGNE inversion
rytov       phase unwrapping and Rytov preprocessing
recon       Born/Rytov reconstruction pipelines
fwi         adjoint-state full waveform inversion
recipes     experiment recipes; pipeline, cli, verify drive them
"""

from .fields import (
    AcquisitionConfig,
    ComplexField,
    Dataset,
    Grid,
    RealField,
    SourceConfig,
    Trace,
    make_grid,
    psnr,
)

__all__ = [
    "AcquisitionConfig",
    "ComplexField",
    "Dataset",
    "Grid",
    "RealField",
    "SourceConfig",
    "Trace",
    "make_grid",
    "psnr",
]
__version__ = "0.1.0"
