"""How much of k-space does an experiment see?

A single frequency fills the disk of radius sqrt(2) k0 with rotated
semicircles.  Adding lower frequencies fills it with nested semicircles,
which matters for the reconstruction only where the single-frequency
coverage is sparse.  The script prints coverage statistics and writes the
sample positions as CSV for plotting.

    python demos/kspace_coverage.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from difftomo.fdt import coverage_geometry

K0, L_M, M = 2 * np.pi, 10.0, 200


def main(out_dir="demo_out/kspace"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    angles = 2 * np.pi * np.arange(40) / 40
    setups = {
        "single": (K0,),
        "f07": (0.7 * K0,),
        "five": tuple(K0 * np.array([0.2, 0.4, 0.6, 0.8, 1.0])),
    }
    radius = np.sqrt(2) * K0
    print(f"{'setup':8s} {'samples':>8s} {'max |y|':>9s} {'fill (cell 0.2)':>16s}")
    for name, ks in setups.items():
        cs = coverage_geometry(ks, angles, M, L_M, closed=True)
        fill = cs.disk_fill_fraction(radius, 0.2)
        print(f"{name:8s} {len(cs):8d} {cs.max_norm():9.4f} {fill:16.3f}")
        cs.to_csv(out / f"coverage_{name}.csv")
    print(f"sqrt(2) k0 = {radius:.4f}; CSV files in {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
