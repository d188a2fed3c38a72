"""Compare forward models on the same receiver line.

Writes receiver traces of the Helmholtz solver's scattered field, the
solver's Born field and the Born volume integral for a weak disk, then the
line-source versus plane-wave comparison.  Relative L2 distances to the
first model are printed; the CSV files hold the traces.

    python demos/forward_models.py [out_dir]
"""

import sys
from pathlib import Path

from difftomo import pipeline
from difftomo.recipes import load_recipe


def main(out_dir="demo_out/forward_models"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("compare-born", "compare-line-source"):
        summary = pipeline.cmd_compare_forward(load_recipe(name), out / f"{name}.csv")
        print(name)
        for model, err in summary["relative_l2_vs_first"].items():
            print(f"  {model:18s} vs {summary['models'][0]}: {err:.4f}")
    print(f"traces in {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
