import json
import subprocess
import sys

import numpy as np
import pytest

from difftomo import cli, pipeline
from difftomo.fields import Grid, RealField
from difftomo.helmholtz import SolverError
from difftomo.io import write_field
from difftomo.recipes import Recipe, RecipeError, builtin_recipes, load_recipe


def _run(*argv):
    return cli.main([str(a) for a in argv])


# -- recipes ---------------------------------------------------------------------

@pytest.mark.parametrize("name", builtin_recipes())
def test_builtin_recipes_load(name):
    r = load_recipe(name)
    assert r.name == name
    assert Recipe.from_dict(json.loads(json.dumps(r.to_dict()))).to_dict() == r.to_dict()


def test_recipe_validation_errors():
    base = load_recipe("zero-contrast").to_dict()
    bad = [
        {**base, "extra": {}},
        {k: v for k, v in base.items() if k != "phantom"},
        {**base, "acquisition": {**base["acquisition"], "angles": 3}},
        {**base, "reconstruction": {**base["reconstruction"], "method": "radon"}},
        {**base, "reconstruction": {**base["reconstruction"], "cg_iters": 0}},
        {**base, "phantom": {"kind": "square"}},
        {**base, "compare": {**base["compare"], "models": ["magic"]}},
        {**base, "reconstruction": {**base["reconstruction"], "method": "fwi"},
         "fwi": {**base["fwi"], "frequencies": [3.0]}},
    ]
    for d in bad:
        with pytest.raises(RecipeError):
            Recipe.from_dict(d)


def test_recipe_builders():
    r = load_recipe("disk45x5-born")
    acq = r.acquisition_config()
    assert acq.wavenumbers == (2 * np.pi,)
    assert r.max_potential() == 5.0
    assert r.speed_min() == pytest.approx(0.9421, abs=5e-5)
    g = Grid(6.0, 64)
    assert r.potential(g).values.max() == 5.0
    multi = load_recipe("fwi-disk45x5-multi")
    assert multi.fwi_wavenumbers() == tuple(sorted(multi.fwi_wavenumbers()))


# -- exit codes ------------------------------------------------------------------

def test_forward_reconstruct_render_round_trip(tmp_path, capsys):
    assert _run("forward", "zero-contrast", "--out", tmp_path / "d") == 0
    assert _run("reconstruct", "zero-contrast", "--data", tmp_path / "d", "--out",
                tmp_path / "r", "--no-timings") == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["psnr"] is None and report["cg_iterations"] == 0
    assert _run("render", tmp_path / "r" / "reconstruction.fld", "--out", tmp_path / "img.pgm") == 0
    assert (tmp_path / "img.pgm").read_bytes().startswith(b"P5\n64 64\n255\n")
    assert _run("recipes") == 0
    assert "zero-contrast" in capsys.readouterr().out


def test_exit_code_invalid_input(tmp_path):
    assert _run("forward", "no-such-recipe", "--out", tmp_path) == 2
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"name": "x", "phantom": {"kind": "none"}, "typo": 1}))
    assert _run("forward", p, "--out", tmp_path / "o") == 2
    write_field(tmp_path / "f.fld", RealField(Grid(1.0, 4), np.zeros((4, 4))))
    assert _run("render", tmp_path / "f.fld", "--out", tmp_path / "x.pgm", "--vmin", "1",
                "--vmax", "0") == 2
    with pytest.raises(SystemExit) as exc:
        _run("reconstruct", "zero-contrast")
    assert exc.value.code == 2


def test_exit_code_numerical_failure(tmp_path, monkeypatch):
    def boom(recipe, out_dir):
        raise SolverError("relative residual 1e-3 above 1e-8")

    monkeypatch.setattr(pipeline, "cmd_forward", boom)
    assert _run("forward", "zero-contrast", "--out", tmp_path) == 3


def test_exit_code_io(tmp_path):
    assert _run("reconstruct", "zero-contrast", "--data", tmp_path / "missing", "--out",
                tmp_path / "r") == 4
    (tmp_path / "junk.fld").write_bytes(b"not a field file")
    assert _run("render", tmp_path / "junk.fld", "--out", tmp_path / "x.pgm") == 4
    assert _run("forward", tmp_path / "missing.json", "--out", tmp_path / "o") == 4


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "difftomo", "recipes"], capture_output=True,
                         text=True, check=False)
    assert out.returncode == 0
    assert "disk2-born" in out.stdout.split()


# -- determinism -----------------------------------------------------------------

def _tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes()
            for p in sorted(path.rglob("*")) if p.is_file()}


def test_forward_and_reconstruct_are_byte_identical(tmp_path):
    for run in ("a", "b"):
        assert _run("forward", "zero-contrast", "--out", tmp_path / run / "d") == 0
        assert _run("reconstruct", "zero-contrast", "--data", tmp_path / run / "d",
                    "--out", tmp_path / run / "r", "--no-timings") == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


# -- images ----------------------------------------------------------------------

def test_gray_mapping():
    v = np.array([-1.0, 0.0, 0.5, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(pipeline.to_gray(v, 0.0, 2.0), [0, 0, 64, 128, 255, 255])
    np.testing.assert_array_equal(pipeline.to_gray(v, 1.0, 1.0), np.full(6, 128))
    with pytest.raises(ValueError):
        pipeline.to_gray(v, 1.0, 0.0)


def test_render_orientation_and_window(tmp_path):
    g = Grid(2.0, 8)
    x1, x2 = g.mesh()
    write_field(tmp_path / "f.fld", RealField(g, x2))
    info = pipeline.cmd_render(tmp_path / "f.fld", tmp_path / "f.pgm")
    data = (tmp_path / "f.pgm").read_bytes()
    header = b"P5\n8 8\n255\n"
    img = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(8, 8)
    assert data.startswith(header)
    # top row holds the largest x2
    assert np.all(img[0] == 255) and np.all(img[-1] == 0)
    assert info["vmin"] == x2.min() and info["vmax"] == x2.max()
    info = pipeline.cmd_render(tmp_path / "f.fld", tmp_path / "w.pgm", window=2.0)
    assert info["width"] < 8


# -- forward-model comparison ----------------------------------------------------

def _csv(path):
    import csv

    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_compare_born_models(tmp_path):
    assert _run("compare-forward", "compare-born", "--out", tmp_path / "c.csv") == 0
    header, data = _csv(tmp_path / "c.csv")
    assert header[0] == "x1" and len(header) == 7
    assert len(data) == 200
    summary = json.loads((tmp_path / "c.json").read_text())
    assert summary["models"][0] == "born-pde"
    assert summary["relative_l2_vs_first"]["born-convolution"] <= 0.10


def test_compare_same_model_twice_is_zero(tmp_path):
    r = load_recipe("compare-born")
    r.compare["models"] = ["born-convolution", "born-convolution"]
    summary = pipeline.cmd_compare_forward(r, tmp_path / "c.csv")
    assert summary["relative_l2_vs_first"]["born-convolution"] == 0.0


def test_compare_line_source_against_plane_wave(tmp_path):
    summary = pipeline.cmd_compare_forward(load_recipe("compare-line-source"), tmp_path / "c.csv")
    assert summary["relative_l2_vs_first_central"]["line-source"] <= 0.15
