import json
import math
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlab.cli import ExperimentConfig, main
from eqlab.grid import DiscreteMeasure, GridSpec
from eqlab.io import (dumps, read_measure_csv, read_potential_csv, write_json,
                      write_measure_csv, write_potential_csv)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_measure_csv_roundtrip_is_exact(seed):
    g = GridSpec.centered(2, 1.3, 7)
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(g.size) * 0.5).reshape(g.shape)
    m = DiscreteMeasure(g, w)
    with tempfile.TemporaryDirectory() as d:
        p = write_measure_csv(Path(d) / "m.csv", m)
        back = read_measure_csv(p, g)
    assert np.array_equal(back.weights, m.weights)


def test_measure_csv_header_and_mismatch(tmp_path):
    g = GridSpec.centered(1, 1.0, 4)
    p = write_measure_csv(tmp_path / "m.csv", DiscreteMeasure.point_mass(g, (2,)))
    assert p.read_text().splitlines()[0] == "i0,x0,w"
    with pytest.raises(ValueError):
        read_measure_csv(p, GridSpec.centered(1, 2.0, 4))


def test_potential_csv_roundtrip(tmp_path):
    g = GridSpec.centered(2, 1.0, 5)
    v = np.arange(25.0).reshape(5, 5) / 7
    write_potential_csv(tmp_path / "v.csv", g, v)
    assert np.array_equal(read_potential_csv(tmp_path / "v.csv", g), v)


def test_json_is_sorted_and_leaves_no_temp_files(tmp_path):
    write_json(tmp_path / "a.json", {"b": np.float64(1.5), "a": [np.int64(2), math.inf]})
    text = (tmp_path / "a.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [2, "inf"], "b": 1.5}
    assert [p.name for p in tmp_path.iterdir()] == ["a.json"]
    assert dumps({"x": True}) == '{\n  "x": true\n}\n'


def test_config_parsing(tmp_path):
    cfg = ExperimentConfig.from_string("[kernel]\nvariant = riesz  ; Riesz family\ndim = 1\nb = -0.5\n"
                                       "[power]\nterms = [(1, -2.5), (1, -2.2)]\n",
                                       base=tmp_path / "exp.ini")
    (tmp_path / "w.csv").write_text("0,1\n")
    assert cfg.section("kernel") == {"variant": "riesz", "dim": 1, "b": -0.5}
    assert cfg.section("power")["terms"] == [(1, -2.5), (1, -2.2)]
    assert cfg.resolve("w.csv") == tmp_path / "w.csv"


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_cli_kernel_check_exit_codes(tmp_path):
    assert run_cli("kernel-check", "--config", CONFIGS / "riesz3d_check.ini", "--out", tmp_path / "a") == 0
    cert = json.loads((tmp_path / "a" / "certificate.json").read_text())
    assert cert["is_essentially_convex"] is True
    assert run_cli("kernel-check", "--config", CONFIGS / "riesz3d_superharmonic.ini",
                   "--out", tmp_path / "b") == 2
    assert run_cli("kernel-check", "--config", tmp_path / "missing.ini", "--out", tmp_path / "c") == 1
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert manifest["exit_code"] == 1


def test_cli_minimize_and_el_verify(tmp_path):
    out = tmp_path / "min"
    assert run_cli("minimize", "--config", CONFIGS / "balayage_1d.ini", "--out", out) == 0
    for name in ("measure.csv", "trace.csv", "potential.csv", "el_report.json", "manifest.json"):
        assert (out / name).exists()
    rep = json.loads((out / "el_report.json").read_text())
    assert rep["el"]["pass"] and rep["l1_to_omega"] <= 0.05
    trace = np.loadtxt(out / "trace.csv", delimiter=",", skiprows=1)
    assert trace.shape[1] == 4
    assert run_cli("el-verify", "--config", CONFIGS / "balayage_1d.ini", "--out", tmp_path / "el",
                   "--measure", out / "measure.csv") == 0


def test_cli_not_converged_exit_code(tmp_path):
    text = (CONFIGS / "well_1d.ini").read_text() + "\n[solver]\nmax_iters = 1\n"
    cfg = tmp_path / "hard.ini"
    cfg.write_text(text)
    assert run_cli("minimize", "--config", cfg, "--out", tmp_path / "o") == 3


def test_cli_repr_and_fourier(tmp_path):
    assert run_cli("repr", "--config", CONFIGS / "riesz3d_check.ini", "--out", tmp_path) == 0
    rows = np.loadtxt(tmp_path / "repr.csv", delimiter=",", skiprows=1, ndmin=2)
    assert len(rows) == 5
    assert run_cli("fourier", "--config", CONFIGS / "riesz3d_check.ini", "--out", tmp_path) == 0
    assert (tmp_path / "fourier.csv").exists()


def test_cli_probe_exist(tmp_path):
    assert run_cli("probe", "exist", "--config", CONFIGS / "exist_mass2.ini", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["verdict"] == "exists" and rep["probe"] == "exist"
    for f in rep["witness_files"]:
        assert (tmp_path / f).exists()
