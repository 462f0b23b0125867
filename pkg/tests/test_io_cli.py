from __future__ import annotations

import json

import numpy as np
import pytest

from fixture_trees import lacunary_tree
from rieszwolff import io as rwio
from rieszwolff.cli import main
from rieszwolff.errors import InvalidArgumentError
from rieszwolff.measure import AtomicMeasure, build_cantor_measure


def test_measure_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    mu = AtomicMeasure(rng.normal(size=(50, 3)), rng.exponential(size=50), 2.5)
    path = tmp_path / "m.json"
    rwio.save_measure(path, mu, {"odd": np.arange(50) % 2 == 1})
    back, marks = rwio.load_measure(path)
    assert np.array_equal(back.positions, mu.positions) and np.array_equal(back.weights, mu.weights)
    assert back.s == mu.s and marks["odd"].sum() == 25


def test_tree_round_trip(tmp_path):
    tree = lacunary_tree(2)
    path = tmp_path / "t.json"
    rwio.save_tree(path, tree)
    back = rwio.load_tree(path)
    assert len(back.levels) == len(tree.levels)
    for a, b in zip(tree.levels, back.levels):
        for x, y in zip(a, b):
            assert np.array_equal(x.atoms, y.atoms) and x.radius == y.radius
    assert np.array_equal(back.rarefied_weights, tree.rarefied_weights)


def test_parsers():
    assert rwio.parse_window("0.5,inf").r_max == np.inf
    with pytest.raises(InvalidArgumentError):
        rwio.parse_window("1")
    with pytest.raises(InvalidArgumentError):
        rwio.parse_floats("1,a")
    mu = build_cantor_measure(2, 1.5, 2)
    assert rwio.parse_targets("grid:4x3", mu).shape == (12, 2)
    with pytest.raises(InvalidArgumentError):
        rwio.parse_targets("grid:4", mu)
    with pytest.raises(InvalidArgumentError):
        rwio.parse_targets("nowhere.csv", mu)
    assert rwio.dumps({"a": np.inf}).strip() == '{\n "a": "inf"\n}'


def run(argv):
    return main([str(a) for a in argv])


def test_generate_and_riesz(tmp_path, capsys):
    m = tmp_path / "c.json"
    assert run(["generate", "--d", 2, "--s", 1.5, "--depth", 3, "--out", m]) == 0
    assert len(rwio.load_measure(m)[0]) == 64
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    for out in (out1, out2):
        assert run(["riesz", "--measure", m, "--targets", "grid:16x16:margin=0.1", "--out", out]) == 0
    lines = out1.read_text().splitlines()
    assert lines[0] == "x,y,Rx,Ry,error_bound" and len(lines) == 257
    assert out1.read_bytes() == out2.read_bytes()
    assert run(["riesz", "--measure", m, "--targets", "atoms", "--mode", "fast", "--inner", 1e-3,
                "--out", tmp_path / "f.csv"]) == 0


def test_scales_wolff_capacity(tmp_path, capsys):
    m = tmp_path / "c.json"
    run(["generate", "--d", 2, "--s", 1.5, "--depth", 3, "--out", m])
    sc = tmp_path / "s.json"
    assert run(["scales", "--measure", m, "--delta", 0.25, "--window", "0.01,2", "--T", "1,2",
                "--q", "4,8", "--dump-intervals", 3, "--out", sc]) == 0
    rep = json.loads(sc.read_text())
    assert len(rep["intervals"]) == 3 and len(rep["exceptional"]) == 2
    assert run(["wolff", "--measure", m, "--window", "0.01,inf", "--energy",
                "--out", tmp_path / "w.csv"]) == 0
    assert "energy=" in capsys.readouterr().err
    cap = tmp_path / "k.json"
    assert run(["capacity", "--set", m, "--window", "0.0078125,inf", "--probes", 50,
                "--compare", "--out", cap]) == 0
    data = json.loads(cap.read_text())
    assert data["max_principle"]["passed"] and data["capacity"]["value"] > 0


def test_cantor_verify_lacunary(tmp_path):
    m, t, r = tmp_path / "lac.json", tmp_path / "tree.json", tmp_path / "rep.json"
    assert run(["--seed", 1, "generate", "--kind", "lacunary", "--d", 2, "--s", 1.5,
                "--depth", 3, "--out", m]) == 0
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"N": 2, "eps": 0.1, "M": 4.5, "delta": 0.15,
                                  "Delta": 1.0, "q": 12}))
    assert run(["cantor", "--measure", m, "--params", params, "--core", "leaf", "--out", t]) == 0
    assert run(["verify", "--tree", t, "--report", r]) == 0
    rep = json.loads(r.read_text())
    assert rep["passed"] and rep["mean_zero_worst_relative"] <= 1e-10


def test_exit_codes(tmp_path):
    assert run(["nonsense"]) == 1
    assert run([]) == 1
    assert run(["generate", "--d", 2, "--s", 2.5, "--depth", 2, "--out", tmp_path / "x.json"]) == 1
    m, t = tmp_path / "c.json", tmp_path / "t.json"
    run(["generate", "--d", 2, "--s", 1.5, "--depth", 3, "--out", m])
    assert run(["cantor", "--measure", m, "--core", "missing", "--out", t]) == 1
    assert run(["cantor", "--measure", m, "--out", t]) == 2
    assert run(["verify", "--tree", t, "--report", tmp_path / "r.json"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"N": 2, "bogus": 1}))
    assert run(["cantor", "--measure", m, "--params", bad, "--out", t]) == 1
