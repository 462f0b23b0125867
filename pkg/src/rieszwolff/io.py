"""JSON and CSV serialisation of measures, trees and reports.

Floats are written with ``repr``, which is the shortest decimal that
reads back to the same double, so files round-trip bit for bit.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .cantor import CantorParams, CantorTree, Cell, LevelDiagnostics, TopCoverBall
from .errors import InvalidArgumentError
from .measure import AtomicMeasure
from .scales import ScaleWindow

FORMAT = "rieszwolff"


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    text = dumps(obj)
    if path in (None, "-"):
        import sys
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# measures

def measure_to_dict(mu: AtomicMeasure, marks: dict | None = None) -> dict:
    out = {"format": FORMAT, "kind": "measure", "d": mu.d, "s": mu.s,
           "positions": mu.positions.tolist(), "weights": mu.weights.tolist()}
    if marks:
        out["marks"] = {k: np.asarray(v).astype(bool).tolist() for k, v in marks.items()}
    return out


def measure_from_dict(data: dict) -> tuple[AtomicMeasure, dict]:
    try:
        d, s = int(data["d"]), float(data["s"])
        pos = np.array(data["positions"], dtype=float).reshape(-1, d)
        w = np.array(data["weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed measure: {exc}") from exc
    marks = {k: np.array(v, dtype=bool) for k, v in data.get("marks", {}).items()}
    return AtomicMeasure(pos, w, s, d), marks


def save_measure(path, mu: AtomicMeasure, marks: dict | None = None) -> None:
    write_json(path, measure_to_dict(mu, marks))


def load_measure(path) -> tuple[AtomicMeasure, dict]:
    return measure_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# trees

def _cell_to_dict(c: Cell) -> dict:
    return {"level": c.level, "atoms": c.atoms.tolist(), "core": c.core.tolist(),
            "center": c.center.tolist(), "center_atom": c.center_atom, "radius": c.radius,
            "dyadic_steps": c.dyadic_steps, "shrink_steps": c.shrink_steps,
            "shrink_factor": c.shrink_factor, "parent": c.parent, "top_ball": c.top_ball}


def _cell_from_dict(x: dict) -> Cell:
    return Cell(int(x["level"]), np.array(x["atoms"], dtype=np.intp),
                np.array(x["core"], dtype=np.intp), np.array(x["center"], dtype=float),
                int(x["center_atom"]), float(x["radius"]), int(x["dyadic_steps"]),
                int(x["shrink_steps"]), float(x["shrink_factor"]), int(x["parent"]),
                int(x["top_ball"]))


def tree_to_dict(tree: CantorTree, report=None, harness=None) -> dict:
    out = {
        "format": FORMAT, "kind": "cantor-tree",
        "measure": measure_to_dict(tree.measure),
        "params": tree.params.to_dict(),
        "core": tree.core.tolist(),
        "levels": [[_cell_to_dict(c) for c in level] for level in tree.levels],
        "top_covers": [[{"center": b.center.tolist(), "center_atom": b.center_atom,
                         "scale": b.scale, "parent": b.parent} for b in level]
                       for level in tree.top_covers],
        "diagnostics": [d.to_dict() for d in tree.diagnostics],
        "rarefied_weights": tree.rarefied_weights.tolist(),
        "retained_fraction": tree.retained_fraction,
        "failure": tree.failure,
    }
    if report is not None:
        out["verification"] = report.to_dict()
    if harness is not None:
        out["harness"] = harness.to_dict()
    return out


def tree_from_dict(data: dict) -> CantorTree:
    if data.get("kind") != "cantor-tree":
        raise InvalidArgumentError("file does not hold a Cantor tree")
    mu, _ = measure_from_dict(data["measure"])
    params = CantorParams(**data["params"])
    levels = [[_cell_from_dict(c) for c in level] for level in data["levels"]]
    tops = [[TopCoverBall(np.array(b["center"], dtype=float), int(b["center_atom"]),
                          float(b["scale"]), int(b["parent"])) for b in level]
            for level in data["top_covers"]]
    diags = []
    for d in data.get("diagnostics", []):
        d = {k: v for k, v in d.items() if k != "loss"}
        diags.append(LevelDiagnostics(**d))
    return CantorTree(mu, params, np.array(data["core"], dtype=np.intp), levels, tops,
                      diags, data.get("failure"))


def save_tree(path, tree: CantorTree, report=None, harness=None) -> None:
    write_json(path, tree_to_dict(tree, report, harness))


def load_tree(path) -> CantorTree:
    return tree_from_dict(read_json(path))


def load_params(path) -> CantorParams:
    data = read_json(path)
    try:
        return CantorParams(**data)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameter file: {exc}") from exc


# ---------------------------------------------------------------------------
# small text formats

def parse_window(text: str) -> ScaleWindow:
    """'rmin,rmax' with 'inf' allowed for rmax."""
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError as exc:
        raise InvalidArgumentError(f"window must be 'rmin,rmax', got {text!r}") from exc
    return ScaleWindow(lo, hi)


def parse_floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise InvalidArgumentError(f"expected a comma-separated list, got {text!r}") from exc


def parse_targets(spec: str, mu: AtomicMeasure) -> np.ndarray:
    """'atoms', 'grid:16x16[:margin=0.1]' over the measure's bounding box,
    or a path to a JSON list / CSV of points."""
    if spec == "atoms":
        return mu.positions.copy()
    if spec.startswith("grid:"):
        parts = spec.split(":")[1:]
        try:
            counts = [int(n) for n in parts[0].split("x")]
        except ValueError as exc:
            raise InvalidArgumentError(f"bad grid spec {spec!r}") from exc
        margin = 0.0
        for opt in parts[1:]:
            key, _, val = opt.partition("=")
            if key != "margin":
                raise InvalidArgumentError(f"unknown grid option {key!r}")
            margin = float(val)
        if len(counts) != mu.d or min(counts) < 1:
            raise InvalidArgumentError(f"grid needs {mu.d} positive counts")
        if len(mu):
            lo, hi = mu.positions.min(axis=0), mu.positions.max(axis=0)
        else:
            lo, hi = np.zeros(mu.d), np.ones(mu.d)
        pad = margin * (hi - lo)
        axes = [np.linspace(a - p, b + p, n) for a, b, p, n in zip(lo, hi, pad, counts)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, mu.d)
    path = Path(spec)
    if not path.exists():
        raise InvalidArgumentError(f"targets {spec!r} is neither a spec nor a file")
    if path.suffix == ".json":
        pts = np.array(read_json(path), dtype=float)
    else:
        pts = np.loadtxt(path, delimiter=",", ndmin=2)
    return pts.reshape(-1, mu.d)


def csv_text(header: list[str], rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in row])
    return buf.getvalue()
