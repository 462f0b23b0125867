"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 construction failure,
3 failed assertion or verification.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings

import numpy as np

from . import _kernels
from . import io as rwio
from .errors import ConstructionFailure, InvalidArgumentError, RieszWolffError, VerificationFailure

log = logging.getLogger("rieszwolff")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InvalidArgumentError(message)


def _out_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    from .measure import build_cantor_measure, build_lacunary_measure
    if args.kind == "cantor":
        mu = build_cantor_measure(args.d, args.s, args.depth, args.ratio, args.jitter_seed)
        rwio.save_measure(args.out, mu)
    else:
        mu, leaf = build_lacunary_measure(args.d, args.s, args.depth, args.branches,
                                          args.spread, args.ratio or 1e-3,
                                          args.core_fraction, args.seed)
        rwio.save_measure(args.out, mu, {"leaf": leaf})
    log.info("wrote %d atoms", len(mu))
    return 0


def cmd_riesz(args) -> int:
    from .riesz import riesz_field_direct, riesz_field_fast
    mu, _ = rwio.load_measure(args.measure)
    pts = rwio.parse_targets(args.targets, mu)
    if args.mode == "direct":
        evals = riesz_field_direct(mu, pts, args.inner)
    else:
        evals = riesz_field_fast(mu, pts, args.tol, args.theta, args.inner)
    axes = "xyz"[:mu.d]
    header = list(axes) + [f"R{a}" for a in axes] + ["error_bound"]
    rows = [list(p) + list(e.value) + [e.error_bound] for p, e in zip(pts, evals)]
    _out_text(args.out, rwio.csv_text(header, rows))
    return 0


def cmd_scales(args) -> int:
    from .scales import exceptional_sweep, superlevel_scale_set, weak_type_statistic
    mu, _ = rwio.load_measure(args.measure)
    window = rwio.parse_window(args.window)
    report: dict = {"delta": args.delta, "window": [window.r_min, window.r_max]}
    Ts = rwio.parse_floats(args.T)
    weak = weak_type_statistic(mu, args.delta, Ts, window)
    report["weak_type"] = {"T": weak.Ts, "mass_above": weak.mass_above,
                           "alpha_hat": weak.alpha_hat, "total_mass": weak.total_mass}
    if args.q:
        center = mu.positions[args.center]
        r0 = args.r0 if args.r0 else 2.0 * max(mu.diameter(), 1e-300)
        rows = exceptional_sweep(mu, center, r0, args.delta, [int(q) for q in rwio.parse_floats(args.q)])
        report["exceptional"] = [{"q": q, "fraction": f, "fraction_times_q": fq} for q, f, fq in rows]
    if args.dump_intervals:
        rng = np.random.default_rng(args.seed)
        count = min(args.dump_intervals, len(mu))
        picks = np.sort(rng.choice(len(mu), size=count, replace=False))
        report["intervals"] = []
        for i in picks:
            ss = superlevel_scale_set(mu, mu.positions[i], args.delta, window)
            report["intervals"].append({"atom": int(i), "intervals": ss.intervals,
                                        "log_measure": ss.log_measure})
    rwio.write_json(args.out, report)
    return 0


def cmd_wolff(args) -> int:
    from .gauges import parse_gauge, wolff_energy, wolff_potentials
    mu, _ = rwio.load_measure(args.measure)
    window = rwio.parse_window(args.window)
    g = parse_gauge(args.gauge, mu.d, mu.s)
    pts = rwio.parse_targets(args.targets, mu)
    vals = wolff_potentials(mu, pts, g, window)
    header = list("xyz"[:mu.d]) + ["W"]
    _out_text(args.out, rwio.csv_text(header, [list(p) + [v] for p, v in zip(pts, vals)]))
    if args.energy:
        sys.stderr.write(f"energy={wolff_energy(mu, window)!r}\n")
    return 0


def _core_atoms(mu, marks, spec: str):
    if spec == "all":
        return np.arange(len(mu))
    if spec not in marks:
        raise InvalidArgumentError(f"measure has no mark named {spec!r}")
    return np.flatnonzero(marks[spec])


def cmd_cantor(args) -> int:
    from .cantor import CantorParams, build_cantor_tree, verify_construction
    mu, marks = rwio.load_measure(args.measure)
    raw = rwio.read_json(args.params) if args.params else {
        "N": 2, "eps": 0.1, "M": 4.5, "delta": 0.15, "Delta": 1.0, "q": 12}
    core = _core_atoms(mu, marks, args.core)
    if args.N is not None:
        raw["N"] = args.N
    # without an explicit gamma, the core's share of the total mass is used
    raw.setdefault("gamma", float(mu.weights[core].sum() / mu.total_mass) if len(core) else 1.0)
    try:
        params = CantorParams(**raw)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameter file: {exc}") from exc
    tree = build_cantor_tree(mu, core, params, raise_on_failure=False)
    report = verify_construction(tree) if tree.failure is None else None
    rwio.save_tree(args.out, tree, report)
    if tree.failure is not None:
        log.error("construction failed: %s", tree.failure["message"])
        return 2
    return 0 if report.passed else 3


def cmd_verify(args) -> int:
    from .cantor import verify_construction
    from .harness import level_energies, mean_zero_check
    tree = rwio.load_tree(args.tree)
    if tree.failure is not None:
        rwio.write_json(args.report, {"failure": tree.failure})
        return 2
    report = verify_construction(tree)
    out = {"verification": report.to_dict(), "retained_fraction": tree.retained_fraction}
    worst = 0.0
    for k in range(tree.depth):
        for j in range(len(tree.levels[k + 1])):
            worst = max(worst, mean_zero_check(tree, k, j).relative)
    out["mean_zero_worst_relative"] = worst
    mean_zero_ok = worst <= 1e-10
    if tree.depth >= 1:
        out["harness"] = level_energies(tree).to_dict()
    out["passed"] = bool(report.passed and mean_zero_ok)
    rwio.write_json(args.report, out)
    return 0 if out["passed"] else 3


def cmd_capacity(args) -> int:
    from .capacity import (capacity_lower_bound, compare_capacities, halo_probes,
                           max_principle_check, natural_measure)
    from .gauges import parse_gauge
    mu, _ = rwio.load_measure(args.set)
    window = rwio.parse_window(args.window)
    g = parse_gauge(args.gauge, mu.d, mu.s)
    cand = mu if args.candidate == "measure" else natural_measure(mu.positions, mu.s)
    est = capacity_lower_bound(mu.positions, g, window, cand)
    probes = halo_probes(mu.positions, args.probes, args.seed)
    mp = max_principle_check(cand, g, window, probes)
    out = {"gauge": g.describe(), "window": [window.r_min, window.r_max],
           "capacity": est.to_dict(), "max_principle": mp.to_dict()}
    if args.compare:
        out["comparison"] = compare_capacities(mu.positions, mu.s, window, g).to_dict()
    rwio.write_json(args.out, out)
    return 0 if mp.passed else 3


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rieszwolff", description="Riesz kernels, Wolff potentials and Cantor constructions.")
    p.add_argument("--threads", type=int, default=None, help="cap on compiled-kernel threads")
    p.add_argument("--seed", type=int, default=0, help="seed for any randomised step")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a measure file")
    g.add_argument("--kind", choices=("cantor", "lacunary"), default="cantor")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--s", type=float, required=True)
    g.add_argument("--depth", type=int, required=True)
    g.add_argument("--ratio", type=float, default=None)
    g.add_argument("--jitter-seed", type=int, default=None)
    g.add_argument("--branches", type=int, default=5)
    g.add_argument("--spread", type=float, default=0.9)
    g.add_argument("--core-fraction", type=float, default=0.9997)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("riesz", help="kernel sums at target points (CSV)")
    r.add_argument("--measure", required=True)
    r.add_argument("--targets", required=True, help="atoms | grid:NxM[:margin=f] | file")
    r.add_argument("--mode", choices=("direct", "fast"), default="direct")
    r.add_argument("--tol", type=float, default=1e-8)
    r.add_argument("--theta", type=float, default=0.3)
    r.add_argument("--inner", type=float, default=0.0)
    r.add_argument("--out", default="-")
    r.set_defaults(func=cmd_riesz)

    s = sub.add_parser("scales", help="scale-set statistics (JSON)")
    s.add_argument("--measure", required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--window", required=True, help="rmin,rmax")
    s.add_argument("--T", required=True, help="comma-separated thresholds")
    s.add_argument("--q", default=None, help="comma-separated depths for the exceptional sweep")
    s.add_argument("--center", type=int, default=0)
    s.add_argument("--r0", type=float, default=None)
    s.add_argument("--dump-intervals", type=int, default=0, metavar="COUNT")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_scales)

    w = sub.add_parser("wolff", help="Wolff potentials (CSV)")
    w.add_argument("--measure", required=True)
    w.add_argument("--gauge", default="exp:beta=3")
    w.add_argument("--window", required=True)
    w.add_argument("--targets", default="atoms")
    w.add_argument("--energy", action="store_true")
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_wolff)

    c = sub.add_parser("cantor", help="build a Cantor tree (JSON)")
    c.add_argument("--measure", required=True)
    c.add_argument("--params", default=None)
    c.add_argument("--N", type=int, default=None)
    c.add_argument("--core", default="all", help="'all' or the name of a mark in the measure file")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cantor)

    v = sub.add_parser("verify", help="check a saved tree (JSON report)")
    v.add_argument("--tree", required=True)
    v.add_argument("--report", default="-")
    v.set_defaults(func=cmd_verify)

    k = sub.add_parser("capacity", help="capacity lower bound (JSON)")
    k.add_argument("--set", required=True)
    k.add_argument("--gauge", default="exp:beta=3")
    k.add_argument("--window", required=True, help="rmin,inf")
    k.add_argument("--probes", type=int, default=1000, help="off-support probe count")
    k.add_argument("--candidate", choices=("natural", "measure"), default="natural",
                   help="equal weights with mass diam^s, or the weights in the file")
    k.add_argument("--compare", action="store_true")
    k.add_argument("--out", default="-")
    k.set_defaults(func=cmd_capacity)
    return p


def main(argv=None) -> int:
    # numba falls back to another threading layer; the notice is noise for CLI users
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    logging.basicConfig(level=os.environ.get("RW_LOG", "WARNING").upper(),
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return 1
        if args.threads:
            _kernels.set_threads(args.threads)
        return args.func(args)
    except InvalidArgumentError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ConstructionFailure as exc:
        sys.stderr.write(f"construction failed: {exc}\n")
        return 2
    except VerificationFailure as exc:
        sys.stderr.write(f"assertion failed: {exc}\n")
        return 3
    except RieszWolffError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
