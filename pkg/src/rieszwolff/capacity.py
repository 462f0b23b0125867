"""Lower bounds for Wolff-type capacities built from explicit witness measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DivergenceError, InvalidArgumentError, VerificationFailure
from .gauges import ExponentialGauge, Gauge, default_beta, wolff_potential
from .measure import AtomicMeasure, point_set_diameter
from .scales import ScaleWindow


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax: int
    probes: int


def wolff_sup(mu: AtomicMeasure, g: Gauge, probes, window: ScaleWindow) -> SupResult:
    """Largest Wolff potential over the probe points (+inf if one diverges)."""
    pts = np.asarray(probes, dtype=float).reshape(-1, mu.d)
    if pts.shape[0] == 0:
        raise InvalidArgumentError("need at least one probe point")
    if len(mu) == 0:
        return SupResult(0.0, 0, pts.shape[0])
    best, arg = -np.inf, 0
    for i, p in enumerate(pts):
        try:
            val = wolff_potential(mu, p, g, window)
        except DivergenceError:
            return SupResult(np.inf, i, pts.shape[0])
        if val > best:
            best, arg = val, i
    return SupResult(float(best), arg, pts.shape[0])


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    witness_measure: AtomicMeasure
    A_used: float
    factors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "A_used": self.A_used, "factors": self.factors,
                "witness_atoms": len(self.witness_measure)}


def natural_measure(points, s: float, d: int | None = None) -> AtomicMeasure:
    """Equal weights on the points with total mass diam^s (1 for a single point)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidArgumentError("need a nonempty (n, d) point array")
    diam = point_set_diameter(pts)
    total = diam ** s if diam > 0 else 1.0
    return AtomicMeasure(pts, np.full(pts.shape[0], total / pts.shape[0]), s, d)


def _require_unbounded(window: ScaleWindow):
    if window.r_min <= 0.0:
        raise InvalidArgumentError("capacity windows need r_min > 0")
    if np.isfinite(window.r_max):
        raise InvalidArgumentError(
            "capacity windows must be unbounded above so that doubling radii stays inside")


def rescale_factor(A: float, A_target: float, g: Gauge, s: float) -> tuple[float, float]:
    """Mass factor taking a witness with potential <= A to one with
    potential <= A_target, and the dilation M used."""
    if A <= A_target:
        return 1.0, 1.0
    log_m = A / g.eval(g.kappa)
    return (A_target / A) ** (1.0 / g.sigma) * math.exp(-s * log_m), math.exp(log_m)


def capacity_lower_bound(E_points, g: Gauge, window: ScaleWindow,
                         candidate: AtomicMeasure | None = None) -> CapacityEstimate:
    """Mass of an admissible witness derived from the candidate.

    The candidate's largest potential A on its own support bounds the
    potential of 2^-s times it everywhere; a final rescale brings the bound
    from A down to 1.
    """
    _require_unbounded(window)
    E = np.asarray(E_points, dtype=float)
    if candidate is None:
        raise InvalidArgumentError("a candidate measure (with its s) is required")
    if E.ndim != 2 or E.shape[1] != candidate.d:
        raise InvalidArgumentError("E points must be an (n, d) array matching the candidate")
    _check_support(candidate, E)
    if len(candidate) == 0:
        return CapacityEstimate(0.0, candidate, 0.0, {"empty": True})
    sup = wolff_sup(candidate, g, candidate.positions, window)
    A = sup.value
    if not np.isfinite(A):
        return CapacityEstimate(0.0, candidate, A, {"diverged_at": sup.argmax})
    halving = 2.0 ** (-candidate.s)
    factor, dilation = rescale_factor(A, 1.0, g, candidate.s)
    scale = halving * factor
    witness = AtomicMeasure(candidate.positions, candidate.weights * scale,
                            candidate.s, candidate.d)
    return CapacityEstimate(witness.total_mass, witness, A,
                            {"halving": halving, "rescale": factor, "M": dilation,
                             "argmax_atom": sup.argmax})


def _check_support(candidate: AtomicMeasure, E: np.ndarray):
    if len(candidate) == 0:
        return
    from scipy.spatial import cKDTree
    gap, _ = cKDTree(E).query(candidate.positions)
    if np.any(gap > 0):
        raise InvalidArgumentError("candidate must be supported on the E points")


def capacity_from_natural(E_points, s: float, g: Gauge, window: ScaleWindow) -> CapacityEstimate:
    return capacity_lower_bound(E_points, g, window, natural_measure(E_points, s))


@dataclass(frozen=True)
class MaxPrincipleReport:
    passed: bool
    support_max: float
    off_support_max: float
    worst_probe: tuple | None
    probes: int

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def max_principle_check(mu: AtomicMeasure, g: Gauge, window: ScaleWindow, probe_grid,
                        tol: float = 1e-6) -> MaxPrincipleReport:
    """Potential of 2^-s mu at off-support probes against its maximum over the support."""
    _require_unbounded(window)
    pts = np.asarray(probe_grid, dtype=float).reshape(-1, mu.d)
    if len(mu) == 0:
        return MaxPrincipleReport(True, 0.0, 0.0, None, pts.shape[0])
    A = wolff_sup(mu, g, mu.positions, window).value
    halved = AtomicMeasure(mu.positions, mu.weights * 2.0 ** (-mu.s), mu.s, mu.d)
    worst, where = 0.0, None
    for p in pts:
        val = wolff_potential(halved, p, g, window)
        if val > worst:
            worst, where = val, tuple(map(float, p))
    passed = bool(worst <= A * (1.0 + tol) + tol * (A == 0.0))
    return MaxPrincipleReport(passed, float(A), float(worst), where, pts.shape[0])


def halo_probes(points, count: int, seed: int, margin: float = 0.25) -> np.ndarray:
    """Random probes in the bounding box enlarged by ``margin`` times its size."""
    pts = np.asarray(points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * max(float(np.max(hi - lo)), 1e-12)
    rng = np.random.default_rng(seed)
    return rng.uniform(lo - pad, hi + pad, size=(count, pts.shape[1]))


def cz_admissibility_proxy(mu: AtomicMeasure, target_grid, trunc_radii) -> float:
    """Largest |truncated kernel sum| over grid points and inner radii."""
    pts = np.ascontiguousarray(np.asarray(target_grid, dtype=float).reshape(-1, mu.d))
    radii = [float(r) for r in trunc_radii]
    if pts.shape[0] == 0 or not radii:
        raise InvalidArgumentError("grid and truncation radii must be nonempty")
    if any(r <= 0 for r in radii):
        raise InvalidArgumentError("truncation radii must be positive")
    if len(mu) == 0:
        return 0.0
    best = 0.0
    outer = np.full(pts.shape[0], np.inf)
    for r in radii:
        vals, _, _ = _kernels.direct_field(np.ascontiguousarray(mu.positions),
                                           np.ascontiguousarray(mu.weights), pts, mu.s,
                                           np.full(pts.shape[0], r), outer)
        best = max(best, float(np.max(np.sqrt(np.sum(vals * vals, axis=1)))))
    return best


def default_grid(points, per_side: int = 16, margin: float = 0.1) -> np.ndarray:
    """The points themselves plus a regular grid over their padded bounding box."""
    pts = np.asarray(points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * max(float(np.max(hi - lo)), 1e-12)
    axes = [np.linspace(a - pad, b + pad, per_side) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pts.shape[1])
    return np.vstack([pts, grid])


@dataclass(frozen=True)
class CapacityComparison:
    cz_lower: float
    proxy_value: float
    capacity: CapacityEstimate

    @property
    def ratio(self) -> float:
        cap = self.capacity.value
        return self.cz_lower / cap if cap > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"cz_lower": self.cz_lower, "proxy_value": self.proxy_value,
                "capacity": self.capacity.to_dict(), "ratio": self.ratio}


def compare_capacities(E_points, s: float, window: ScaleWindow, g: Gauge | None = None,
                       grid=None, trunc_radii=None) -> CapacityComparison:
    """Largest multiple of the natural measure whose kernel proxy is at most 1,
    against the capacity bound certified by the natural measure itself."""
    E = np.asarray(E_points, dtype=float)
    if E.ndim != 2 or E.shape[0] == 0:
        raise InvalidArgumentError("E must be a nonempty (n, d) point array")
    d = E.shape[1]
    if g is None:
        g = ExponentialGauge(default_beta(d, s))
    if grid is None:
        grid = default_grid(E)
    if trunc_radii is None:
        trunc_radii = [window.r_min * 2.0 ** k for k in range(4)]
    nat = natural_measure(E, s)
    proxy = cz_admissibility_proxy(nat, grid, trunc_radii)
    c = 1.0 / proxy if proxy > 0 else float("inf")
    if not np.isfinite(c):
        raise InvalidArgumentError("the kernel proxy vanished; refine the grid")
    cap = capacity_lower_bound(E, g, window, nat)
    return CapacityComparison(c * nat.total_mass, proxy, cap)


def check_rescaled_witness(estimate: CapacityEstimate, g: Gauge, window: ScaleWindow,
                           probes, target: float = 1.0, tol: float = 1e-6) -> float:
    """Largest potential of the witness at the probes; raises if above target."""
    val = wolff_sup(estimate.witness_measure, g, probes, window).value
    if val > target + tol:
        raise VerificationFailure("rescaled witness exceeds the potential bound",
                                  value=val, target=target)
    return val
