"""Exact scale sets {r : mu(B(x, r)) / r^s > Delta} and statistics built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DivergenceError, InvalidArgumentError, UndefinedFractionError
from .measure import AtomicMeasure, distances


@dataclass(frozen=True)
class ScaleWindow:
    """Radius window [r_min, r_max]; r_min = 0 and r_max = inf are allowed."""

    r_min: float
    r_max: float

    def __post_init__(self):
        if not (self.r_min >= 0.0) or not (self.r_max > self.r_min) or math.isnan(self.r_max):
            raise InvalidArgumentError(
                f"need 0 <= r_min < r_max, got ({self.r_min}, {self.r_max})")

    @property
    def log_width(self) -> float:
        return math.log(self.r_max / self.r_min)


@dataclass(frozen=True)
class ScaleSet:
    intervals: list[tuple[float, float]]
    log_measure: float

    def contains(self, r: float) -> bool:
        return any(lo < r < hi for lo, hi in self.intervals)

    def covers(self, a: float, b: float) -> bool:
        """Whether the closed range [a, b] lies inside one interval."""
        return any(lo < a and b < hi for lo, hi in self.intervals)


@dataclass(frozen=True)
class GoodScaleReport:
    ks: list[int]
    count: int


def mass_profile(mu: AtomicMeasure, x, reach: float = np.inf):
    """Distinct atom distances from x (below ``reach``) and the mass of
    the open ball just beyond each of them.

    Returns (radii, masses): for r in (radii[i], radii[i+1]] the ball
    B(x, r) has mass masses[i].  Masses are cumulative sums in distance
    order with ties grouped.
    """
    x = mu.point(x)
    if len(mu) == 0:
        return np.zeros(0), np.zeros(0)
    if np.isfinite(reach):
        idx = mu.ball_indices(x, reach)
        pos, w = mu.positions[idx], mu.weights[idx]
    else:
        pos, w = mu.positions, mu.weights
    if pos.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    dist = distances(pos, x)
    order = np.argsort(dist, kind="stable")
    dist = dist[order]
    cum = np.cumsum(w[order])
    last = np.r_[dist[1:] != dist[:-1], True]
    return dist[last], cum[last]


def _pieces(radii, masses, delta, s, window):
    """Per-piece (lo, hi) of the superlevel set, clamped to the window."""
    out = []
    n = radii.shape[0]
    for i in range(n):
        lo = max(radii[i], window.r_min)
        hi = radii[i + 1] if i + 1 < n else np.inf
        hi = min(hi, (masses[i] / delta) ** (1.0 / s), window.r_max)
        if hi > lo:
            out.append((float(lo), float(hi)))
    return out


def superlevel_scale_set(mu: AtomicMeasure, x, delta: float, window: ScaleWindow) -> ScaleSet:
    """Exact E(x, delta) within the window, with its dr/r measure."""
    if not (delta > 0) or not np.isfinite(delta):
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    x = mu.point(x)
    radii, masses = mass_profile(mu, x, window.r_max * (1.0 + 1e-9))
    if radii.shape[0] and radii[0] == 0.0 and window.r_min == 0.0:
        raise DivergenceError("an atom sits at x, so the scale set has infinite measure")
    pieces = _pieces(radii, masses, delta, mu.s, window)
    log_measure = 0.0
    for lo, hi in pieces:
        log_measure += math.log(hi / lo)
    merged: list[tuple[float, float]] = []
    for lo, hi in pieces:
        if merged and merged[-1][1] == lo:
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return ScaleSet(merged, log_measure)


def good_scales(mu: AtomicMeasure, x, delta: float, k_max: int, k_min: int = 0) -> GoodScaleReport:
    """Dyadic k in [k_min, k_max] with mu(B(x, 2^-k)) > (delta / 2^s) 2^(-s k)."""
    if k_max < k_min or k_min < 0:
        raise InvalidArgumentError("need 0 <= k_min <= k_max")
    if not (delta > 0):
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    x = mu.point(x)
    threshold = delta / 2.0 ** mu.s
    ks = []
    if len(mu):
        for k in range(k_min, k_max + 1):
            r = 2.0 ** (-k)
            if mu.ball_mass(x, r) > threshold * r ** mu.s:
                ks.append(k)
    return GoodScaleReport(ks, len(ks))


def scale_log_measures(mu: AtomicMeasure, centers, delta: float, window: ScaleWindow) -> np.ndarray:
    """L(E(x, delta)) for many centres via the compiled bucketed kernel."""
    if not (delta > 0):
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    if window.r_min <= 0.0:
        raise InvalidArgumentError("batched scale measures need r_min > 0")
    pts = np.ascontiguousarray(np.asarray(centers, dtype=float).reshape(-1, mu.d))
    if len(mu) == 0:
        return np.zeros(pts.shape[0])
    return _kernels.scale_log_measure_batch(
        np.ascontiguousarray(mu.positions), np.ascontiguousarray(mu.weights), pts,
        float(delta), mu.s, float(window.r_min), float(window.r_max))


@dataclass(frozen=True)
class WeakTypeReport:
    Ts: list[float]
    mass_above: list[float]
    alpha_hat: float
    total_mass: float
    log_measures: np.ndarray = field(repr=False)

    def curve(self) -> list[tuple[float, float]]:
        return list(zip(self.Ts, self.mass_above))


def fit_decay_exponent(Ts, masses) -> float:
    """Least-squares slope of -log(mass) against log log T (T > 1, mass > 0)."""
    Ts = np.asarray(Ts, dtype=float)
    masses = np.asarray(masses, dtype=float)
    keep = (Ts > 1.0) & (masses > 0.0)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    u = np.log(np.log(Ts[keep]))
    if np.ptp(u) == 0.0:
        return float("nan")
    slope = np.polyfit(u, np.log(masses[keep]), 1)[0]
    return float(-slope)


def weak_type_statistic(mu: AtomicMeasure, delta: float, Ts, window: ScaleWindow) -> WeakTypeReport:
    """mu{x : L(E(x, delta)) > T} over the support, for each T."""
    Ts = [float(t) for t in Ts]
    if not Ts:
        raise InvalidArgumentError("Ts must be nonempty")
    if window.r_min <= 0.0:
        raise InvalidArgumentError("the weak-type statistic needs r_min > 0")
    L = scale_log_measures(mu, mu.positions, delta, window)
    above = [float(np.sum(mu.weights[L > t])) for t in Ts]
    return WeakTypeReport(Ts, above, fit_decay_exponent(Ts, above), mu.total_mass, L)


def exceptional_set(mu: AtomicMeasure, center, r0: float, delta: float, q: int):
    """Atoms x in B(center, r0/2) whose density exceeds delta at every
    radius in [r0 / 2^q, r0 / 4].  Returns (member indices, mass fraction
    relative to mu(B(center, r0)))."""
    if q < 3:
        raise InvalidArgumentError("q must be at least 3")
    if not (delta > 0) or not (r0 > 0):
        raise InvalidArgumentError("delta and r0 must be positive")
    center = mu.point(center)
    base = mu.ball_mass(center, r0)
    if base == 0.0:
        raise UndefinedFractionError("the reference ball carries no mass")
    a, b = r0 / 2.0 ** q, r0 / 4.0
    window = ScaleWindow(a / 2.0, 2.0 * b)
    members = []
    for i in mu.ball_indices(center, r0 / 2.0):
        if superlevel_scale_set(mu, mu.positions[i], delta, window).covers(a, b):
            members.append(int(i))
    members = np.array(members, dtype=np.intp)
    return members, float(np.sum(mu.weights[members])) / base


def exceptional_sweep(mu: AtomicMeasure, center, r0: float, delta: float, qs):
    """Mass fraction of the exceptional set and fraction * q over a range of q."""
    rows = []
    for q in qs:
        _, frac = exceptional_set(mu, center, r0, delta, q)
        rows.append((int(q), frac, frac * q))
    return rows
