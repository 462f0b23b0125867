"""Riesz kernel sums: direct, truncated, maximal, adjoint and tree-code."""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError, SingularityError
from .measure import AtomicMeasure, as_point, distances


@dataclass(frozen=True)
class KernelEval:
    value: np.ndarray
    terms_used: int
    error_bound: float = 0.0


@dataclass(frozen=True)
class TruncationSpec:
    """Annulus inner < |a - x| < outer over which the kernel is summed."""

    inner: float = 0.0
    outer: float = np.inf

    def __post_init__(self):
        if not (self.inner >= 0.0) or not (self.outer > self.inner):
            raise InvalidArgumentError(
                f"need 0 <= inner < outer, got ({self.inner}, {self.outer})")


NO_TRUNCATION = TruncationSpec()


def _kernel_terms(positions, weights, x, s, inner, outer):
    dist = distances(positions, x)
    keep = (dist > inner) & (dist < outer)
    if inner == 0.0 and np.any(dist[dist < outer] == 0.0):
        raise SingularityError(f"atom coincides with the evaluation point {x.tolist()}")
    diff = positions[keep] - x
    coef = weights[keep] / dist[keep] ** (1.0 + s)
    return diff, coef


def riesz_at(mu: AtomicMeasure, x, trunc: TruncationSpec = NO_TRUNCATION) -> KernelEval:
    """Direct sum of w (a - x) / |a - x|^(1+s) over the annulus, in index order."""
    x = mu.point(x)
    if len(mu) == 0:
        return KernelEval(np.zeros(mu.d), 0)
    diff, coef = _kernel_terms(mu.positions, mu.weights, x, mu.s, trunc.inner, trunc.outer)
    value = np.zeros(mu.d)
    for j in range(mu.d):
        value[j] = np.sum(coef * diff[:, j])
    return KernelEval(value, int(coef.shape[0]))


def riesz_outside_ball(mu: AtomicMeasure, x, center, radius: float) -> np.ndarray:
    """Kernel sum at x over atoms outside the ball B(center, 2 radius)."""
    x = mu.point(x)
    center = mu.point(center)
    if len(mu) == 0:
        return np.zeros(mu.d)
    far = distances(mu.positions, center) >= 2.0 * radius
    pos = mu.positions[far]
    dist = distances(pos, x)
    if np.any(dist == 0.0):
        raise SingularityError("atom at the evaluation point lies outside 2B")
    coef = mu.weights[far] / dist ** (1.0 + mu.s)
    return np.array([np.sum(coef * (pos[:, j] - x[j])) for j in range(mu.d)])


def dyadic_ball_family(x, k_range=range(-4, 9), offsets: int = 1):
    """Balls B(c, 2^-k) containing x, with centres on a small grid around x.

    For each radius the centres are x + (i / (offsets + 1)) * r * e for
    integer vectors i with entries in [-offsets, offsets].
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    steps = np.arange(-offsets, offsets + 1) / (offsets + 1)
    family = []
    for k in k_range:
        r = 2.0 ** (-k)
        for idx in np.array(np.meshgrid(*([steps] * d), indexing="ij")).reshape(d, -1).T:
            c = x + r * idx
            if np.linalg.norm(c - x) < r:
                family.append((c, r))
    return family


def riesz_maximal(mu: AtomicMeasure, x, ball_family=None) -> float:
    """max over balls B in the family of |sum of the kernel outside 2B|."""
    x = mu.point(x)
    if ball_family is None:
        ball_family = dyadic_ball_family(x)
    if len(ball_family) == 0:
        raise InvalidArgumentError("ball family is empty")
    best = 0.0
    for center, radius in ball_family:
        center = mu.point(center)
        if not (float(distances(x[None, :], center)[0]) < radius):
            raise InvalidArgumentError("every ball in the family must contain x")
        best = max(best, float(np.linalg.norm(riesz_outside_ball(mu, x, center, radius))))
    return best


def riesz_adjoint_at(positions, vectors, x, s: float) -> float:
    """-sum_a w_a . (a - x) / |a - x|^(1+s) for vector-valued weights."""
    pos = np.asarray(positions, dtype=float)
    vec = np.asarray(vectors, dtype=float)
    if pos.ndim != 2 or vec.shape != pos.shape:
        raise InvalidArgumentError("positions and vector weights must both be (n, d)")
    x = as_point(x, pos.shape[1])
    if pos.shape[0] == 0:
        return 0.0
    dist = distances(pos, x)
    if np.any(dist == 0.0):
        raise SingularityError("vector atom coincides with the evaluation point")
    dots = np.zeros(pos.shape[0])
    for j in range(pos.shape[1]):
        dots += vec[:, j] * (pos[:, j] - x[j])
    return float(-np.sum(dots / dist ** (1.0 + s)))


# ---------------------------------------------------------------------------
# tree code

@dataclass(frozen=True)
class _Tree:
    positions: np.ndarray
    weights: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    mass: np.ndarray
    centroid: np.ndarray
    radius: np.ndarray
    moments: np.ndarray
    tables: tuple


_TREES: "weakref.WeakKeyDictionary[AtomicMeasure, dict]" = weakref.WeakKeyDictionary()
_TABLES: dict = {}


def kernel_tree(mu: AtomicMeasure, leaf_size: int = 32, order: int = 14) -> _Tree:
    """Annotated k-d tree over mu with Taylor moments, cached per measure."""
    cache = _TREES.setdefault(mu, {})
    key = (leaf_size, order)
    if key not in cache:
        if (mu.d, order) not in _TABLES:
            _TABLES[mu.d, order] = _kernels.multi_index_tables(mu.d, order)
        (degree, minus_one, minus_two, parent, parent_dim, upto, exponent,
         lowered) = _TABLES[mu.d, order]
        (perm, lo, hi, left, right, box_lo, box_hi, mass, centroid,
         radius) = _kernels.build_tree(np.ascontiguousarray(mu.positions),
                                       np.ascontiguousarray(mu.weights), leaf_size)
        ppos = np.ascontiguousarray(mu.positions[perm])
        pw = np.ascontiguousarray(mu.weights[perm])
        moments = _kernels.node_moments(ppos, pw, lo, hi, left, right, centroid,
                                        parent, parent_dim, exponent, lowered)
        cache[key] = _Tree(ppos, pw, lo, hi, left, right, box_lo, box_hi, mass,
                           centroid, radius, moments, (degree, minus_one, minus_two, upto))
    return cache[key]


def _targets_array(targets, d):
    arr = np.ascontiguousarray(np.asarray(targets, dtype=float).reshape(-1, d))
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("targets must be finite")
    return arr


def _inner_array(inner, m):
    arr = np.broadcast_to(np.asarray(inner, dtype=float), (m,)).copy()
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("inner radii must be finite and non-negative")
    return arr


def riesz_field_direct(mu: AtomicMeasure, targets, inner=0.0) -> list[KernelEval]:
    """Compiled direct summation over many targets (index order)."""
    pts = _targets_array(targets, mu.d)
    m = pts.shape[0]
    inner_arr = _inner_array(inner, m)
    outer = np.full(m, np.inf)
    values, terms, singular = _kernels.direct_field(
        np.ascontiguousarray(mu.positions), np.ascontiguousarray(mu.weights),
        pts, mu.s, inner_arr, outer)
    if np.any(singular):
        i = int(np.argmax(singular))
        raise SingularityError(f"target {i} coincides with an atom")
    return [KernelEval(values[i], int(terms[i])) for i in range(m)]


def riesz_field_fast(mu: AtomicMeasure, targets, tol: float, theta: float = 0.3,
                     inner=0.0, leaf_size: int = 32, order: int = 14) -> list[KernelEval]:
    """Tree-code field.

    Each returned value lies within its ``error_bound`` of the exact
    annulus sum in every coordinate.  The truncation part of the bound never
    exceeds ``tol * total_mass / dist_min^s``, where dist_min is the
    distance to the nearest contributing atom; the remainder is a small
    allowance for floating-point rounding.
    """
    if not (tol > 0) or not np.isfinite(tol):
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    if not (0 < theta < 1):
        raise InvalidArgumentError(f"theta must lie in (0, 1), got {theta}")
    if order < 0:
        raise InvalidArgumentError("expansion order must be non-negative")
    pts = _targets_array(targets, mu.d)
    m = pts.shape[0]
    inner_arr = _inner_array(inner, m)
    if len(mu) == 0:
        return [KernelEval(np.zeros(mu.d), 0) for _ in range(m)]
    t = kernel_tree(mu, leaf_size, order)
    # coincidences inside the annulus are singular, exactly as in direct mode
    tiny = np.nextafter(0.0, 1.0)
    for i in range(m):
        if inner_arr[i] == 0.0 and _kernels.shell_mass(
                t.positions, t.weights, t.lo, t.hi, t.left, t.right, t.box_lo,
                t.box_hi, t.mass, pts[i], 0.0, tiny) > 0.0:
            raise SingularityError(f"target {i} coincides with an atom")
    degree, minus_one, minus_two, upto = t.tables
    values, bounds, terms, _ = _kernels.tree_field(
        t.positions, t.weights, t.lo, t.hi, t.left, t.right, t.box_lo, t.box_hi,
        t.mass, t.centroid, t.radius, t.moments, degree, minus_one, minus_two, upto,
        pts, mu.s, inner_arr, theta, tol, len(mu))
    return [KernelEval(values[i], int(terms[i]), float(bounds[i])) for i in range(m)]
