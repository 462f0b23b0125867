"""Finite atomic measures in R^d and the generators used as test inputs."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgumentError

# Slack applied to k-d tree query radii; candidates are re-filtered with the
# canonical distance so the result is still an exact open-ball test.
_QUERY_SLACK = 1.0 + 1e-9


@dataclass(frozen=True)
class AmbientParams:
    d: int
    s: float

    def __post_init__(self):
        if self.d not in (2, 3):
            raise InvalidArgumentError(f"dimension must be 2 or 3, got {self.d}")
        if not (self.d - 1 < self.s < self.d):
            raise InvalidArgumentError(
                f"s must lie strictly between {self.d - 1} and {self.d}, got {self.s}")


def as_point(x, d: int) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.shape != (d,):
        raise InvalidArgumentError(f"expected a point in R^{d}, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidArgumentError("point has non-finite coordinates")
    return p


def distances(positions: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Euclidean distances with the same operation order as the compiled kernels."""
    diff = positions[:, 0] - x[0]
    acc = diff * diff
    for j in range(1, positions.shape[1]):
        diff = positions[:, j] - x[j]
        acc += diff * diff
    return np.sqrt(acc)


class AtomicMeasure:
    """Weighted point set with an exact ball-mass index.

    Positions and weights are copied and frozen.  The spatial index is
    built on first use.
    """

    def __init__(self, positions, weights, s: float, d: int | None = None):
        pos = np.array(positions, dtype=float)
        if d is None:
            if pos.ndim != 2:
                raise InvalidArgumentError("positions must be an (n, d) array")
            d = pos.shape[1]
        pos = pos.reshape(-1, d)
        w = np.array(weights, dtype=float).reshape(-1)
        self.ambient = AmbientParams(int(d), float(s))
        if pos.shape[0] != w.shape[0]:
            raise InvalidArgumentError("positions and weights differ in length")
        if not np.all(np.isfinite(pos)):
            raise InvalidArgumentError("atom positions must be finite")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidArgumentError("atom weights must be positive and finite")
        pos.setflags(write=False)
        w.setflags(write=False)
        self.positions = pos
        self.weights = w
        self.total_mass = float(np.sum(w))

    @property
    def d(self) -> int:
        return self.ambient.d

    @property
    def s(self) -> float:
        return self.ambient.s

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __repr__(self) -> str:
        return f"AtomicMeasure(n={len(self)}, d={self.d}, s={self.s}, mass={self.total_mass!r})"

    @cached_property
    def index(self) -> cKDTree:
        return cKDTree(self.positions if len(self) else np.zeros((0, self.d)))

    def point(self, x) -> np.ndarray:
        return as_point(x, self.d)

    def ball_indices(self, x, r: float) -> np.ndarray:
        """Sorted indices of atoms with |a - x| < r."""
        x = self.point(x)
        if not (r > 0) or not np.isfinite(r):
            raise InvalidArgumentError(f"radius must be positive and finite, got {r}")
        if len(self) == 0:
            return np.zeros(0, dtype=np.intp)
        cand = np.asarray(self.index.query_ball_point(x, r * _QUERY_SLACK), dtype=np.intp)
        if cand.size == 0:
            return cand
        cand.sort()
        return cand[distances(self.positions[cand], x) < r]

    def ball_mass(self, x, r: float) -> float:
        idx = self.ball_indices(x, r)
        return float(np.sum(self.weights[idx]))

    def ball_mass_scan(self, x, r: float) -> float:
        """Reference linear scan; agrees bit for bit with :meth:`ball_mass`."""
        x = self.point(x)
        if not (r > 0) or not np.isfinite(r):
            raise InvalidArgumentError(f"radius must be positive and finite, got {r}")
        return float(np.sum(self.weights[distances(self.positions, x) < r]))

    def restrict(self, mask) -> "AtomicMeasure":
        mask = np.asarray(mask)
        return AtomicMeasure(self.positions[mask], self.weights[mask], self.s, self.d)

    def translate(self, z) -> "AtomicMeasure":
        return rescale_measure(self, 1.0, z)

    def diameter(self) -> float:
        return point_set_diameter(self.positions)


def point_set_diameter(points: np.ndarray) -> float:
    """Exact diameter (largest canonical distance) of a finite point set."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        return 0.0
    cand = np.arange(n)
    if n > 64:
        # only hull vertices can realise the diameter
        from scipy.spatial import ConvexHull, QhullError
        try:
            cand = np.unique(ConvexHull(pts).vertices)
        except (QhullError, ValueError):
            cand = np.arange(n)
    sub = pts[cand]
    best = 0.0
    for i in range(sub.shape[0] - 1):
        best = max(best, float(np.max(distances(sub[i + 1:], sub[i]))))
    return best


def rescale_measure(mu: AtomicMeasure, lam: float, z=None) -> AtomicMeasure:
    """Push mu forward by a -> lam * a + z and multiply weights by lam^s."""
    if not (lam > 0) or not np.isfinite(lam):
        raise InvalidArgumentError(f"scale factor must be positive, got {lam}")
    shift = np.zeros(mu.d) if z is None else as_point(z, mu.d)
    if lam == 1.0:
        return AtomicMeasure(mu.positions + shift, mu.weights, mu.s, mu.d)
    return AtomicMeasure(lam * mu.positions + shift, mu.weights * lam ** mu.s, mu.s, mu.d)


def default_ratio(d: int, s: float) -> float:
    return 2.0 ** (-d / s)


def cantor_cells(d: int, depth: int, ratio: float):
    """Lower corners and common side of the depth-level corner cells.

    Cells are listed hierarchically: the 2^d children of a cell are
    contiguous, with the first coordinate varying fastest.
    """
    corners = np.zeros((1, d))
    side = 1.0
    offsets = np.array([e[::-1] for e in itertools.product((0.0, 1.0), repeat=d)])
    for _ in range(depth):
        step = side * (1.0 - ratio)
        corners = (corners[:, None, :] + step * offsets[None, :, :]).reshape(-1, d)
        side *= ratio
    return corners, side


def build_cantor_measure(d: int, s: float, depth: int, ratio: float | None = None,
                         jitter_seed: int | None = None) -> AtomicMeasure:
    """Equal-weight atoms at the centres of the corner cells of the unit cube."""
    AmbientParams(d, s)
    if depth < 0:
        raise InvalidArgumentError("depth must be non-negative")
    if ratio is None:
        ratio = default_ratio(d, s)
    if not (0.0 < ratio < 0.5):
        raise InvalidArgumentError(f"ratio must lie in (0, 1/2), got {ratio}")
    corners, side = cantor_cells(d, depth, ratio)
    centers = corners + side / 2.0
    if jitter_seed is not None:
        rng = np.random.default_rng(jitter_seed)
        direction = rng.normal(size=centers.shape)
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = 0.01 * side * rng.uniform(0.0, 1.0, size=(centers.shape[0], 1))
        centers = centers + direction * radius
    weights = np.full(centers.shape[0], 2.0 ** (-d * depth))
    return AtomicMeasure(centers, weights, s, d)


def build_lacunary_measure(d: int, s: float, levels: int, branches: int, spread: float,
                           ratio: float, core_fraction: float = 0.5,
                           seed: int = 0):
    """Hierarchical clusters with a heavy core atom at every cluster centre.

    Each cluster of radius ``r`` holds a core atom carrying
    ``core_fraction`` of its mass and ``branches`` sub-clusters of radius
    ``ratio * r`` placed at distance ``spread * r`` in random directions.
    The sub-cluster centres are spaced so that sub-clusters stay well
    separated.  Returns the measure and a boolean mask of the leaf atoms,
    which form the natural support for the Cantor construction.
    """
    AmbientParams(d, s)
    if levels < 1 or branches < 1:
        raise InvalidArgumentError("levels and branches must be positive")
    if not (0.0 < core_fraction < 1.0):
        raise InvalidArgumentError("core_fraction must lie in (0, 1)")
    if not (0.0 < ratio < spread < 1.0):
        raise InvalidArgumentError("need 0 < ratio < spread < 1")
    rng = np.random.default_rng(seed)
    positions = []
    weights = []
    leaf = []

    def place(center, radius, mass, level):
        if level == levels:
            positions.append(center)
            weights.append(mass)
            leaf.append(True)
            return
        positions.append(center)
        weights.append(mass * core_fraction)
        leaf.append(False)
        child_mass = mass * (1.0 - core_fraction) / branches
        phase = rng.uniform(0.0, 2.0 * np.pi)
        for b in range(branches):
            if d == 2:
                ang = phase + 2.0 * np.pi * b / branches
                direction = np.array([np.cos(ang), np.sin(ang)])
            else:
                # spread branch directions along a golden-angle spiral
                z = 1.0 - (2.0 * b + 1.0) / branches
                ang = phase + b * np.pi * (3.0 - np.sqrt(5.0))
                rad = np.sqrt(max(0.0, 1.0 - z * z))
                direction = np.array([rad * np.cos(ang), rad * np.sin(ang), z])
            place(center + spread * radius * direction, ratio * radius, child_mass, level + 1)

    place(np.zeros(d), 1.0, 1.0, 0)
    mu = AtomicMeasure(np.array(positions), np.array(weights), s, d)
    return mu, np.array(leaf)


@dataclass(frozen=True)
class GrowthReport:
    c1_empirical: float
    probe_count: int
    argmax_center: tuple | None = None
    argmax_radius: float | None = None


def growth_probe(mu: AtomicMeasure, sample_count: int, rng_seed: int,
                 r_min: float | None = None, radii_per_atom: int = 48) -> GrowthReport:
    """Empirical sup of mu(B(x, r)) / r^s over atom-centred and random probes.

    Radii run log-uniformly from ``r_min`` (default: 1e-4 of the outer
    scale) to twice the outer scale ``max(diam, 1)``.
    """
    if sample_count < 1:
        raise InvalidArgumentError("sample_count must be at least 1")
    if len(mu) == 0:
        return GrowthReport(0.0, 0)
    outer = 2.0 * max(mu.diameter(), 1.0)
    lo = outer * 1e-4 if r_min is None else float(r_min)
    if not (0 < lo < outer):
        raise InvalidArgumentError("r_min must be positive and below the outer scale")
    radii = np.geomspace(lo, outer, radii_per_atom)
    best, arg_x, arg_r = 0.0, None, None
    count = 0

    def consider(x, r):
        nonlocal best, arg_x, arg_r, count
        count += 1
        val = mu.ball_mass(x, r) / r ** mu.s
        if val > best:
            best, arg_x, arg_r = val, tuple(map(float, x)), float(r)

    for x in mu.positions:
        for r in radii:
            consider(x, r)
    rng = np.random.default_rng(rng_seed)
    box_lo = mu.positions.min(axis=0) - 0.1 * outer
    box_hi = mu.positions.max(axis=0) + 0.1 * outer
    for _ in range(sample_count):
        x = rng.uniform(box_lo, box_hi)
        r = float(np.exp(rng.uniform(np.log(lo), np.log(outer))))
        consider(x, r)
    return GrowthReport(best, count, arg_x, arg_r)


class MassTree:
    """Aggregated ball and shell masses with exact threshold decisions.

    Node masses are summed in tree order, which can differ from the
    index-order sum by at most ``n * 2^-53`` times the mass (each is a
    sum of at most n non-negative terms).  Comparisons inside that margin
    fall back to the exact index-order sum, so every decision agrees with
    :meth:`AtomicMeasure.ball_mass`.
    """

    def __init__(self, mu: AtomicMeasure, leaf_size: int = 16):
        from . import _kernels

        self.mu = mu
        self._k = _kernels
        if len(mu) == 0:
            self.arrays = None
            return
        (perm, lo, hi, left, right, box_lo, box_hi, mass, _, _) = _kernels.build_tree(
            np.ascontiguousarray(mu.positions), np.ascontiguousarray(mu.weights), leaf_size)
        self.positions = np.ascontiguousarray(mu.positions[perm])
        self.weights = np.ascontiguousarray(mu.weights[perm])
        self.arrays = (lo, hi, left, right, box_lo, box_hi, mass)
        self.margin = 2.1 * len(mu) * 2.0 ** -53

    def shell(self, x, r_in: float, r_out: float) -> float:
        """Approximate mass of r_in <= |a - x| < r_out (tree summation order)."""
        if self.arrays is None:
            return 0.0
        return self._k.shell_mass(self.positions, self.weights, *self.arrays,
                                  np.ascontiguousarray(x, dtype=float), float(r_in), float(r_out))

    def exact_shell(self, x, r_in: float, r_out: float) -> float:
        """Index-order mass of r_in <= |a - x| < r_out."""
        idx = self.mu.ball_indices(x, r_out)
        if r_in > 0.0 and idx.size:
            idx = idx[distances(self.mu.positions[idx], np.asarray(x, dtype=float)) >= r_in]
        return float(np.sum(self.mu.weights[idx]))

    def shells(self, xs, r_in, r_out) -> np.ndarray:
        """Vectorised :meth:`shell` over centres ``xs`` (radii broadcast)."""
        xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, self.mu.d))
        m = xs.shape[0]
        if self.arrays is None or m == 0:
            return np.zeros(m)
        r_in = np.ascontiguousarray(np.broadcast_to(np.asarray(r_in, dtype=float), (m,)))
        r_out = np.ascontiguousarray(np.broadcast_to(np.asarray(r_out, dtype=float), (m,)))
        return self._k.shell_mass_batch(self.positions, self.weights, *self.arrays, xs, r_in, r_out)

    def balls_at_most(self, xs, rs, thresholds) -> np.ndarray:
        """Vectorised :meth:`ball_at_most`; ambiguous cases use exact sums."""
        xs = np.asarray(xs, dtype=float).reshape(-1, self.mu.d)
        m = xs.shape[0]
        rs = np.broadcast_to(np.asarray(rs, dtype=float), (m,))
        thr = np.broadcast_to(np.asarray(thresholds, dtype=float), (m,))
        approx = self.shells(xs, 0.0, rs)
        slack = self.margin * np.maximum(approx, thr)
        out = approx < thr
        for i in np.flatnonzero(np.abs(approx - thr) <= slack):
            out[i] = self.mu.ball_mass(xs[i], rs[i]) <= thr[i]
        return out

    def ball_at_most(self, x, r: float, threshold: float) -> bool:
        """Exact decision of mu(B(x, r)) <= threshold."""
        m = self.shell(x, 0.0, r)
        slack = self.margin * max(m, threshold)
        if m < threshold - slack:
            return True
        if m > threshold + slack:
            return False
        return self.mu.ball_mass(x, r) <= threshold

    def annulus_small(self, x, r_in: float, r_out: float, factor: float) -> bool:
        """Exact decision of mu(r_in <= |a-x| < r_out) <= factor * mu(B(x, r_out))."""
        ring = self.shell(x, r_in, r_out)
        ball = self.shell(x, 0.0, r_out)
        slack = self.margin * ball * (1.0 + factor) * 2.0
        if ring < factor * ball - slack:
            return True
        if ring > factor * ball + slack:
            return False
        exact_ring = self.exact_shell(x, r_in, r_out)
        return exact_ring <= factor * self.mu.ball_mass(x, r_out)
