"""Multi-level Cantor-type construction of a rarefied measure.

Each level starts from a cell (an atom set with a defining ball) and a
retained core.  The core is covered by disjoint balls at good scales
(top cover); each core atom then looks for a low-density dyadic scale
inside its top ball, shrinks that radius until the surrounding thin
annulus is light, and the resulting balls are selected greedily by size
(bottom cover).  Shrunken, order-trimmed copies of the bottom balls form
the next cells.

All ball-mass comparisons are decided exactly, i.e. they agree with the
index-order sums of :meth:`AtomicMeasure.ball_mass`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import (ConstructionFailure, InsufficientScalesError,
                     InvalidArgumentError, VerificationFailure)
from .measure import AtomicMeasure, MassTree, distances, point_set_diameter


@dataclass(frozen=True)
class CantorParams:
    N: int
    eps: float
    M: float
    delta: float
    Delta: float
    q: int
    gamma: float = 1.0
    k_max: int = 64
    shrink_cap: int = 10_000

    def __post_init__(self):
        if self.N < 0:
            raise InvalidArgumentError("N must be non-negative")
        if not (0.0 < self.eps <= 0.5):
            raise InvalidArgumentError(f"eps must lie in (0, 1/2], got {self.eps}")
        if not (self.M > 4.0):
            raise InvalidArgumentError(f"M must exceed 4, got {self.M}")
        if not (self.Delta > 0.0):
            raise InvalidArgumentError("Delta must be positive")
        if not (0.0 < self.delta < 1.0):
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {self.delta}")
        if self.q < 0 or self.k_max < 0 or self.shrink_cap < 1:
            raise InvalidArgumentError("q, k_max must be >= 0 and shrink_cap >= 1")
        if not (0.0 < self.gamma <= 1.0):
            raise InvalidArgumentError("gamma must lie in (0, 1]")

    def check_for(self, s: float) -> None:
        """Conditions that involve the dimension s of the measure."""
        if not ((1.0 - 3.0 * self.eps) ** s > 0.5):
            raise InvalidArgumentError(
                f"need (1 - 3 eps)^s > 1/2; eps={self.eps} is too large for s={s}")
        if not (self.delta < self.Delta / 2.0 ** (s + 1.0)):
            raise InvalidArgumentError(
                f"need delta < Delta / 2^(s+1) = {self.Delta / 2.0 ** (s + 1.0)}")

    @property
    def shrink(self) -> float:
        return 1.0 - 3.0 * self.eps

    def budget(self, level: int) -> float:
        """Good scales needed per atom when starting the given level."""
        per_level = self.q + math.log2(self.M) + math.log2(1.0 / self.eps) + 3.0
        return (self.N - level) * per_level

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("N", "eps", "M", "delta", "Delta", "q", "gamma", "k_max", "shrink_cap")}


@dataclass(frozen=True)
class AdmissibleTriple:
    """Cell atoms, retained core (a subset) and the enclosing ball."""

    atoms: np.ndarray
    core: np.ndarray
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class TopCoverBall:
    center: np.ndarray
    center_atom: int
    scale: float  # the good scale r_j; the ball itself has radius 4 r_j
    parent: int = 0

    @property
    def radius(self) -> float:
        return 4.0 * self.scale


@dataclass(frozen=True)
class TopCover:
    balls: list[TopCoverBall]
    atoms: np.ndarray        # core atoms, ascending
    atom_scale: np.ndarray   # r_x per core atom
    owner: np.ndarray        # index of the first ball with |x - z| < 2 r

    def __len__(self) -> int:
        return len(self.balls)

    def __iter__(self):
        return iter(self.balls)

    def __getitem__(self, i):
        return self.balls[i]


@dataclass(frozen=True)
class BottomBall:
    center: np.ndarray
    radius: float
    candidate: int


@dataclass(frozen=True)
class Cell:
    level: int
    atoms: np.ndarray
    core: np.ndarray
    center: np.ndarray
    center_atom: int
    radius: float
    dyadic_steps: int = 0
    shrink_steps: int = 0
    shrink_factor: float = 1.0
    parent: int = -1
    top_ball: int = -1

    @property
    def triple(self) -> AdmissibleTriple:
        return AdmissibleTriple(self.atoms, self.core, self.center, self.radius)


def _mass_tree(mu: AtomicMeasure) -> MassTree:
    tree = getattr(mu, "_mass_tree", None)
    if tree is None:
        tree = MassTree(mu)
        mu._mass_tree = tree
    return tree


def _sorted_atoms(idx) -> np.ndarray:
    return np.unique(np.asarray(idx, dtype=np.intp))


# ---------------------------------------------------------------------------
# top cover

def _first_good_scale(mu, atoms, Delta, k_start, k_max):
    """Smallest k >= k_start with mu(B(x, 2^-k)) > (Delta/2^s) 2^(-sk), or -1."""
    tree = _mass_tree(mu)
    pts = mu.positions[atoms]
    found = np.full(atoms.shape[0], -1, dtype=np.int64)
    pending = np.arange(atoms.shape[0])
    c = Delta / 2.0 ** mu.s
    for k in range(k_start, k_max + 1):
        if pending.size == 0:
            break
        r = 2.0 ** (-k)
        good = ~tree.balls_at_most(pts[pending], r, c * r ** mu.s)
        found[pending[good]] = k
        pending = pending[~good]
    return found


def good_scale_counts(mu, atoms, Delta, k_start, k_max, stop_at=None):
    """Number of good dyadic scales 2^-k, k in [k_start, k_max], per atom.

    Counting for an atom stops once it reaches ``stop_at``.
    """
    tree = _mass_tree(mu)
    atoms = np.asarray(atoms, dtype=np.intp)
    pts = mu.positions[atoms]
    counts = np.zeros(atoms.shape[0], dtype=np.int64)
    live = np.arange(atoms.shape[0])
    c = Delta / 2.0 ** mu.s
    for k in range(k_start, k_max + 1):
        if live.size == 0:
            break
        r = 2.0 ** (-k)
        counts[live] += ~tree.balls_at_most(pts[live], r, c * r ** mu.s)
        if stop_at is not None:
            live = live[counts[live] < stop_at]
    return counts


def _scale_start(eps, rho):
    """Least k >= 0 with 2^-k <= eps * rho / 4."""
    k = max(0, math.ceil(-math.log2(eps * rho / 4.0)))
    while k > 0 and 2.0 ** (-(k - 1)) <= eps * rho / 4.0:
        k -= 1
    while 2.0 ** (-k) > eps * rho / 4.0:
        k += 1
    return k


def build_top_cover(mu: AtomicMeasure, triple: AdmissibleTriple, Delta: float, eps: float,
                    k_max: int = 64) -> TopCover:
    """Greedy disjoint cover of the core by balls at good scales."""
    core = _sorted_atoms(triple.core)
    if core.size == 0:
        return TopCover([], core, np.zeros(0), np.zeros(0, dtype=np.intp))
    k0 = _scale_start(eps, triple.radius)
    ks = _first_good_scale(mu, core, Delta, k0, k_max)
    if np.any(ks < 0):
        bad = int(core[np.argmax(ks < 0)])
        raise InsufficientScalesError(
            f"atom {bad} has no good scale in [2^-{k_max}, {2.0 ** -k0}]",
            atom=bad, k_start=k0, k_max=k_max)
    scale = 2.0 ** (-ks.astype(float))
    order = np.lexsort((core, -scale))
    pts = mu.positions[core]
    chosen: list[int] = []
    centers = np.zeros((0, mu.d))
    radii = np.zeros(0)
    for i in order:
        if chosen:
            dist = distances(centers, pts[i])
            if np.any(dist < radii + scale[i]):
                continue
        chosen.append(int(i))
        centers = np.vstack([centers, pts[i]])
        radii = np.append(radii, scale[i])
    balls = [TopCoverBall(pts[i].copy(), int(core[i]), float(scale[i])) for i in chosen]
    owner = np.full(core.size, -1, dtype=np.intp)
    for j in range(len(balls) - 1, -1, -1):
        inside = distances(pts, centers[j]) < 2.0 * radii[j]
        owner[inside] = j
    if np.any(owner < 0) or np.any(radii[owner] < scale):
        raise VerificationFailure("top cover misses a core atom", atom=int(core[np.argmax(owner < 0)]))
    return TopCover(balls, core, scale, owner)


# ---------------------------------------------------------------------------
# low-density scales and stable radii

def _low_density_steps(mu, pts, centers, scales, M, delta, q):
    """Smallest dyadic step per point meeting both conditions, or -1."""
    tree = _mass_tree(mu)
    n = pts.shape[0]
    steps = np.full(n, -1, dtype=np.int64)
    if delta <= 0.0:
        return steps
    offset = distances_rows(pts, centers)
    pending = np.arange(n)
    for ell in range(q + 1):
        if pending.size == 0:
            break
        t = scales[pending] * 2.0 ** (-ell)
        geom = (M * t <= scales[pending]) & (offset[pending] + M * t <= 3.0 * scales[pending])
        cand = pending[geom]
        if cand.size == 0:
            continue
        tc = scales[cand] * 2.0 ** (-ell)
        ok = tree.balls_at_most(pts[cand], M * tc, delta * tc ** mu.s)
        steps[cand[ok]] = ell
        pending = np.setdiff1d(pending, cand[ok], assume_unique=True)
    return steps


def distances_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise canonical distances |a_i - b_i|."""
    diff = a[:, 0] - b[:, 0]
    acc = diff * diff
    for j in range(1, a.shape[1]):
        diff = a[:, j] - b[:, j]
        acc += diff * diff
    return np.sqrt(acc)


def find_low_density_scale(mu: AtomicMeasure, x, top_ball: TopCoverBall, M: float,
                           delta: float, q: int) -> float | None:
    """Largest t = r 2^-l (l <= q) with mu(B(x, M t)) <= delta t^s whose
    ball B(x, M t) keeps distance r from the boundary of the top ball."""
    x = mu.point(x)
    steps = _low_density_steps(mu, x[None, :], top_ball.center[None, :],
                               np.array([top_ball.scale]), M, delta, q)
    if steps[0] < 0:
        return None
    return top_ball.scale * 2.0 ** (-int(steps[0]))


def _shrink_steps(mu, pts, ts, eps, cap):
    tree = _mass_tree(mu)
    lam = 1.0 - 3.0 * eps
    factor = 3.0 * mu.d * eps
    n = pts.shape[0]
    steps = np.full(n, -1, dtype=np.int64)
    pending = np.arange(n)
    k = 0
    while pending.size and k <= cap:
        outer = ts[pending] * lam ** k
        inner = ts[pending] * lam ** (k + 1)
        ring = tree.shells(pts[pending], inner, outer)
        ball = tree.shells(pts[pending], 0.0, outer)
        slack = tree.margin * ball * (1.0 + factor) * 2.0
        ok = ring < factor * ball - slack
        for i in np.flatnonzero(np.abs(ring - factor * ball) <= slack):
            a = pending[i]
            ok[i] = tree.exact_shell(pts[a], inner[i], outer[i]) <= factor * mu.ball_mass(pts[a], outer[i])
        steps[pending[ok]] = k
        pending = pending[~ok]
        k += 1
    return steps


@dataclass(frozen=True)
class StableRadius:
    radius: float
    steps: int


def shrink_to_stable_radius(mu: AtomicMeasure, x, t: float, eps: float, d: int | None = None,
                            cap: int = 10_000) -> StableRadius:
    """Least k with mu(lam^(k+1) t <= |a - x| < lam^k t) <= 3 d eps mu(B(x, lam^k t)),
    lam = 1 - 3 eps; returns lam^k t and k."""
    x = mu.point(x)
    if d is not None and d != mu.d:
        raise InvalidArgumentError("dimension does not match the measure")
    if not ((1.0 - 3.0 * eps) ** mu.s > 0.5):
        raise InvalidArgumentError("need (1 - 3 eps)^s > 1/2")
    if not (t > 0):
        raise InvalidArgumentError("t must be positive")
    steps = _shrink_steps(mu, x[None, :], np.array([float(t)]), eps, cap)
    if steps[0] < 0:
        raise ConstructionFailure(f"annulus condition not met within {cap} shrink steps",
                                  center=x.tolist(), t=float(t), cap=cap)
    k = int(steps[0])
    return StableRadius(float(t) * (1.0 - 3.0 * eps) ** k, k)


# ---------------------------------------------------------------------------
# bottom cover

def build_bottom_cover(candidates, atom_ids=None) -> list[BottomBall]:
    """Greedy selection by decreasing radius of candidates whose centre is
    outside every ball already chosen.  ``candidates`` is a sequence of
    (centre, radius); ties go to the lower atom id (default: position)."""
    cand = list(candidates)
    if not cand:
        return []
    pts = np.array([np.asarray(c, dtype=float) for c, _ in cand])
    rad = np.array([float(r) for _, r in cand])
    ids = np.arange(len(cand)) if atom_ids is None else np.asarray(atom_ids)
    order = np.lexsort((ids, -rad))
    chosen: list[int] = []
    centers = np.zeros((0, pts.shape[1]))
    radii = np.zeros(0)
    for i in order:
        if chosen and np.any(distances(centers, pts[i]) < radii):
            continue
        chosen.append(int(i))
        centers = np.vstack([centers, pts[i]])
        radii = np.append(radii, rad[i])
    return [BottomBall(pts[i].copy(), float(rad[i]), i) for i in chosen]


# ---------------------------------------------------------------------------
# one level

@dataclass
class LevelDiagnostics:
    level: int
    core_mass: float = 0.0
    cell_mass: float = 0.0
    exceptional_mass: float = 0.0
    retained_core_mass: float = 0.0
    top_balls: int = 0
    bottom_balls: int = 0
    top_mass_ratio: float = 0.0
    min_good_scales: int = 0
    budget: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def loss(self) -> float:
        return self.core_mass - self.retained_core_mass

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items()}
        out["loss"] = self.loss
        return out


@dataclass
class LevelResult:
    children: list[Cell]
    top_cover: TopCover
    diagnostics: LevelDiagnostics

    @property
    def triples(self) -> list[AdmissibleTriple]:
        return [c.triple for c in self.children]

    def __len__(self) -> int:
        return len(self.children)

    def __iter__(self):
        return iter(self.triples)


def _check_separation(mu, cells, eps):
    """Witness pair of atoms from distinct cells closer than eps * max(rho), or None."""
    if len(cells) < 2:
        return None
    atoms = np.concatenate([c.atoms for c in cells])
    if atoms.size == 0:
        return None
    label = np.concatenate([np.full(c.atoms.size, i) for i, c in enumerate(cells)])
    rho = np.array([c.radius for c in cells])
    pts = mu.positions[atoms]
    tree = cKDTree(pts)
    reach = eps * rho.max() * (1.0 + 1e-9)
    for a, b in sorted(tree.query_pairs(reach)):
        if label[a] == label[b]:
            continue
        gap = float(distances(pts[a][None, :], pts[b])[0])
        if gap < eps * max(rho[label[a]], rho[label[b]]):
            return {"atoms": (int(atoms[a]), int(atoms[b])),
                    "cells": (int(label[a]), int(label[b])), "distance": gap}
    return None


def build_level(mu: AtomicMeasure, triple: AdmissibleTriple, params: CantorParams,
                level: int = 0, parent: int = -1) -> LevelResult:
    """Children of one admissible triple, with the level properties checked."""
    params.check_for(mu.s)
    eps, M = params.eps, params.M
    core = _sorted_atoms(triple.core)
    cell_atoms = _sorted_atoms(triple.atoms)
    diag = LevelDiagnostics(level + 1)
    diag.cell_mass = float(np.sum(mu.weights[cell_atoms]))
    diag.core_mass = float(np.sum(mu.weights[core]))
    diag.budget = params.budget(level)
    if core.size == 0:
        return LevelResult([], build_top_cover(mu, triple, params.Delta, eps, params.k_max), diag)

    cover = build_top_cover(mu, triple, params.Delta, eps, params.k_max)
    cover = replace(cover, balls=[replace(b, parent=parent) for b in cover.balls])
    diag.top_balls = len(cover)
    diag.top_mass_ratio = (sum(mu.ball_mass(b.center, b.radius) for b in cover)
                           / diag.cell_mass)
    k0 = _scale_start(eps, triple.radius)
    counts = good_scale_counts(mu, core, params.Delta, k0, params.k_max,
                               stop_at=max(1, math.ceil(diag.budget)))
    diag.min_good_scales = int(counts.min())

    pts = mu.positions[core]
    top_centers = np.array([b.center for b in cover.balls])[cover.owner]
    top_scales = np.array([b.scale for b in cover.balls])[cover.owner]
    ells = _low_density_steps(mu, pts, top_centers, top_scales, M, params.delta, params.q)
    kept = ells >= 0
    diag.exceptional_mass = float(np.sum(mu.weights[core[~kept]]))
    t = top_scales[kept] * 2.0 ** (-ells[kept].astype(float))
    steps = _shrink_steps(mu, pts[kept], t, eps, params.shrink_cap)
    if np.any(steps < 0):
        bad = int(core[kept][np.argmax(steps < 0)])
        raise ConstructionFailure("annulus condition not met within the shrink cap",
                                  level=level + 1, cell=parent, atom=bad)
    rho = t * params.shrink ** steps.astype(float)
    good_atoms = core[kept]
    bottom = build_bottom_cover(zip(pts[kept], rho), atom_ids=good_atoms)
    diag.bottom_balls = len(bottom)

    # cells: order-trimmed shrunken bottom balls, atoms by first open ball
    cpts = mu.positions[cell_atoms]
    taken = np.zeros(cell_atoms.size, dtype=bool)
    retained = np.zeros(mu.weights.shape[0], dtype=bool)
    retained[good_atoms] = True
    children: list[Cell] = []
    for b in bottom:
        dist = distances(cpts, b.center)
        in_ball = (dist < b.radius) & ~taken
        inner = in_ball & (dist <= params.shrink * b.radius)
        taken |= in_ball
        members = cell_atoms[inner]
        if members.size == 0:
            continue
        src = np.flatnonzero(kept)[b.candidate]
        children.append(Cell(
            level=level + 1, atoms=members, core=members[retained[members]],
            center=b.center, center_atom=int(core[src]), radius=b.radius,
            dyadic_steps=int(ells[src]), shrink_steps=int(steps[b.candidate]),
            shrink_factor=params.shrink ** int(steps[b.candidate]),
            parent=parent, top_ball=int(cover.owner[src])))
    diag.retained_core_mass = float(sum(np.sum(mu.weights[c.core]) for c in children))

    # properties (d), (e), (g)
    witness = _check_separation(mu, children, eps)
    diag.checks["separation"] = witness is None
    if witness is not None:
        raise VerificationFailure("same-level cells are too close", **witness)
    bound = 2.0 * M ** mu.s * params.delta
    for i, c in enumerate(children):
        m = mu.ball_mass(c.center, M * c.radius)
        if not m <= bound * c.radius ** mu.s:
            raise VerificationFailure("bottom ball is not low density", cell=i, mass=m,
                                      bound=bound * c.radius ** mu.s)
        top = cover.balls[c.top_ball]
        gap = float(distances(c.center[None, :], top.center)[0])
        if not (M * c.radius <= top.scale and gap + c.radius <= 3.0 * top.scale):
            raise VerificationFailure("bottom ball is not deep in its top ball", cell=i)
    diag.checks["low_density"] = True
    diag.checks["association"] = True
    if not children:
        raise ConstructionFailure("every core atom fell into the exceptional set",
                                  level=level + 1, cell=parent, loss=diag.loss,
                                  exceptional_mass=diag.exceptional_mass)
    return LevelResult(children, cover, diag)


# ---------------------------------------------------------------------------
# the tree

@dataclass
class CantorTree:
    measure: AtomicMeasure
    params: CantorParams
    core: np.ndarray
    levels: list[list[Cell]]
    top_covers: list[list[TopCoverBall]]
    diagnostics: list[LevelDiagnostics]
    failure: dict | None = None

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def support_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.measure), dtype=bool)
        for c in self.levels[-1]:
            mask[c.atoms] = True
        return mask

    @property
    def rarefied_weights(self) -> np.ndarray:
        return np.where(self.support_mask, self.measure.weights, 0.0)

    def rarefied(self) -> AtomicMeasure:
        return self.measure.restrict(self.support_mask)

    @property
    def retained_fraction(self) -> float:
        return float(np.sum(self.rarefied_weights)) / self.measure.total_mass

    def cell_of(self, atom: int, level: int) -> int:
        """Index of the level cell containing the atom, or -1."""
        for i, c in enumerate(self.levels[level]):
            j = np.searchsorted(c.atoms, atom)
            if j < c.atoms.size and c.atoms[j] == atom:
                return i
        return -1

    def cell_labels(self, level: int) -> np.ndarray:
        """Per-atom index of the containing level cell (-1 if none)."""
        lab = np.full(len(self.measure), -1, dtype=np.intp)
        for i, c in enumerate(self.levels[level]):
            lab[c.atoms] = i
        return lab


def initial_cell(mu: AtomicMeasure, E_atoms, eps: float) -> Cell:
    core = _sorted_atoms(E_atoms)
    if core.size == 0:
        raise InvalidArgumentError("E must contain at least one atom")
    if core[0] < 0 or core[-1] >= len(mu):
        raise InvalidArgumentError("E atom index out of range")
    rho = 2.0 * point_set_diameter(mu.positions[core]) + 4.0 / eps
    halo = eps * rho
    near, _ = cKDTree(mu.positions[core]).query(mu.positions, distance_upper_bound=halo * (1.0 + 1e-9))
    inside = near <= halo * (1.0 - 1e-9)
    # settle borderline atoms with the canonical distance
    for a in np.flatnonzero((near <= halo * (1.0 + 1e-9)) & ~inside):
        inside[a] = bool(np.min(distances(mu.positions[core], mu.positions[a])) <= halo)
    inside[core] = True
    atoms = np.flatnonzero(inside).astype(np.intp)
    return Cell(0, atoms, core, mu.positions[core[0]].copy(), int(core[0]), float(rho))


def build_cantor_tree(mu: AtomicMeasure, E_atoms, params: CantorParams,
                      raise_on_failure: bool = True) -> CantorTree:
    """N levels of cells starting from the halo of E.

    A parent whose core is entirely exceptional simply has no children;
    the run fails only when a whole level comes out empty.
    """
    params.check_for(mu.s)
    root = initial_cell(mu, E_atoms, params.eps)
    tree = CantorTree(mu, params, root.core, [[root]], [[]], [])
    for level in range(params.N):
        cells: list[Cell] = []
        tops: list[TopCoverBall] = []
        diag = LevelDiagnostics(level + 1, budget=params.budget(level))
        diag.min_good_scales = 1 << 30
        for p, parent in enumerate(tree.levels[-1]):
            try:
                res = build_level(mu, parent.triple, params, level, p)
            except ConstructionFailure as exc:
                if "exceptional_mass" not in exc.diagnostics:
                    exc.diagnostics.setdefault("level", level + 1)
                    exc.diagnostics.setdefault("cell", p)
                    raise
                d = exc.diagnostics
                diag.core_mass += float(np.sum(mu.weights[parent.core]))
                diag.cell_mass += float(np.sum(mu.weights[parent.atoms]))
                diag.exceptional_mass += d["exceptional_mass"]
                continue
            offset = len(tops)
            tops.extend(res.top_cover.balls)
            cells.extend(replace(c, top_ball=c.top_ball + offset) for c in res.children)
            rd = res.diagnostics
            diag.core_mass += rd.core_mass
            diag.cell_mass += rd.cell_mass
            diag.exceptional_mass += rd.exceptional_mass
            diag.retained_core_mass += rd.retained_core_mass
            diag.top_balls += rd.top_balls
            diag.bottom_balls += rd.bottom_balls
            diag.min_good_scales = min(diag.min_good_scales, rd.min_good_scales)
        if diag.min_good_scales == 1 << 30:
            diag.min_good_scales = 0
        witness = _check_separation(mu, cells, params.eps)
        if witness is not None:
            raise VerificationFailure("cells of one level are too close", level=level + 1, **witness)
        diag.checks = {"separation": True, "low_density": True, "association": True}
        tree.diagnostics.append(diag)
        if not cells:
            failure = ConstructionFailure(
                f"level {level + 1} is empty: every core atom is exceptional",
                level=level + 1, loss=diag.loss, exceptional_mass=diag.exceptional_mass)
            tree.failure = {"message": str(failure), **failure.diagnostics}
            if raise_on_failure:
                raise failure
            return tree
        tree.levels.append(cells)
        tree.top_covers.append(tops)
    return tree


# ---------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VerificationReport:
    properties: list[PropertyResult]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def __getitem__(self, name: str) -> PropertyResult:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "properties": [{"name": p.name, "passed": p.passed, "detail": p.detail}
                               for p in self.properties]}


def verify_construction(tree: CantorTree, rarefied_weights=None) -> VerificationReport:
    """Domination, support separation and retained mass of the rarefied measure."""
    mu = tree.measure
    w = tree.rarefied_weights if rarefied_weights is None else np.asarray(rarefied_weights, float)
    props = []

    over = np.flatnonzero(w > mu.weights)
    props.append(PropertyResult("domination", over.size == 0,
                                {} if over.size == 0 else {"atom": int(over[0]),
                                                           "weight": float(w[over[0]]),
                                                           "bound": float(mu.weights[over[0]])}))

    support = np.flatnonzero(w > 0)
    witness: dict = {}
    if support.size and tree.depth > 0:
        sup_tree = cKDTree(mu.positions[support])
        for level in range(1, tree.depth + 1):
            for i, c in enumerate(tree.levels[level]):
                reach = tree.params.eps * c.radius
                hits = sup_tree.query_ball_point(mu.positions[c.atoms], reach * (1.0 + 1e-9))
                for a, near in zip(c.atoms, hits):
                    for h in sorted(near):
                        b = support[h]
                        if np.searchsorted(c.atoms, b) < c.atoms.size and \
                                c.atoms[np.searchsorted(c.atoms, b)] == b:
                            continue
                        gap = float(distances(mu.positions[b][None, :], mu.positions[a])[0])
                        if gap < reach:
                            witness = {"level": level, "cell": i, "atoms": (int(a), int(b)),
                                       "distance": gap, "required": reach}
                            break
                    if witness:
                        break
                if witness:
                    break
            if witness:
                break
    props.append(PropertyResult("separation", not witness, witness))

    kept = float(np.sum(w))
    target = tree.params.gamma / 2.0 * mu.total_mass
    props.append(PropertyResult("significant_mass", kept >= target,
                                {"retained": kept, "target": target,
                                 "fraction": kept / mu.total_mass}))
    return VerificationReport(props)
