"""Diagnostics on a built Cantor tree: partial kernel sums, their energies,
the pairwise cancellation inside cells, the bump sum Psi and g_A."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cantor import CantorTree
from .errors import InvalidArgumentError, VerificationFailure
from .measure import distances


def _kernel_rows(pos: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    """(a - x) / |a - x|^(1+s) for each row a (no coincidences allowed)."""
    dist = distances(pos, x)
    return (pos - x) / (dist ** (1.0 + s))[:, None]


# ---------------------------------------------------------------------------
# partial kernel sums

def partial_riesz(tree: CantorTree, atom: int, k: int) -> np.ndarray:
    """Kernel sum at the atom over the rarefied measure on its level-k cell
    minus its level-(k+1) cell."""
    if not (0 <= k < tree.depth):
        raise InvalidArgumentError(f"level must lie in [0, {tree.depth - 1}]")
    w = tree.rarefied_weights
    if w[atom] == 0.0:
        raise InvalidArgumentError(f"atom {atom} is not in the rarefied support")
    inner = tree.cell_of(atom, k + 1)
    if inner < 0:
        raise InvalidArgumentError(f"atom {atom} lies in no level-{k + 1} cell")
    outer = tree.levels[k][tree.cell_of(atom, k)]
    ring = np.setdiff1d(outer.atoms, tree.levels[k + 1][inner].atoms, assume_unique=True)
    ring = ring[w[ring] > 0]
    mu = tree.measure
    if ring.size == 0:
        return np.zeros(mu.d)
    x = mu.positions[atom]
    coef = w[ring] / distances(mu.positions[ring], x) ** (1.0 + mu.s)
    return np.array([np.sum(coef * (mu.positions[ring, j] - x[j])) for j in range(mu.d)])


def partial_riesz_all(tree: CantorTree) -> tuple[np.ndarray, np.ndarray]:
    """Support atoms and the array of partial sums, shape (levels, atoms, d)."""
    support = np.flatnonzero(tree.rarefied_weights > 0)
    out = np.zeros((tree.depth, support.size, tree.measure.d))
    for k in range(tree.depth):
        for i, a in enumerate(support):
            out[k, i] = partial_riesz(tree, int(a), k)
    return support, out


# ---------------------------------------------------------------------------
# cancellation inside a cell

@dataclass(frozen=True)
class MeanZeroResult:
    residual: np.ndarray
    scale: float
    pairs: int

    @property
    def relative(self) -> float:
        if self.scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.residual))) / self.scale


def mean_zero_check(tree: CantorTree, k: int, j: int, rng=None) -> MeanZeroResult:
    """Double sum of w_x w_y K(y - x) over pairs of support atoms of the
    level-(k+1) cell j that sit in different final cells.

    The summand is antisymmetric, so the result is zero up to rounding.
    ``rng`` (a seed or Generator) shuffles the summation order.
    """
    if not (0 <= k < tree.depth):
        raise InvalidArgumentError(f"level must lie in [0, {tree.depth - 1}]")
    cells = tree.levels[k + 1]
    if not (0 <= j < len(cells)):
        raise InvalidArgumentError(f"no cell {j} at level {k + 1}")
    mu = tree.measure
    w = tree.rarefied_weights
    atoms = cells[j].atoms[w[cells[j].atoms] > 0]
    if rng is not None:
        atoms = np.random.default_rng(rng).permutation(atoms)
    final = tree.cell_labels(tree.depth)[atoms]
    pos = mu.positions[atoms]
    wa = w[atoms]
    total = np.zeros(mu.d)
    scale = 0.0
    pairs = 0
    for i in range(atoms.size):
        other = final != final[i]
        if not np.any(other):
            continue
        kern = _kernel_rows(pos[other], pos[i], mu.s) * (wa[i] * wa[other])[:, None]
        total += kern.sum(axis=0)
        scale += float(np.sum(np.linalg.norm(kern, axis=1)))
        pairs += int(np.count_nonzero(other))
    return MeanZeroResult(total, scale, pairs)


# ---------------------------------------------------------------------------
# energies

@dataclass(frozen=True)
class HarnessReport:
    rarefied_mass: float
    level_energies: list[float]
    cross_terms: dict
    sum_energy: float
    identity_residual: float
    psi_integrals: list[float] = field(default_factory=list)
    g_norms: dict = field(default_factory=dict)

    @property
    def energy_ratios(self) -> list[float]:
        return [e / self.rarefied_mass for e in self.level_energies]

    @property
    def sum_ratio(self) -> float:
        return self.sum_energy / self.rarefied_mass

    def to_dict(self) -> dict:
        return {
            "rarefied_mass": self.rarefied_mass,
            "level_energies": self.level_energies,
            "energy_ratios": self.energy_ratios,
            "cross_terms": {f"{a},{b}": v for (a, b), v in self.cross_terms.items()},
            "sum_energy": self.sum_energy,
            "sum_ratio": self.sum_ratio,
            "identity_residual": self.identity_residual,
            "psi_integrals": self.psi_integrals,
            "g_norms": {str(k): v for k, v in self.g_norms.items()},
        }


def level_energies(tree: CantorTree, g_dilations=(2.0, 4.0, 8.0, 16.0),
                   psi_spec: "PsiSpec | None" = None) -> HarnessReport:
    """Integrals of |R^(k)|^2, the cross terms and |sum_k R^(k)|^2 against
    the rarefied measure, with the bilinear identity checked."""
    if tree.depth < 1:
        raise InvalidArgumentError("energies need a tree with at least one level")
    support, field_k = partial_riesz_all(tree)
    w = tree.rarefied_weights[support]
    mass = float(np.sum(w))
    levels = [float(np.sum(w * np.sum(field_k[k] ** 2, axis=1))) for k in range(tree.depth)]
    cross = {}
    for a in range(tree.depth):
        for b in range(a + 1, tree.depth):
            cross[(a, b)] = float(np.sum(w * np.sum(field_k[a] * field_k[b], axis=1)))
    total = field_k.sum(axis=0)
    sum_energy = float(np.sum(w * np.sum(total ** 2, axis=1)))
    expanded = sum(levels) + 2.0 * sum(cross.values())
    residual = abs(sum_energy - expanded) / max(sum_energy, expanded, np.finfo(float).tiny)
    if residual > 1e-9:
        raise VerificationFailure("energy does not expand bilinearly",
                                  sum_energy=sum_energy, expanded=expanded)
    spec = psi_spec or PsiSpec(tree.measure.d)
    covers = [level_covers(tree, n) for n in range(1, tree.depth + 1)]
    psi = [psi_integral(spec, c) for c in covers]
    g = {float(A): [g_norm(c, A) for c in covers] for A in g_dilations}
    return HarnessReport(mass, levels, cross, sum_energy, residual, psi, g)


# ---------------------------------------------------------------------------
# bump function and Psi

def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def _smoothstep(u):
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)


# 1 - smoothstep(r - 1) as a polynomial in r on [1, 2]
_FALL = np.polynomial.Polynomial([1.0]) - np.polynomial.Polynomial(
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0])(np.polynomial.Polynomial([-1.0, 1.0]))


@dataclass(frozen=True)
class PsiSpec:
    """Radial bump: constant on B(0,1), quintic fall-off on 1 < r < 2,
    scaled so its integral equals the volume of B(0,2)."""

    d: int
    k_max: int = 40

    def __post_init__(self):
        if self.d not in (2, 3):
            raise InvalidArgumentError("dimension must be 2 or 3")
        if self.k_max < 2:
            raise InvalidArgumentError("k_max must be at least 2")

    @property
    def height(self) -> float:
        d = self.d
        shell = (_FALL * np.polynomial.Polynomial([0.0] * (d - 1) + [1.0])).integ()
        raw = _unit_ball_volume(d) + d * _unit_ball_volume(d) * float(shell(2.0) - shell(1.0))
        return 2.0 ** d * _unit_ball_volume(d) / raw

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        u = np.clip(r - 1.0, 0.0, 1.0)
        return self.height * (1.0 - _smoothstep(u))

    def slope_max(self) -> float:
        return self.height * 15.0 / 8.0

    def tail_bound(self, s: float) -> float:
        return 2.0 ** (self.k_max * (s - self.d)) / (1.0 - 2.0 ** (s - self.d))

    def check(self, samples: int = 200_001) -> dict:
        """The four bump constraints, with a trapezoid check of the integral."""
        r = np.linspace(0.0, 2.0, samples)
        phi = self.profile(r)
        shell = phi * self.d * _unit_ball_volume(self.d) * r ** (self.d - 1)
        integral = float(np.trapezoid(shell, r))
        target = _unit_ball_volume(self.d) * 2.0 ** self.d
        return {
            "at_least_one_inside": bool(np.all(phi[r <= 1.0] >= 1.0)),
            "bounded": bool(np.all(phi <= 2.0 ** self.d)),
            "slope": bool(self.slope_max() <= 2.0 * 2.0 ** self.d),
            "integral": abs(integral - target) / target,
        }


@dataclass(frozen=True)
class LevelCovers:
    """Top balls of one level that are not contained in another, with the
    rarefied mass of the cells assigned to each."""

    centers: np.ndarray
    scales: np.ndarray
    tilde_mass: np.ndarray
    s: float
    d: int
    support: np.ndarray = field(default=None, repr=False)
    support_weights: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.scales.size


def level_covers(tree: CantorTree, level: int) -> LevelCovers:
    if not (1 <= level <= tree.depth):
        raise InvalidArgumentError(f"level must lie in [1, {tree.depth}]")
    mu = tree.measure
    w = tree.rarefied_weights
    support, support_w = mu.positions[w > 0], w[w > 0]
    balls = tree.top_covers[level]
    if not balls:
        return LevelCovers(np.zeros((0, mu.d)), np.zeros(0), np.zeros(0), mu.s, mu.d,
                           support, support_w)
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])
    keep = []
    for j in range(len(balls)):
        gap = distances(centers, centers[j])
        inside = (gap + radii[j] <= radii) & (np.arange(len(balls)) != j)
        if not np.any(inside):
            keep.append(j)
    keep = np.array(keep, dtype=np.intp)
    mass = np.zeros(keep.size)
    for cell in tree.levels[level]:
        pts = mu.positions[cell.atoms]
        for slot, j in enumerate(keep):
            if np.all(distances(pts, centers[j]) < radii[j]):
                mass[slot] += float(np.sum(w[cell.atoms]))
                break
    return LevelCovers(centers[keep], radii[keep] / 4.0, mass, mu.s, mu.d, support, support_w)


def psi_eval(covers: LevelCovers, x, spec: PsiSpec) -> float:
    """Truncated bump sum at x."""
    if len(covers) == 0:
        return 0.0
    x = np.asarray(x, dtype=float)
    dist = distances(covers.centers, x)
    vol = _unit_ball_volume(covers.d)
    total = 0.0
    for k in range(2, spec.k_max + 1):
        dil = 2.0 ** (k - 1) * 4.0 * covers.scales
        norm = vol * (2.0 * dil) ** covers.d
        total += 2.0 ** (k * (covers.s - covers.d)) * float(
            np.sum(covers.tilde_mass / norm * spec.profile(dist / dil)))
    return total


def psi_integral(spec: PsiSpec, covers: LevelCovers) -> float:
    """Integral of Psi over R^d: every bump integrates to its normaliser."""
    m = float(np.sum(covers.tilde_mass))
    return float(sum(2.0 ** (k * (covers.s - covers.d)) * m for k in range(2, spec.k_max + 1)))


def psi_integral_closed_form(spec: PsiSpec, covers: LevelCovers) -> float:
    q = 2.0 ** (covers.s - covers.d)
    return q * q * (1.0 - q ** (spec.k_max - 1)) / (1.0 - q) * float(np.sum(covers.tilde_mass))


def g_function_eval(covers: LevelCovers, x, A: float) -> float:
    """sum_j m_j / (A r_j)^s over the dilated top balls B(z_j, 4 A r_j) containing x."""
    if A < 2:
        raise InvalidArgumentError("dilation must be at least 2")
    if len(covers) == 0:
        return 0.0
    x = np.asarray(x, dtype=float)
    inside = distances(covers.centers, x) < 4.0 * A * covers.scales
    return float(np.sum(covers.tilde_mass[inside] / (A * covers.scales[inside]) ** covers.s))


def g_norm(covers: LevelCovers, A: float) -> float:
    """Integral of g_A^2 against the rarefied measure."""
    vals = np.array([g_function_eval(covers, p, A) for p in covers.support])
    return float(np.sum(covers.support_weights * vals ** 2))
