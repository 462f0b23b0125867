"""Potential gauges, their admissibility, Wolff potentials and the quadratic energy.

A Wolff potential integrates ``Phi(mu(B(x, r)) / r^s) dr / r``.  For an
atomic measure the ball mass is a step function of r, so the integral is
a finite sum of pieces with constant mass m.  Substituting the density
``tau = m / r^s`` turns each piece into ``(1/s) * int Phi(tau) dtau / tau``,
which has a closed form for every built-in gauge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, InvalidArgumentError
from .measure import AtomicMeasure
from .scales import ScaleWindow, mass_profile


def default_beta(d: int, s: float) -> float:
    return max(3.0, 1.0 + (s - d + 2.0) / (s - d + 1.0))


class Gauge:
    """Increasing gauge with Phi(0) = 0.

    Concrete gauges carry ``sigma`` and ``kappa``, witnesses that
    Phi(t) / t^sigma is non-decreasing on (0, kappa].
    """

    sigma: float
    kappa: float
    kind = "abstract"

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        raise NotImplementedError

    def log_eval(self, t):
        """log Phi(t) for t > 0, computed without underflow where possible."""
        with np.errstate(divide="ignore"):
            return np.log(self.eval(t))

    def unbounded_at_infinity(self) -> bool:
        """Whether Phi(t) stays away from 0 as t grows (true for all built-ins)."""
        return True

    def primitive(self, tau):
        """An antiderivative of Phi(tau) / tau, if one is available."""
        raise NotImplementedError

    def piece_integral(self, m: float, a: float, b: float, s: float) -> float:
        """int_a^b Phi(m / r^s) dr / r for 0 < a < b <= inf."""
        if m <= 0.0 or not (b > a):
            return 0.0
        tau_a = m / a ** s
        tau_b = m / b ** s if np.isfinite(b) else 0.0
        return self._density_integral(tau_b, tau_a) / s

    def _density_integral(self, lo: float, hi: float) -> float:
        """int_lo^hi Phi(tau) dtau / tau."""
        return float(self.primitive(hi) - self.primitive(lo))

    def describe(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "kappa": self.kappa}


@dataclass(frozen=True)
class PowerGauge(Gauge):
    p: float = 2.0
    sigma: float = 1.0
    kappa: float = 1.0
    kind = "power"

    def __post_init__(self):
        if not (self.p > 0):
            raise InvalidArgumentError("power gauge exponent must be positive")

    def eval(self, t):
        return np.asarray(t, dtype=float) ** self.p

    def log_eval(self, t):
        with np.errstate(divide="ignore"):
            return self.p * np.log(np.asarray(t, dtype=float))

    def piece_integral(self, m, a, b, s):
        if m <= 0.0 or not (b > a):
            return 0.0
        ps = self.p * s
        tau_a = m / a ** s
        if not np.isfinite(b):
            return tau_a ** self.p / ps
        return tau_a ** self.p * -math.expm1(ps * math.log(a / b)) / ps

    def describe(self):
        return {**super().describe(), "p": self.p}


@dataclass(frozen=True)
class ExponentialGauge(Gauge):
    """Phi(t) = exp(-t^-beta)."""

    beta: float = 3.0
    sigma: float = 1.0
    kappa: float | None = None
    kind = "exponential"

    def __post_init__(self):
        if not (self.beta > 0):
            raise InvalidArgumentError("beta must be positive")
        if self.kappa is None:
            object.__setattr__(self, "kappa", (self.beta / self.sigma) ** (1.0 / self.beta))

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        with np.errstate(over="ignore"):
            out[pos] = np.exp(-t[pos] ** -self.beta)
        return out

    def log_eval(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return -(t ** -self.beta)

    def _density_integral(self, lo, hi):
        # u = tau^-beta turns the integral into (E1(u_hi) - E1(u_lo)) / beta
        if hi <= 0.0:
            return 0.0
        u_hi = hi ** -self.beta
        u_lo = lo ** -self.beta if lo > 0.0 else np.inf
        return float(special.exp1(u_hi) - special.exp1(u_lo)) / self.beta

    def describe(self):
        return {**super().describe(), "beta": self.beta}


@dataclass(frozen=True)
class SmoothGaugeV(Gauge):
    """Convex gauge v with v'' = 2 on [0, 1], 2(2 - t) on [1, 2], 0 beyond."""

    sigma: float = 2.0
    kappa: float = 1.0
    kind = "V"

    @staticmethod
    def v(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 1.0, t * t,
                        np.where(t <= 2.0, 2.0 * t * t - t ** 3 / 3.0 - t + 1.0 / 3.0,
                                 11.0 / 3.0 + 3.0 * (t - 2.0)))

    @staticmethod
    def dv(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 1.0, 2.0 * t, np.where(t <= 2.0, 4.0 * t - t * t - 1.0, 3.0))

    @staticmethod
    def d2v(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 1.0, 2.0, np.where(t <= 2.0, 2.0 * (2.0 - t), 0.0))

    def eval(self, t):
        return self.v(t)

    def field(self, x):
        """V(x) = v(|x|) for points x (last axis is the coordinate)."""
        return self.v(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    @staticmethod
    def _primitive_piece(tau, piece):
        if piece == 0:
            return tau * tau / 2.0
        if piece == 1:
            return tau * tau - tau ** 3 / 9.0 - tau + math.log(tau) / 3.0
        return 3.0 * tau - 7.0 / 3.0 * math.log(tau)

    def _density_integral(self, lo, hi):
        total = 0.0
        for piece, (a, b) in enumerate(((0.0, 1.0), (1.0, 2.0), (2.0, np.inf))):
            x0, x1 = max(lo, a), min(hi, b)
            if x1 > x0:
                total += self._primitive_piece(x1, piece) - self._primitive_piece(x0, piece)
        return total


@dataclass(frozen=True)
class IndicatorGauge(Gauge):
    """Phi(t) = 1 if t > threshold else 0.  Not admissible; used to recover
    the scale-set measure as a potential."""

    threshold: float = 1.0
    sigma: float = 1.0
    kappa: float = 1.0
    kind = "indicator"

    def __post_init__(self):
        if not (self.threshold > 0):
            raise InvalidArgumentError("indicator threshold must be positive")

    def eval(self, t):
        return (np.asarray(t, dtype=float) > self.threshold).astype(float)

    def piece_integral(self, m, a, b, s):
        if m <= 0.0 or not (b > a):
            return 0.0
        hi = min(b, (m / self.threshold) ** (1.0 / s))
        return math.log(hi / a) if hi > a else 0.0

    def describe(self):
        return {**super().describe(), "threshold": self.threshold}


@dataclass(frozen=True)
class CustomGauge(Gauge):
    """User-supplied Phi, integrated numerically in log(tau)."""

    func: Callable = field(default=lambda t: t)
    sigma: float = 1.0
    kappa: float = 1.0
    quad_limit: int = 200
    kind = "custom"

    def eval(self, t):
        return np.vectorize(lambda u: float(self.func(u)) if u > 0 else 0.0)(np.asarray(t, dtype=float))

    def _density_integral(self, lo, hi):
        if hi <= 0.0:
            return 0.0
        lo = max(lo, np.finfo(float).tiny)
        val, _ = integrate.quad(lambda y: float(self.func(math.exp(y))), math.log(lo),
                                math.log(hi), epsabs=0.0, epsrel=1e-11, limit=self.quad_limit)
        return val


def parse_gauge(spec: str, d: int | None = None, s: float | None = None) -> Gauge:
    """Parse ``exp:beta=3``, ``power:p=2``, ``V`` or ``indicator:threshold=0.5``."""
    name, _, rest = spec.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        try:
            opts[key.strip()] = float(val)
        except ValueError as exc:
            raise InvalidArgumentError(f"bad gauge option {item!r}") from exc
    name = name.strip().lower()
    try:
        if name in ("exp", "exponential"):
            if "beta" not in opts:
                if d is None or s is None:
                    raise InvalidArgumentError("exponential gauge needs beta or (d, s)")
                opts["beta"] = default_beta(d, s)
            return ExponentialGauge(**opts)
        if name == "power":
            return PowerGauge(**opts)
        if name == "v":
            return SmoothGaugeV(**opts)
        if name == "indicator":
            return IndicatorGauge(**opts)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad gauge options for {name}: {opts}") from exc
    raise InvalidArgumentError(f"unknown gauge {spec!r}")


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    zero_at_origin: bool
    strictly_increasing: bool
    sigma_condition: bool
    failed_condition: str | None = None
    first_violation: float | None = None


def gauge_admissibility_check(g: Gauge, grid_size: int = 1000, t_min: float = 1e-6,
                              t_max: float = 1e6) -> AdmissibilityReport:
    """Check Phi(0) = 0, strict increase, and Phi / t^sigma non-decreasing
    on (0, kappa], on log-spaced grids.  Comparisons use log Phi so that
    gauges which underflow near 0 are still resolved."""
    if grid_size < 100:
        raise InvalidArgumentError("grid_size must be at least 100")
    zero_ok = float(np.asarray(g.eval(0.0))) == 0.0
    grid = np.geomspace(t_min, t_max, grid_size)
    logphi = np.asarray(g.log_eval(grid), dtype=float)
    # strict increase on the grid, and from 0 to the first grid point
    bad = np.flatnonzero(~(logphi[1:] > logphi[:-1]))
    inc_ok = bool(bad.size == 0 and logphi[0] > -np.inf)
    inc_at = float(grid[bad[0] + 1]) if bad.size else (None if inc_ok else float(grid[0]))
    sgrid = np.geomspace(min(t_min, g.kappa / 10.0), g.kappa, grid_size)
    ratio = np.asarray(g.log_eval(sgrid), dtype=float) - g.sigma * np.log(sgrid)
    slack = 1e-12 * np.maximum(1.0, np.abs(ratio[:-1]))
    sbad = np.flatnonzero(ratio[1:] < ratio[:-1] - slack)
    sigma_ok = bool(sbad.size == 0)
    failed, where = None, None
    if not zero_ok:
        failed, where = "zero_at_origin", 0.0
    elif not inc_ok:
        failed, where = "strictly_increasing", inc_at
    elif not sigma_ok:
        failed, where = "sigma_condition", float(sgrid[sbad[0] + 1])
    return AdmissibilityReport(failed is None, zero_ok, inc_ok, sigma_ok, failed, where)


def wolff_potential(mu: AtomicMeasure, x, g: Gauge, window: ScaleWindow,
                    quad_points: int | None = None) -> float:
    """int over the window of Phi(mu(B(x, r)) / r^s) dr / r, summed piecewise.

    ``quad_points`` caps the subdivisions of numerical quadrature for
    gauges without a closed form.
    """
    if quad_points is not None and isinstance(g, CustomGauge):
        g = CustomGauge(g.func, g.sigma, g.kappa, int(quad_points))
    x = mu.point(x)
    reach = window.r_max * (1.0 + 1e-9) if np.isfinite(window.r_max) else np.inf
    radii, masses = mass_profile(mu, x, reach)
    n = radii.shape[0]
    if n and radii[0] == 0.0 and window.r_min == 0.0 and g.unbounded_at_infinity():
        raise DivergenceError("an atom sits at x and the window reaches r = 0")
    total = 0.0
    for i in range(n):
        lo = max(radii[i], window.r_min)
        hi = min(radii[i + 1] if i + 1 < n else np.inf, window.r_max)
        if hi > lo:
            total += g.piece_integral(float(masses[i]), float(lo), float(hi), mu.s)
    return total


def wolff_potentials(mu: AtomicMeasure, points, g: Gauge, window: ScaleWindow) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, mu.d)
    return np.array([wolff_potential(mu, p, g, window) for p in pts])


def wolff_energy(mu: AtomicMeasure, window: ScaleWindow) -> float:
    """sum_x w_x * W_{t^2}(mu)(x) over the atoms, in index order."""
    if window.r_min <= 0.0:
        raise InvalidArgumentError("the energy needs r_min > 0")
    if len(mu) == 0:
        return 0.0
    pot = wolff_potentials(mu, mu.positions, PowerGauge(2.0), window)
    return float(np.sum(mu.weights * pot))
