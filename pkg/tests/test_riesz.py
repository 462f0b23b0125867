from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rieszwolff.errors import InvalidArgumentError, SingularityError
from rieszwolff.measure import AtomicMeasure, build_cantor_measure, rescale_measure
from rieszwolff.riesz import (TruncationSpec, riesz_adjoint_at, riesz_at, riesz_field_direct,
                              riesz_field_fast, riesz_maximal)


def kernel_oracle(pos, w, x, s):
    """Term-by-term sum in extended precision."""
    pos = np.asarray(pos, dtype=np.longdouble)
    x = np.asarray(x, dtype=np.longdouble)
    out = np.zeros(pos.shape[1], dtype=np.longdouble)
    for a, m in zip(pos, w):
        diff = a - x
        out += np.longdouble(m) * diff / np.sqrt(np.sum(diff * diff)) ** (1 + np.longdouble(s))
    return out.astype(float)


def test_single_atom_value():
    mu = AtomicMeasure([[0.0, 0.0]], [1.0], 1.5)
    assert np.allclose(riesz_at(mu, [1.0, 0.0]).value, [-1.0, 0.0], atol=1e-15)
    assert riesz_at(mu, [2.0, 0.0]).value[0] == pytest.approx(-2.0 * 2.0 ** -2.5, rel=1e-15)


def test_singularity_and_truncation():
    mu = AtomicMeasure([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0], 1.5)
    with pytest.raises(SingularityError):
        riesz_at(mu, [0.0, 0.0])
    # excluding a small ball around the atom removes the singularity
    val = riesz_at(mu, [0.0, 0.0], TruncationSpec(inner=0.5)).value
    assert np.allclose(val, [1.0, 0.0])
    assert riesz_at(mu, [0.0, 0.0], TruncationSpec(inner=0.5, outer=0.9)).terms_used == 0
    with pytest.raises(InvalidArgumentError):
        TruncationSpec(inner=1.0, outer=0.5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60), d=st.sampled_from([2, 3]))
def test_direct_matches_extended_precision(seed, n, d):
    rng = np.random.default_rng(seed)
    s = d - 1 + rng.uniform(0.05, 0.95)
    pos, w = rng.normal(size=(n, d)), rng.exponential(size=n)
    mu = AtomicMeasure(pos, w, s)
    x = rng.normal(size=d) * 3
    ref = kernel_oracle(pos, w, x, s)
    scale = np.sum(w / np.linalg.norm(pos - x, axis=1) ** s)
    assert np.allclose(riesz_at(mu, x).value, ref, rtol=0, atol=1e-13 * scale)
    assert np.allclose(riesz_field_direct(mu, [x])[0].value, riesz_at(mu, x).value, rtol=1e-13, atol=0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_translation_and_scaling(seed):
    rng = np.random.default_rng(seed)
    mu = AtomicMeasure(rng.normal(size=(30, 2)), rng.exponential(size=30), 1.5)
    x = rng.normal(size=2) * 2
    base = riesz_at(mu, x).value
    z = rng.normal(size=2)
    moved = riesz_at(mu.translate(z), x + z).value
    norm = np.max(np.abs(base)) + 1e-300
    assert np.max(np.abs(moved - base)) <= 1e-12 * max(1.0, norm)
    for lam in (0.5, 2.0, 10.0):
        scaled = riesz_at(rescale_measure(mu, lam), lam * x).value
        assert np.max(np.abs(scaled - base)) <= 1e-10 * max(1.0, norm)


def test_antisymmetry():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p, q = rng.normal(size=(2, 3))
        mu = AtomicMeasure([p, q], [1.3, 1.3], 2.4)
        assert np.max(np.abs(riesz_at(mu, (p + q) / 2).value)) <= 1e-14 * 1.3 / np.linalg.norm(p - q) ** 2.4 * 10


def test_maximal_examples():
    mu = AtomicMeasure([[0.0, 0.0]], [1.0], 1.5)
    x = [1.0, 0.0]
    assert riesz_maximal(mu, x, [((1.0, 0.0), 0.1)]) == pytest.approx(1.0, rel=1e-15)
    assert riesz_maximal(mu, x, [((1.0, 0.0), 10.0)]) == 0.0
    small = [((1.0, 0.0), 10.0)]
    assert riesz_maximal(mu, x, small + [((1.0, 0.0), 0.1)]) >= riesz_maximal(mu, x, small)
    with pytest.raises(InvalidArgumentError):
        riesz_maximal(mu, x, [])


def test_adjoint_examples():
    assert riesz_adjoint_at([[0.0, 0.0]], [[1.0, 0.0]], [1.0, 0.0], 1.5) == 1.0
    assert riesz_adjoint_at([[0.0, 0.0]], [[0.0, 1.0]], [1.0, 0.0], 1.5) == 0.0
    rng = np.random.default_rng(3)
    pos, w = rng.normal(size=(20, 2)), rng.exponential(size=20)
    mu = AtomicMeasure(pos, w, 1.5)
    x = np.array([3.0, 1.0])
    r = riesz_at(mu, x).value
    for j in range(2):
        vec = np.zeros((20, 2))
        vec[:, j] = w
        assert riesz_adjoint_at(pos, vec, x, 1.5) == pytest.approx(-r[j], rel=1e-13)


def test_fast_single_atom_is_exact():
    mu = AtomicMeasure([[0.2, 0.3]], [2.0], 1.5)
    tg = np.array([[1.0, 1.0], [-2.0, 0.5]])
    fast = riesz_field_fast(mu, tg, 1e-3)
    for f, x in zip(fast, tg):
        assert f.terms_used == 1
        assert np.array_equal(f.value, riesz_at(mu, x).value)


def test_fast_validation():
    mu = AtomicMeasure([[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0], 1.5)
    with pytest.raises(InvalidArgumentError):
        riesz_field_fast(mu, [[3.0, 3.0]], 0.0)
    with pytest.raises(SingularityError):
        riesz_field_fast(mu, [[1.0, 1.0]], 1e-6)


@pytest.mark.parametrize("tol", [1.0, 1e-4, 1e-9])
def test_fast_within_certified_bound(tol):
    mu = build_cantor_measure(2, 1.5, 6, jitter_seed=2)
    rng = np.random.default_rng(11)
    tg = rng.uniform(-0.2, 1.2, size=(100, 2))
    fast = riesz_field_fast(mu, tg, tol)
    direct = riesz_field_direct(mu, tg)
    for f, dd, x in zip(fast, direct, tg):
        err = np.max(np.abs(f.value - dd.value))
        assert err <= f.error_bound
        dmin = np.min(np.linalg.norm(mu.positions - x, axis=1))
        # the truncation budget plus a rounding allowance
        assert f.error_bound <= tol * mu.total_mass / dmin ** 1.5 * (1 + 1e-6) + 1e-9 * np.max(np.abs(dd.value))


def test_fast_with_inner_radius_matches_direct():
    mu = build_cantor_measure(3, 2.5, 3)
    tg = mu.positions[:40]
    fast = riesz_field_fast(mu, tg, 1e-10, inner=0.05)
    direct = riesz_field_direct(mu, tg, inner=0.05)
    for f, dd in zip(fast, direct):
        assert np.max(np.abs(f.value - dd.value)) <= f.error_bound
