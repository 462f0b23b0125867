from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from rieszwolff.errors import InvalidArgumentError
from rieszwolff.measure import (AmbientParams, AtomicMeasure, MassTree, build_cantor_measure,
                                build_lacunary_measure, growth_probe, point_set_diameter,
                                rescale_measure)


def random_measure(seed: int, n: int, d: int = 2, s: float = 1.5, rounded: bool = False):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1, 1, size=(n, d))
    if rounded:
        pos = np.round(pos, 1)  # many ties and exact boundary hits
    return AtomicMeasure(pos, rng.exponential(size=n), s)


@pytest.mark.parametrize("d,s", [(1, 0.5), (2, 1.0), (2, 2.0), (3, 1.9), (4, 3.5)])
def test_ambient_rejects_bad_dimensions(d, s):
    with pytest.raises(InvalidArgumentError):
        AmbientParams(d, s)


def test_measure_validation():
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure([[0.0, 0.0]], [0.0], 1.5)
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure([[0.0, 0.0]], [1.0, 2.0], 1.5)
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure([[np.nan, 0.0]], [1.0], 1.5)
    mu = AtomicMeasure([[0.0, 0.0]], [1.0], 1.5)
    with pytest.raises(InvalidArgumentError):
        mu.ball_mass([0.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        mu.positions[0, 0] = 3.0  # frozen


def test_balls_are_open():
    mu = AtomicMeasure([[1.0, 0.0], [0.0, 0.0]], [2.0, 3.0], 1.5)
    assert mu.ball_mass([0.0, 0.0], 1.0) == 3.0
    assert mu.ball_mass([0.0, 0.0], np.nextafter(1.0, 2.0)) == 5.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 300), rounded=st.booleans(),
       r=st.floats(1e-3, 3.0))
def test_ball_mass_matches_linear_scan(seed, n, rounded, r):
    mu = random_measure(seed, n, rounded=rounded)
    x = mu.positions[seed % n] if seed % 2 else np.round(np.random.default_rng(seed).uniform(-1, 1, 2), 1)
    assert mu.ball_mass(x, r) == mu.ball_mass_scan(x, r)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 400), rounded=st.booleans())
def test_mass_tree_decisions_are_exact(seed, n, rounded):
    mu = random_measure(seed, n, rounded=rounded)
    tree = MassTree(mu, leaf_size=4)
    rng = np.random.default_rng(seed + 1)
    xs = mu.positions[rng.integers(0, n, 20)]
    rs = rng.uniform(0.01, 2.0, 20)
    exact = np.array([mu.ball_mass(x, r) for x, r in zip(xs, rs)])
    # thresholds exactly at the true mass are the hardest case
    thr = np.where(rng.random(20) < 0.5, exact, exact * rng.uniform(0.9, 1.1, 20))
    got = tree.balls_at_most(xs, rs, thr)
    assert np.array_equal(got, exact <= thr)
    for x, r in zip(xs[:5], rs[:5]):
        assert tree.exact_shell(x, 0.0, r) == pytest.approx(mu.ball_mass(x, r), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 200), d=st.sampled_from([2, 3]))
def test_diameter_matches_pairwise(seed, n, d):
    pts = np.random.default_rng(seed).normal(size=(n, d))
    assert point_set_diameter(pts) == pytest.approx(pdist(pts).max(), rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), lam=st.sampled_from([0.5, 2.0, 10.0]), r=st.floats(0.01, 2.0))
def test_rescaled_ball_mass(seed, lam, r):
    mu = random_measure(seed, 50)
    nu = rescale_measure(mu, lam, [0.25, -3.0])
    x = mu.positions[0] + 0.01
    # density mu(B(x,r))/r^s is invariant under the rescaling
    a = mu.ball_mass(x, r) / r ** 1.5
    b = nu.ball_mass(lam * x + np.array([0.25, -3.0]), lam * r) / (lam * r) ** 1.5
    assert b == pytest.approx(a, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("d,s,depth", [(2, 1.5, 3), (3, 2.5, 2), (2, 1.2, 0)])
def test_cantor_measure_shape(d, s, depth):
    mu = build_cantor_measure(d, s, depth)
    assert len(mu) == 2 ** (d * depth)
    assert mu.total_mass == pytest.approx(1.0, rel=1e-14)
    assert np.all((mu.positions > 0) & (mu.positions < 1))


def test_cantor_measure_equal_weights_inside_unit_cube():
    mu = build_cantor_measure(2, 1.5, 5)
    assert np.all(mu.weights == 2.0 ** -10)
    # siblings at the finest level sit one cell step apart
    ratio = 2.0 ** (-2 / 1.5)
    step = ratio ** 4 * (1 - ratio)
    assert np.linalg.norm(mu.positions[1] - mu.positions[0]) == pytest.approx(step, rel=1e-12)


def test_cantor_jitter_is_deterministic():
    a = build_cantor_measure(2, 1.5, 3, jitter_seed=4)
    b = build_cantor_measure(2, 1.5, 3, jitter_seed=4)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, build_cantor_measure(2, 1.5, 3).positions)


def test_lacunary_generator():
    mu, leaf = build_lacunary_measure(2, 1.5, 3, 5, 0.9, 1e-3, 0.9997, seed=1)
    assert len(mu) == 1 + 5 + 25 + 125
    assert np.count_nonzero(leaf) == 125
    assert mu.total_mass == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        build_lacunary_measure(2, 1.5, 3, 5, 0.1, 0.2)


def test_growth_probe_single_atom():
    mu = AtomicMeasure([[0.0, 0.0]], [1.0], 1.5)
    rep = growth_probe(mu, 10, 0, r_min=1e-3)
    # best ratio sits at the smallest radius around the atom itself
    assert rep.c1_empirical == pytest.approx(1e-3 ** -1.5, rel=1e-12)
    assert rep.argmax_center == (0.0, 0.0)
