"""Shared construction of the lacunary fixture trees (N = 1, 2, 3)."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from rieszwolff.cantor import CantorParams, build_cantor_tree
from rieszwolff.measure import build_lacunary_measure

# generator arguments: d, s, levels, branches, spread, ratio, core_fraction, seed
LACUNARY = {N: (2, 1.5, N + 1, 5, 0.9, 1e-3, 0.9997, 1) for N in (1, 2, 3)}
PARAMS = dict(eps=0.1, M=4.5, delta=0.15, Delta=1.0, q=12)


@lru_cache(maxsize=None)
def lacunary_measure(N: int):
    return build_lacunary_measure(*LACUNARY[N][:7], seed=LACUNARY[N][7])


def lacunary_params(N: int) -> CantorParams:
    mu, leaf = lacunary_measure(N)
    gamma = float(mu.weights[leaf].sum() / mu.total_mass)
    return CantorParams(N=N, gamma=gamma, **PARAMS)


@lru_cache(maxsize=None)
def lacunary_tree(N: int):
    mu, leaf = lacunary_measure(N)
    return build_cantor_tree(mu, np.flatnonzero(leaf), lacunary_params(N))
