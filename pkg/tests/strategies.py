"""Hypothesis strategies for random quantum objects (seeded numpy draws)."""

import numpy as np
from hypothesis import strategies as st

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
small_dims = st.integers(min_value=1, max_value=4)


def rng_from(seed):
    return np.random.default_rng(seed)


def cmat(rng, r, c, scale=1.0):
    return scale * (rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c)))


def contraction(rng, r, c):
    M = cmat(rng, r, c)
    return M / (np.linalg.norm(M, 2) * (1 + rng.random()))
