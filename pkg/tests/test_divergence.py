"""Bounded divergence and the restriction parameters derived from it."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codedec.divergence import bounded_divergence, restriction_params
from oracles import oracle_bounded_divergence, oracle_restriction_params
from tutil import random_probs

K_VALUES = (0.1, 0.3, 1.0, 2.0)

dist_pair = st.tuples(
    st.integers(min_value=2, max_value=30),
    st.integers(min_value=0, max_value=2**32 - 1),
    st.floats(min_value=0.05, max_value=5.0),
    st.sampled_from(K_VALUES),
)


@given(dist_pair)
@settings(max_examples=300, deadline=None)
def test_matches_oracle(params):
    n, seed, sharpness, k = params
    rng = np.random.default_rng(seed)
    p = random_probs(rng, n, sharpness)
    q = random_probs(rng, n, sharpness)
    ours = bounded_divergence(p, q, k)
    ref = oracle_bounded_divergence(list(p), list(q), k)
    assert abs(ours - ref) <= 1e-12


@given(dist_pair)
@settings(max_examples=300, deadline=None)
def test_symmetry_is_exact(params):
    n, seed, sharpness, k = params
    rng = np.random.default_rng(seed)
    p = random_probs(rng, n, sharpness)
    q = random_probs(rng, n, sharpness)
    assert bounded_divergence(p, q, k) == bounded_divergence(q, p, k)


@given(dist_pair)
@settings(max_examples=300, deadline=None)
def test_range_and_zero_cases(params):
    n, seed, sharpness, k = params
    rng = np.random.default_rng(seed)
    p = random_probs(rng, n, sharpness)
    q = random_probs(rng, n, sharpness)
    d = bounded_divergence(p, q, k)
    assert 0.0 <= d <= 1.0
    assert bounded_divergence(p, p, k) == 0.0
    if np.max(np.abs(p - q)) > 1e-9:
        assert d > 0.0


@pytest.mark.parametrize("k", K_VALUES)
@pytest.mark.parametrize("n", (2, 10, 1000))
def test_disjoint_one_hots_hit_the_upper_bound(n, k):
    p = np.zeros(n)
    q = np.zeros(n)
    p[0] = 1.0
    q[-1] = 1.0
    assert abs(bounded_divergence(p, q, k) - 1.0) <= 1e-12


def test_hand_derived_values():
    p = np.array([0.5, 0.5])
    q = np.array([1.0, 0.0])
    # only index 0 and 1 contribute, both with gap 1/2:
    # D = 1/2 * [1.5 * log2(0.5^k + 1) + 0.5 * log2(0.5^k + 1)] = log2(0.5^k + 1)
    assert abs(bounded_divergence(p, q, 1.0) - math.log2(1.5)) <= 1e-15
    assert abs(bounded_divergence(p, q, 1.0) - 0.584963) <= 1e-6
    assert abs(bounded_divergence(p, q, 0.3) - math.log2(0.5**0.3 + 1.0)) <= 1e-15
    assert abs(bounded_divergence(p, q, 0.3) - 0.857785) <= 1e-5


def test_small_k_amplifies_small_gaps():
    p = np.array([0.6, 0.4])
    q = np.array([0.55, 0.45])
    assert bounded_divergence(p, q, 0.1) > bounded_divergence(p, q, 2.0)


def test_compensated_summation_path_matches_oracle():
    # n >= 10^4 switches to compensated summation; same answer either way
    rng = np.random.default_rng(7)
    n = 10_000
    p = random_probs(rng, n)
    q = random_probs(rng, n)
    ours = bounded_divergence(p, q, 0.3)
    ref = oracle_bounded_divergence(list(p), list(q), 0.3)
    assert abs(ours - ref) <= 1e-12


def test_validation_errors():
    p = np.array([0.5, 0.5])
    with pytest.raises(ValueError):
        bounded_divergence(p, np.array([1.0, 0.0, 0.0]), 0.3)
    for bad_k in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            bounded_divergence(p, p, bad_k)


# --- restriction parameters --------------------------------------------

@given(dist_pair)
@settings(max_examples=300, deadline=None)
def test_restriction_params_complement_exactly(params):
    n, seed, sharpness, k = params
    rng = np.random.default_rng(seed)
    p = random_probs(rng, n, sharpness)
    q = random_probs(rng, n, sharpness)
    alpha, beta = restriction_params(p, q, k)
    assert 0.0 <= alpha <= 1.0
    assert 0.0 <= beta <= 1.0
    assert alpha + beta == 1.0  # exact in binary64: alpha is computed as 1 - beta
    assert beta == bounded_divergence(p, q, k)


def test_restriction_params_hand_case():
    p = np.array([0.5, 0.5])
    q = np.array([1.0, 0.0])
    alpha, beta = restriction_params(p, q, 0.3)
    ref_alpha, ref_beta = oracle_restriction_params(list(p), list(q), 0.3)
    assert abs(alpha - ref_alpha) <= 1e-15
    assert abs(beta - ref_beta) <= 1e-15
    assert abs(alpha - 0.142215) <= 1e-5
    assert abs(beta - 0.857785) <= 1e-5


def test_restriction_params_extremes():
    p = np.array([1.0, 0.0])
    assert restriction_params(p, p, 0.3) == (1.0, 0.0)
    q = np.array([0.0, 1.0])
    assert restriction_params(p, q, 0.3) == (0.0, 1.0)
