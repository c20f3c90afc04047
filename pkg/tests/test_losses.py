import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cookir.errors import EmptyCandidateSet, InvalidDistribution, LengthMismatch, ZeroVector
from cookir.losses import (LossWeights, batch_min_ce, check_distribution, cosine_matrix, cross_entropy,
                           min_ce_over_candidates, softmax, total_loss, triplet_bidirectional_loss)

IMAGE = np.array([[1.0, 0.0], [0.0, 1.0]])
TEXT = np.array([[1.0, 0.0], [1.0, 0.0]])


def _hinges(s, m, variant):
    """Loop form of the bidirectional hinge sum, for cross-checking."""
    n = len(s)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            total += max(0.0, s[i, j] - s[i, i] + m)
            pos = s[i, i] if variant == "verbatim" else s[j, j]
            total += max(0.0, s[j, i] - pos + m)
    return total / n


def test_triplet_hand_cases():
    assert triplet_bidirectional_loss(np.eye(4), np.eye(4)) == 0.0
    # s = [[1, 1], [0, 0]]
    assert triplet_bidirectional_loss(IMAGE, TEXT, margin=0.3) == pytest.approx(0.95, abs=1e-9)
    assert triplet_bidirectional_loss(IMAGE, TEXT, margin=0.3, variant="own-anchor") == pytest.approx(0.6, abs=1e-9)
    assert triplet_bidirectional_loss(IMAGE, TEXT, margin=0.0) == pytest.approx(0.5, abs=1e-9)


def test_triplet_errors():
    with pytest.raises(ZeroVector):
        triplet_bidirectional_loss(np.zeros((2, 2)), np.eye(2))
    with pytest.raises(LengthMismatch):
        triplet_bidirectional_loss(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        triplet_bidirectional_loss(np.ones((1, 2)), np.ones((1, 2)))
    with pytest.raises(ValueError):
        triplet_bidirectional_loss(np.eye(2), np.eye(2), variant="both")


emb = hnp.arrays(np.float64, st.tuples(st.integers(2, 6), st.just(4)),
                 elements=st.floats(-3, 3, allow_nan=False).filter(lambda v: abs(v) > 1e-3))


@settings(max_examples=100, deadline=None)
@given(emb, emb, st.floats(0, 1), st.sampled_from(["verbatim", "own-anchor"]))
def test_triplet_matches_loop_form_and_is_nonnegative(a, b, m, variant):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    got = triplet_bidirectional_loss(a, b, margin=m, variant=variant)
    assert got >= 0
    assert got == pytest.approx(_hinges(cosine_matrix(a, b), m, variant), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(emb, st.integers(0, 1000))
def test_triplet_scale_invariance(a, seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=a.shape)
    scale_a = rng.uniform(0.1, 10, size=(len(a), 1))
    scale_b = rng.uniform(0.1, 10, size=(len(b), 1))
    assert triplet_bidirectional_loss(a * scale_a, b * scale_b) == pytest.approx(
        triplet_bidirectional_loss(a, b), abs=1e-9)


def test_softmax_and_distribution_checks():
    p = softmax(np.array([[1000.0, 1000.0], [0.0, math.log(3.0)]]))
    assert np.allclose(p, [[0.5, 0.5], [0.25, 0.75]])
    check_distribution(p)
    for bad in ([[0.5, 0.6]], [[1.2, -0.2]], [0.5, 0.5]):
        with pytest.raises(InvalidDistribution):
            check_distribution(bad)
    check_distribution([[0.5, 0.5 + 5e-7]])


def test_cross_entropy_values():
    pred = np.array([[0.5, 0.5], [0.1, 0.9]])
    assert cross_entropy(pred, [0, 1]) == pytest.approx((math.log(2) - math.log(0.9)) / 2, abs=1e-12)
    one_hot = np.eye(3)
    assert cross_entropy(one_hot, [0, 1, 2]) == 0.0
    assert cross_entropy(one_hot, [1, 1, 2]) == pytest.approx(-math.log(1e-12) / 3)
    with pytest.raises(LengthMismatch):
        cross_entropy(pred, [0])
    with pytest.raises(IndexError):
        cross_entropy(pred, [0, 2])


def _random_case(rng):
    t, v = int(rng.integers(1, 8)), int(rng.integers(2, 10))
    pred = softmax(rng.normal(size=(t, v)) * 3)
    cands = [rng.integers(0, v, size=t).tolist() for _ in range(int(rng.integers(1, 6)))]
    return pred, cands


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_min_ce_properties(seed):
    rng = np.random.default_rng(seed)
    pred, cands = _random_case(rng)
    per = [cross_entropy(pred, c) for c in cands]
    best, idx = min_ce_over_candidates(pred, cands)
    assert best == min(per) and idx == per.index(min(per))
    assert all(x >= 0 for x in per)
    assert min_ce_over_candidates(pred, cands[:1])[0] == pytest.approx(per[0], abs=1e-12)
    k = int(rng.integers(0, len(cands) + 1))
    left, right = cands[:k], cands[k:]
    if left and right:
        assert best == min(min_ce_over_candidates(pred, left)[0], min_ce_over_candidates(pred, right)[0])


def test_min_ce_ties_return_first_index():
    pred = np.full((2, 2), 0.5)
    assert min_ce_over_candidates(pred, [[0, 1], [1, 0], [0, 0]]) == (math.log(2), 0)
    with pytest.raises(EmptyCandidateSet):
        min_ce_over_candidates(pred, [])


def test_batch_min_ce_is_mean_of_minima():
    rng = np.random.default_rng(7)
    cases = [_random_case(rng) for _ in range(12)]
    preds, sets = zip(*cases)
    expect = np.mean([min_ce_over_candidates(p, c)[0] for p, c in cases])
    assert batch_min_ce(list(preds), list(sets)) == pytest.approx(expect, abs=1e-12)
    with pytest.raises(LengthMismatch):
        batch_min_ce(list(preds), list(sets)[:-1])
    with pytest.raises(ValueError):
        batch_min_ce([], [])


def test_total_loss():
    assert LossWeights() == LossWeights(1.0, 0.1, 0.1, 0.3)
    assert total_loss(1.0, 2.0, 3.0) == pytest.approx(1.5, abs=1e-12)
    assert total_loss(1.0, 2.0, 3.0, LossWeights(2.0, 1.0, 0.0)) == 4.0
    with pytest.raises(ValueError):
        total_loss(float("nan"), 0.0, 0.0)
    with pytest.raises(ValueError):
        LossWeights(ss=-1.0)
