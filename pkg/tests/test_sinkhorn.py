import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catdisc.losses import SinkhornSpec, sinkhorn_codes


def sinkhorn_oracle(scores, epsilon, n_iters):
    """Straight-line reimplementation of the alternating scaling updates."""
    s = np.asarray(scores, dtype=np.float64)
    k, b = s.shape
    mat = np.exp((s - s.max()) / epsilon)
    mat = mat / mat.sum()
    for _ in range(n_iters):
        for row in range(k):
            mat[row, :] = mat[row, :] / mat[row, :].sum() / k
        for col in range(b):
            mat[:, col] = mat[:, col] / mat[:, col].sum() / b
    return mat / mat.sum()


def unit_scores(rng, k, b):
    z = rng.normal(size=(b, 4))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    c = rng.normal(size=(k, 4))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    return c @ z.T  # cosine scores in [-1, 1]


def test_uniform_scores_fixed_point():
    q = sinkhorn_codes(np.zeros((2, 2)), SinkhornSpec())
    assert np.allclose(q, 0.25, atol=1e-15)


def test_matches_oracle_on_spec_example():
    scores = np.array([[1.0, 0.0], [0.0, 1.0]])
    spec = SinkhornSpec(epsilon=0.05, n_iters=3)
    q = sinkhorn_codes(scores, spec)
    expected = sinkhorn_oracle(scores, 0.05, 3)
    assert np.max(np.abs(q - expected)) <= 1e-6


def test_matches_oracle_on_random_instances(rng):
    for _ in range(25):
        k, b = rng.integers(2, 6), rng.integers(2, 9)
        scores = unit_scores(rng, k, b)
        spec = SinkhornSpec(epsilon=0.05, n_iters=3)
        q = sinkhorn_codes(scores, spec)
        assert np.max(np.abs(q - sinkhorn_oracle(scores, 0.05, 3))) <= 1e-6


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**31 - 1),
    shift=st.floats(min_value=-100, max_value=100, allow_nan=False),
)
def test_shift_invariance(seed, shift):
    g = np.random.default_rng(seed)
    scores = g.normal(size=(3, 5))
    spec = SinkhornSpec()
    assert np.max(
        np.abs(sinkhorn_codes(scores + shift, spec) - sinkhorn_codes(scores, spec))
    ) <= 1e-12


def test_marginals_at_defaults(rng):
    # Uniform-magnitude scores (one shared magnitude, spread below epsilon):
    # 3 iterations land both marginals within 1e-3 of their targets.
    for _ in range(20):
        k, b = int(rng.integers(2, 6)), int(rng.integers(2, 9))
        scores = 1.0 + rng.uniform(0.0, 0.05, size=(k, b))
        q = sinkhorn_codes(scores, SinkhornSpec(epsilon=0.05, n_iters=3))
        assert np.max(np.abs(q.sum(axis=1) - 1.0 / k)) <= 1e-3
        assert np.max(np.abs(q.sum(axis=0) - 1.0 / b)) <= 1e-3


def test_marginals_tighten_with_more_iterations(rng):
    q = sinkhorn_codes(unit_scores(rng, 5, 7), SinkhornSpec(epsilon=0.05, n_iters=100))
    # columns are the last-normalized axis
    assert np.max(np.abs(q.sum(axis=0) - 1.0 / 7)) <= 1e-9


def test_total_mass_is_one(rng):
    q = sinkhorn_codes(rng.normal(size=(6, 11)), SinkhornSpec())
    assert q.sum() == pytest.approx(1.0, abs=1e-12)
    assert q.min() >= 0.0


def test_extreme_scores_do_not_overflow():
    scores = np.array([[1e4, -1e4], [-1e4, 1e4]])
    q = sinkhorn_codes(scores, SinkhornSpec())
    assert np.all(np.isfinite(q))
    assert q.sum() == pytest.approx(1.0, abs=1e-9)


def test_rejects_non_finite_scores():
    with pytest.raises(ValueError, match="finite"):
        sinkhorn_codes(np.array([[np.nan, 1.0], [0.0, 1.0]]), SinkhornSpec())


def test_spec_validation():
    with pytest.raises(ValueError):
        SinkhornSpec(epsilon=0.0)
    with pytest.raises(ValueError):
        SinkhornSpec(n_iters=0)
