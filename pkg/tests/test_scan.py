"""Affine-pair monoid and the block-parallel prefix scan."""

import numpy as np
import pytest

from gqfwp.scan import (
    AffinePair,
    compose,
    identity_pair,
    pairs_from_gates,
    parallel_scan,
    scan_bench,
    sequential_scan,
)


def rand_pair(rng, f=3):
    return AffinePair(float(rng.uniform(0.1, 1.5)), rng.normal(size=f))


def test_compose_associative():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p1, p2, p3 = (rand_pair(rng) for _ in range(3))
        left = compose(compose(p3, p2), p1)
        right = compose(p3, compose(p2, p1))
        assert abs(left.a - right.a) < 1e-14
        assert np.abs(left.b - right.b).max() < 1e-13


def test_compose_matches_function_composition():
    rng = np.random.default_rng(1)
    p1, p2 = rand_pair(rng), rand_pair(rng)
    w = rng.normal(size=3)
    assert np.abs(compose(p2, p1).apply(w) - p2.apply(p1.apply(w))).max() < 1e-14


def test_identity_and_noncommutativity():
    rng = np.random.default_rng(2)
    p = rand_pair(rng)
    e = identity_pair(p.b.shape)
    for q in (compose(p, e), compose(e, p)):
        assert q.a == p.a and np.array_equal(q.b, p.b)
    q = rand_pair(rng)
    assert np.abs(compose(p, q).b - compose(q, p).b).max() > 1e-8


def test_three_step_worked_example():
    # g = (0.5, 0.25), deltas rows of ones/twos, w1 = (4, 8)
    g = np.array([0.5, 0.25])
    d = np.array([[1.0, 1.0], [2.0, 2.0]])
    a, b = pairs_from_gates(g, d)
    res = sequential_scan(a, b, np.array([4.0, 8.0]))
    # W2 = 0.5*W1 + 0.5*d1 = (2.5, 4.5); W3 = 0.25*W2 + 0.75*d2
    assert np.abs(res.trajectory[0] - [2.5, 4.5]).max() < 1e-15
    assert np.abs(res.trajectory[1] - [2.125, 2.625]).max() < 1e-15
    assert np.abs(res.alpha - [0.5, 0.125]).max() < 1e-15


def test_parallel_matches_sequential():
    rng = np.random.default_rng(3)
    for T in (64, 257, 1024):
        g = rng.uniform(0.0, 1.0, T)
        d = rng.normal(size=(T, 5))
        a, b = pairs_from_gates(g, d)
        w1 = rng.normal(size=5)
        ref = sequential_scan(a, b, w1)
        for p in (2, 3, 4, 7):
            res = parallel_scan(a, b, w1, workers=p)
            assert np.abs(res.trajectory - ref.trajectory).max() < 1e-10
            assert np.abs(res.alpha - ref.alpha).max() < 1e-12


def test_work_bound_two_t():
    rng = np.random.default_rng(4)
    T = 4096
    g = rng.uniform(0.0, 1.0, T)
    d = rng.normal(size=(T, 2))
    a, b = pairs_from_gates(g, d)
    w1 = np.zeros(2)
    assert sequential_scan(a, b, w1).compositions == T
    for p in (2, 4, 8):
        res = parallel_scan(a, b, w1, workers=p)
        assert res.compositions <= 2 * T


def test_short_sequences_fall_back_to_sequential():
    rng = np.random.default_rng(5)
    g = rng.uniform(0.0, 1.0, 10)
    d = rng.normal(size=(10, 2))
    a, b = pairs_from_gates(g, d)
    res = parallel_scan(a, b, np.zeros(2), workers=4)
    assert res.compositions == 10  # 10 < 4*p^2, work-minimal path


def test_input_validation():
    with pytest.raises(ValueError):
        compose(AffinePair(1.0, np.zeros(2)), AffinePair(1.0, np.zeros(3)))
    with pytest.raises(ValueError):
        sequential_scan(np.empty(0), np.empty((0, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        parallel_scan(np.ones(4), np.ones((4, 1)), np.zeros(1), workers=0)


def test_bench_rows_shape():
    rows = scan_bench([256], [2, 4], payload_dim=4, seed=0)
    assert len(rows) == 3
    assert {r["mode"] for r in rows} == {"sequential", "parallel"}
    assert all(r["wall_ns"] > 0 and r["compose_count"] > 0 for r in rows)
