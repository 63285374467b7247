import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiberlab.errors import InvalidParameter
from fiberlab.optimizer import DEParams, de_maximize

C = np.array([0.3, -1.2, 2.0, 0.0, -0.7, 1.5, -2.5, 0.9])


def sphere(x):
    return -np.sum((np.atleast_2d(x) - C) ** 2, axis=-1)


def test_sphere_objective_gap_default_params():
    p = DEParams(bounds=((-5, 5),) * 8, generations=300, seed=0)
    assert p.population == 80
    res = de_maximize(sphere, p, vectorized=True)
    assert -res.value < 1e-3


def test_sphere_position_with_smaller_weight():
    p = DEParams(bounds=((-5, 5),) * 8, generations=300, differential_weight=0.5, seed=0)
    res = de_maximize(sphere, p, vectorized=True)
    assert np.max(np.abs(res.x - C)) < 1e-3


def test_zero_generations_returns_best_initial():
    p = DEParams(bounds=((-5, 5),) * 3, generations=0, population=10, seed=4)
    res = de_maximize(lambda x: -np.sum(x ** 2), p)
    assert res.history == [res.value]
    assert res.evaluations == 10


def test_x0_seeding_never_worse():
    x0 = C.copy()
    p = DEParams(bounds=((-5, 5),) * 8, generations=3, seed=1)
    res = de_maximize(sphere, p, x0=x0, vectorized=True)
    assert res.value == 0.0


def test_vectorized_matches_scalar():
    p = DEParams(bounds=((-5, 5),) * 4, generations=20, population=12, seed=9)
    f = lambda x: -float(np.sum((x - 1) ** 2))
    a = de_maximize(f, p)
    b = de_maximize(lambda X: -np.sum((X - 1) ** 2, axis=1), p, vectorized=True)
    assert np.array_equal(a.x, b.x) and a.history == b.history


def test_deterministic():
    p = DEParams(bounds=((-1, 2),) * 5, generations=30, seed=11)
    a = de_maximize(lambda X: -np.sum(X ** 2, axis=1), p, vectorized=True)
    b = de_maximize(lambda X: -np.sum(X ** 2, axis=1), p, vectorized=True)
    assert np.array_equal(a.x, b.x) and a.history == b.history


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), dim=st.integers(1, 6), gens=st.integers(0, 15))
def test_history_monotone_and_in_bounds(seed, dim, gens):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=dim)
    bounds = tuple((-1.0 - i, 0.5 + i) for i in range(dim))
    p = DEParams(bounds=bounds, generations=gens, population=8, seed=seed)
    res = de_maximize(lambda X: np.sin(X @ w) - 0.1 * np.sum(X ** 2, axis=1), p,
                      vectorized=True)
    assert all(a <= b for a, b in zip(res.history, res.history[1:]))
    lo, hi = np.array(bounds).T
    assert np.all(res.x >= lo) and np.all(res.x <= hi)
    assert len(res.history) == gens + 1


def test_relabeling_equivariance():
    perm = np.array([3, 0, 7, 1, 6, 2, 5, 4])
    p = DEParams(bounds=((-5, 5),) * 8, generations=300, differential_weight=0.5, seed=2)
    a = de_maximize(sphere, p, vectorized=True)
    b = de_maximize(lambda X: sphere(np.asarray(X)[:, np.argsort(perm)]), p, vectorized=True)
    assert np.allclose(a.x[perm], b.x, atol=1e-3)


@pytest.mark.parametrize("kwargs", [
    dict(bounds=()), dict(bounds=((1, 0),)), dict(bounds=((0, 1),), population=3),
    dict(bounds=((0, 1),), differential_weight=0), dict(bounds=((0, 1),), crossover=1.5),
    dict(bounds=((0, 1),), generations=-1), dict(bounds=((0, 1),), strategy="best/2/exp"),
])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidParameter):
        DEParams(**kwargs)


def test_history_csv(tmp_path):
    p = DEParams(bounds=((-1, 1),) * 2, generations=5, population=6, seed=0)
    res = de_maximize(lambda X: -np.sum(X ** 2, axis=1), p, vectorized=True)
    path = tmp_path / "h.csv"
    res.write_history_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 6
    assert [float(r["best"]) for r in rows] == res.history
