import math

import numpy as np
import pytest

from citywalk.cmaes import CMAES, minimize
from citywalk.errors import NonFiniteObjective


def sphere(x):
    return float(np.dot(x, x))


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def cigar(x):
    return float(x[0] ** 2 + 1e6 * np.dot(x[1:], x[1:]))


def test_default_popsize_formula():
    for n in (2, 5, 7, 12):
        es = CMAES(np.zeros(n), 1.0, seed=1)
        assert es.lam == 4 + int(3 * math.log(n))


def test_sphere_converges():
    x, trace = minimize(sphere, np.full(7, 3.0), 2.0, 300, seed=5)
    assert trace[-1] < 1e-12
    assert np.linalg.norm(x) < 1e-6


def test_cigar_converges():
    x, trace = minimize(cigar, np.full(5, 2.0), 1.0, 600, seed=2)
    assert trace[-1] < 1e-10


def test_rosenbrock_finds_optimum():
    x, trace = minimize(rosenbrock, np.zeros(4), 0.5, 1500, seed=3)
    assert trace[-1] < 1e-8
    assert np.allclose(x, 1.0, atol=1e-3)


def test_trace_is_monotone_best_so_far():
    _, trace = minimize(rosenbrock, np.zeros(4), 0.5, 200, seed=4)
    assert len(trace) == 200
    assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))


def test_seeded_runs_are_identical():
    x1, t1 = minimize(sphere, np.full(3, 1.5), 1.0, 80, seed=9)
    x2, t2 = minimize(sphere, np.full(3, 1.5), 1.0, 80, seed=9)
    assert np.array_equal(x1, x2)
    assert t1 == t2


def test_different_seeds_differ():
    x1, _ = minimize(sphere, np.full(3, 1.5), 1.0, 10, seed=1)
    x2, _ = minimize(sphere, np.full(3, 1.5), 1.0, 10, seed=2)
    assert not np.array_equal(x1, x2)


def test_ftarget_stops_early():
    calls = []

    def f(x):
        calls.append(1)
        return sphere(x)

    _, trace = minimize(f, np.full(4, 2.0), 1.0, 500, seed=6, ftarget=1e-6)
    assert trace[-1] <= 1e-6
    # stopped well before the 500-iteration budget
    assert len(trace) < 500
    assert len(calls) == len(trace) * (4 + int(3 * math.log(4)))


def test_best_ever_never_lost():
    # a noisy-ish deceptive function: the best sample must be kept even if
    # later generations drift away
    def f(x):
        return sphere(x) + 10.0 * math.sin(40.0 * float(x[0]))

    es = CMAES(np.full(2, 2.0), 1.0, seed=7)
    best_seen = math.inf
    for _ in range(120):
        xs = es.ask()
        vals = [f(x) for x in xs]
        es.tell(xs, vals)
        best_seen = min(best_seen, min(vals))
    assert es.best_f == pytest.approx(best_seen)


def test_non_finite_objective_raises():
    def f(x):
        return math.nan

    es = CMAES(np.zeros(3), 1.0, seed=8)
    xs = es.ask()
    with pytest.raises(NonFiniteObjective):
        es.tell(xs, [f(x) for x in xs])


def test_sigma_stays_positive_and_finite():
    es = CMAES(np.zeros(4), 1.0, seed=10)
    for _ in range(150):
        xs = es.ask()
        es.tell(xs, [sphere(x) for x in xs])
        assert math.isfinite(es.sigma) and es.sigma > 0


def test_accepts_seed_sequence():
    ss = np.random.SeedSequence(123)
    x1, _ = minimize(sphere, np.full(3, 1.0), 1.0, 40, seed=ss)
    x2, _ = minimize(sphere, np.full(3, 1.0), 1.0, 40, seed=np.random.SeedSequence(123))
    assert np.array_equal(x1, x2)
