import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptnas.metrics import (
    FrontSet,
    compare_fronts,
    dominance_ratio,
    hypervolume,
    igd,
    merged_reference_front,
    reference_point,
)

from conftest import brute_force_fronts


def random_front(rng, n, k=3):
    """Points on a concave surface are mutually non-dominated."""
    x = rng.random((n, k)) + 0.05
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def mc_hypervolume(P, ref, rng, samples=10**6):
    lo = P.min(axis=0)
    box = np.prod(ref - lo)
    hit = 0
    for _ in range(samples // 100_000):
        u = lo + rng.random((100_000, P.shape[1])) * (ref - lo)
        dominated = np.zeros(len(u), dtype=bool)
        for p in P:
            dominated |= np.all(p <= u, axis=1)
        hit += dominated.sum()
    return box * hit / samples


class TestFrontSet:
    def test_filters_dominated_and_duplicates(self):
        f = FrontSet.from_points([[1, 2, 3], [1, 2, 3], [2, 3, 4], [0, 5, 5]])
        assert f.points.tolist() == [[1, 2, 3], [0, 5, 5]]

    def test_keeps_genomes_aligned(self):
        f = FrontSet.from_points([[2, 2, 2], [1, 1, 1]], genomes=[[7, 7], [3, 3]])
        assert f.genomes.tolist() == [[3, 3]]

    def test_round_trip(self):
        f = FrontSet.from_points([[1, 2, 3], [3, 2, 1]], "x", [[0, 1], [1, 0]])
        g = FrontSet.from_dict(f.to_dict())
        assert np.array_equal(f.points, g.points) and np.array_equal(f.genomes, g.genomes)


class TestMerged:
    def test_identical(self, rng):
        a = FrontSet.from_points(random_front(rng, 10))
        m = merged_reference_front(a, a)
        assert np.array_equal(np.sort(m.points, axis=0), np.sort(a.points, axis=0))

    def test_dominating_front_wins(self, rng):
        a = FrontSet.from_points(random_front(rng, 10))
        b = FrontSet(a.points + 1.0)
        assert len(merged_reference_front(a, b)) == len(a)

    def test_matches_pairwise_oracle(self, rng):
        A = rng.integers(0, 6, size=(30, 3)).astype(float)
        B = rng.integers(0, 6, size=(30, 3)).astype(float)
        m = merged_reference_front(FrontSet.from_points(A), FrontSet.from_points(B))
        U = np.vstack([A, B])
        expect = {tuple(U[i]) for i in brute_force_fronts(U)[0]}
        assert {tuple(p) for p in m.points} == expect


class TestHypervolume:
    def test_unit_box(self):
        assert hypervolume([[0, 0, 0]], [1, 1, 1]) == 1.0

    def test_worked_2d(self):
        assert hypervolume([[1, 3], [2, 2], [3, 1]], [4, 4]) == 6.0

    def test_points_outside_reference_ignored(self):
        assert hypervolume([[0, 0, 2]], [1, 1, 1]) == 0.0

    def test_against_monte_carlo(self, rng):
        P = random_front(rng, 15)
        ref = P.max(axis=0) * 1.1
        exact = hypervolume(P, ref)
        assert exact == pytest.approx(mc_hypervolume(P, ref, rng, 400_000), rel=0.01)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 12), st.just(3)), elements=st.integers(0, 9).map(float)))
    def test_monotone_under_adding_points(self, P):
        ref = np.full(3, 10.0)
        base = hypervolume(P[:-1], ref) if len(P) > 1 else 0.0
        assert hypervolume(P, ref) >= base - 1e-9

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 8), st.just(3)), elements=st.integers(0, 4).map(float)))
    def test_grid_count_oracle(self, P):
        # On an integer grid the volume is the number of dominated unit cells.
        ref = np.full(3, 5.0)
        cells = np.indices((5, 5, 5)).reshape(3, -1).T.astype(float)
        count = sum(np.any(np.all(P <= c, axis=1)) for c in cells)
        assert hypervolume(P, ref) == pytest.approx(float(count))


class TestIgd:
    def test_identical_is_zero(self, rng):
        R = random_front(rng, 8)
        assert igd(R, R) == 0.0

    def test_unit_diagonal(self):
        assert igd([[1, 1, 1]], [[0, 0, 0]]) == pytest.approx(np.sqrt(3))

    def test_matches_double_loop(self, rng):
        F, R = rng.random((12, 3)) * 5, rng.random((9, 3)) * 5
        U = np.vstack([F, R])
        lo, span = U.min(0), U.max(0) - U.min(0)
        expect = np.mean([min(np.linalg.norm((r - f) / span) for f in F) for r in R])
        assert igd(F, R) == pytest.approx(expect, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            igd(np.empty((0, 3)), [[0, 0, 0]])


class TestDominanceRatio:
    def test_superset(self, rng):
        R = random_front(rng, 10)
        assert dominance_ratio(np.vstack([R, R + 3]), R) == 1.0

    def test_half_split(self):
        a = FrontSet(np.array([[0.0, 1, 2], [1, 0, 2]]))
        b = FrontSet(np.array([[2.0, 1, 0], [1, 2, 0]]))
        m = merged_reference_front(a, b)
        assert dominance_ratio(a, m) == 0.5 and dominance_ratio(b, m) == 0.5

    def test_identical_configs(self, rng):
        a = FrontSet.from_points(random_front(rng, 10), "a")
        _, _, rows = compare_fronts(a, a)
        assert rows[0].dominance_ratio == rows[1].dominance_ratio == 1.0
        assert rows[0].hypervolume == rows[1].hypervolume

    def test_strictly_dominated_front(self, rng):
        a = FrontSet.from_points(random_front(rng, 10), "a")
        b = FrontSet(a.points + 0.5, "b")
        _, _, rows = compare_fronts(a, b)
        assert rows[1].dominance_ratio == 0.0


def test_reference_point_scales_nadir():
    assert reference_point(np.array([[1.0, 4.0], [2.0, 3.0]])).tolist() == pytest.approx([2.2, 4.4])
