import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptnas.space import (
    DesignParameter,
    SearchSpace,
    enumerate_space,
    lhs_init,
    random_genome,
    random_population,
    validate,
)


class TestDesignParameter:
    def test_rejects_empty_values(self):
        with pytest.raises(ValueError):
            DesignParameter("k", 0, (), "kernel")

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            DesignParameter("k", 0, (3, 5, 3), "kernel")

    def test_rejects_unknown_category(self):
        with pytest.raises(ValueError):
            DesignParameter("k", 0, (3, 5), "colour")

    def test_ordinal(self):
        p = DesignParameter("k", 0, (3, 5, 7), "kernel")
        assert p.cardinality == 3
        assert p.ordinal(7) == 2


class TestSearchSpace:
    def test_indices_must_be_in_order(self):
        a = DesignParameter("a", 1, (0, 1))
        with pytest.raises(ValueError):
            SearchSpace((a,))

    def test_empty_space_rejected(self):
        with pytest.raises(ValueError):
            SearchSpace(())

    def test_cardinality_is_exact(self):
        space = SearchSpace.from_cardinalities([7] * 40)
        assert space.cardinality() == 7**40

    def test_cards_read_only(self):
        space = SearchSpace.from_cardinalities([3, 2])
        with pytest.raises(ValueError):
            space.cards[0] = 9

    def test_encode_decode_round_trip(self):
        space = SearchSpace((
            DesignParameter("res", 0, (160, 192, 224), "resolution"),
            DesignParameter("k", 1, (3, 5, 7), "kernel"),
        ))
        g = space.encode([224, 5])
        assert g.tolist() == [2, 1]
        assert space.decode(g) == [224, 5]

    def test_category_does_not_change_behaviour(self):
        a = SearchSpace.from_cardinalities([3, 4], ["kernel", "width"])
        b = SearchSpace.from_cardinalities([3, 4])
        r1, r2 = np.random.default_rng(0), np.random.default_rng(0)
        assert np.array_equal(lhs_init(a, 10, r1), lhs_init(b, 10, r2))

    def test_json_round_trip(self, tmp_path):
        space = SearchSpace.from_cardinalities([3, 1, 5], ["kernel", "depth", "other"])
        space.save(tmp_path / "s.json")
        back = SearchSpace.load(tmp_path / "s.json")
        assert back == space
        assert json.loads((tmp_path / "s.json").read_text())["schema_version"] == 1

    def test_normalize_range(self):
        space = SearchSpace.from_cardinalities([3, 1, 5])
        enc = space.normalize(np.array([[2, 0, 4], [0, 0, 0]]))
        assert enc.tolist() == [[1.0, 0.0, 1.0], [0.0, 0.0, 0.0]]


class TestValidate:
    space = SearchSpace.from_cardinalities([3, 2])

    def test_boundary_ordinals(self):
        assert validate(self.space, [2, 1])

    def test_ordinal_equal_to_cardinality(self):
        assert not validate(self.space, [3, 0])

    def test_wrong_length(self):
        assert not validate(self.space, [0])

    def test_negative_and_float(self):
        assert not validate(self.space, [-1, 0])
        assert not validate(self.space, np.array([0.0, 1.0]))


class TestRandomGenome:
    def test_single_choice(self, rng):
        space = SearchSpace.from_cardinalities([1])
        assert all(random_genome(space, rng).tolist() == [0] for _ in range(20))

    def test_binary_frequencies_within_3_sigma(self, rng):
        space = SearchSpace.from_cardinalities([2, 2, 2])
        pop = random_population(space, 10_000, rng)
        sigma = np.sqrt(0.25 / 10_000)
        assert np.all(np.abs(pop.mean(axis=0) - 0.5) < 3 * sigma)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 9), min_size=1, max_size=8), st.integers(0, 2**32 - 1))
    def test_always_valid(self, cards, seed):
        space = SearchSpace.from_cardinalities(cards)
        assert validate(space, random_genome(space, np.random.default_rng(seed)))


class TestLhs:
    def test_n_equal_cardinality_is_permutation(self, rng):
        space = SearchSpace.from_cardinalities([4])
        pop = lhs_init(space, 4, rng)
        assert sorted(pop[:, 0].tolist()) == [0, 1, 2, 3]

    def test_marginals_cover_each_ordinal_once(self, rng):
        space = SearchSpace.from_cardinalities([4, 4])
        pop = lhs_init(space, 4, rng)
        for j in range(2):
            assert sorted(pop[:, j].tolist()) == [0, 1, 2, 3]

    def test_histogram_is_balanced(self):
        space = SearchSpace.from_cardinalities([8] * 5)
        pop = lhs_init(space, 16, np.random.default_rng(7))
        for j in range(5):
            counts = np.bincount(pop[:, j], minlength=8)
            assert counts.max() - counts.min() <= 1

    def test_larger_than_cardinality_cycles_strata(self, rng):
        space = SearchSpace.from_cardinalities([3, 5, 7, 9])
        pop = lhs_init(space, 300, rng)
        assert pop.shape == (300, 4)
        assert np.all([validate(space, g) for g in pop])
        assert len({g.tobytes() for g in pop}) == 300

    def test_deterministic(self):
        space = SearchSpace.from_cardinalities([5] * 6)
        a = lhs_init(space, 30, np.random.default_rng(3))
        b = lhs_init(space, 30, np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_tiny_space_keeps_duplicates_after_retries(self, rng):
        space = SearchSpace.from_cardinalities([2])
        pop = lhs_init(space, 5, rng)
        assert len(pop) == 5

    def test_rejects_empty(self, rng):
        with pytest.raises(ValueError):
            lhs_init(SearchSpace.from_cardinalities([2]), 0, rng)


class TestEnumerate:
    def test_full_enumeration(self):
        space = SearchSpace.from_cardinalities([2, 3])
        all_g = enumerate_space(space)
        assert all_g.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]

    def test_limit(self):
        with pytest.raises(ValueError):
            enumerate_space(SearchSpace.from_cardinalities([10] * 7), limit=10**6)
