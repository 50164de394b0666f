import json

import numpy as np
import pytest

from adaptnas.fitness import (
    WORKERS_ENV,
    AccuracySurrogate,
    CostLut,
    Evaluator,
    LutError,
    build_accuracy_surrogate,
    default_workers,
    evaluate,
    load_lut,
    resolve_profile,
    synth_lut,
)
from adaptnas.gbtree import GbtModel, Quality
from adaptnas.space import SearchSpace, enumerate_space, random_population


@pytest.fixture
def space():
    return SearchSpace.from_cardinalities([3, 4, 2, 5, 3])


def hand_lut():
    lat = np.array([[1.0, 2.0, np.nan], [0.5, 0.75, 1.5]])
    en = np.array([[2.0, 3.0, np.nan], [1.0, 1.0, 4.0]])
    return CostLut(lat, en, base_latency=10.0, base_energy=20.0)


def smooth_error(pop):
    x = np.asarray(pop, dtype=float)
    return 0.2 + 0.04 * x[:, 0] + 0.03 * np.sqrt(x[:, 1]) + 0.02 * x[:, 3] * x[:, 4] / 8


class TestLut:
    def test_hand_arithmetic(self):
        lut = hand_lut()
        lat, en = lut.costs(np.array([[1, 2], [0, 0]]))
        assert lat.tolist() == [10 + 2 + 1.5, 10 + 1 + 0.5]
        assert en.tolist() == [20 + 3 + 4, 20 + 2 + 1]

    def test_missing_entry(self):
        space = SearchSpace.from_cardinalities([3, 3])
        with pytest.raises(LutError):
            hand_lut().check_total(space)

    def test_minimal_genome_is_cheapest(self, space, rng):
        lut = synth_lut(space, rng)
        lat, en = lut.costs(enumerate_space(space))
        assert lat.argmin() == 0 and en.argmin() == 0

    def test_additivity(self, space, rng):
        lut = synth_lut(space, rng)
        g = np.array([1, 2, 0, 3, 1])
        h = g.copy()
        h[3] = 4
        diff = lut.costs(h[None])[0][0] - lut.costs(g[None])[0][0]
        assert diff == pytest.approx(lut.latency[3, 4] - lut.latency[3, 3], abs=1e-12)

    def test_round_trip(self, space, rng, tmp_path):
        lut = synth_lut(space, rng, "slow")
        lut.save(tmp_path / "lut.json")
        back = load_lut(tmp_path / "lut.json", space)
        assert np.array_equal(back.latency, lut.latency, equal_nan=True)
        assert np.array_equal(back.energy, lut.energy, equal_nan=True)
        assert back.profile == "slow"
        assert json.loads((tmp_path / "lut.json").read_text())["header"]["schema_version"] == 1

    def test_profiles_ordered(self, space):
        fast = synth_lut(space, np.random.default_rng(4), "fast")
        slow = synth_lut(space, np.random.default_rng(4), "slow")
        ok = np.isfinite(fast.latency)
        assert np.all(fast.latency[ok] < slow.latency[ok])
        assert np.all(fast.energy[ok] < slow.energy[ok])

    def test_device_aliases(self):
        assert resolve_profile("nano") == "slow"
        with pytest.raises(ValueError):
            resolve_profile("gpu9000")


class TestSurrogate:
    def test_smooth_problem_quality(self, rng):
        big = SearchSpace.from_cardinalities([5] * 10)
        err = lambda p: 0.3 + 0.03 * p[:, 0] + 0.02 * p[:, 3] + 0.01 * p[:, 7] * p[:, 1] / 4
        s = build_accuracy_surrogate(err, big, 500, rng)
        assert s.quality.kendall_tau >= 0.8

    def test_constant_error(self, space, rng):
        s = build_accuracy_surrogate(lambda p: np.full(len(p), 0.25), space, 60, rng)
        assert np.allclose(s.predict_error(random_population(space, 10, rng)), 0.25)
        assert not s.quality.r2_defined

    def test_deterministic_bytes(self, space):
        a = build_accuracy_surrogate(smooth_error, space, 100, np.random.default_rng(9))
        b = build_accuracy_surrogate(smooth_error, space, 100, np.random.default_rng(9))
        assert a.dumps() == b.dumps()

    def test_minimum_budget(self, space, rng):
        with pytest.raises(ValueError):
            build_accuracy_surrogate(smooth_error, space, 10, rng)

    def test_predictions_clipped(self):
        s = AccuracySurrogate(GbtModel(1.7, 2), 50, Quality(1.0, 1.0))
        assert s.predict_error(np.zeros((2, 2))).tolist() == [1.0, 1.0]


class TestEvaluator:
    def test_module_level_evaluate(self, space, rng):
        lut = synth_lut(space, rng)
        s = build_accuracy_surrogate(smooth_error, space, 100, rng)
        g = np.array([2, 3, 1, 4, 2])
        y = evaluate(g, s, lut)
        assert y.shape == (3,)
        assert y[1] == pytest.approx(lut.costs(g[None])[0][0])

    def test_parallel_equals_serial(self, space, rng, monkeypatch):
        lut = synth_lut(space, rng)
        pop = random_population(space, 300, rng)
        serial = Evaluator(smooth_error, lut, space, workers=1).evaluate_batch(pop)
        monkeypatch.setenv(WORKERS_ENV, "4")
        assert default_workers() == 4
        par = Evaluator(smooth_error, lut, space, chunk=32)
        assert par.workers == 4
        assert np.array_equal(par.evaluate_batch(pop), serial)
        perm = rng.permutation(300)
        assert np.array_equal(par.evaluate_batch(pop[perm]), serial[perm])

    def test_counts_calls(self, space, rng):
        ev = Evaluator(smooth_error, synth_lut(space, rng), space)
        ev.evaluate_batch(random_population(space, 7, rng))
        ev.evaluate([0, 0, 0, 0, 0])
        assert ev.calls == 8

    def test_invalid_genome(self, space, rng):
        ev = Evaluator(smooth_error, synth_lut(space, rng), space)
        with pytest.raises(ValueError):
            ev.evaluate([3, 0, 0, 0, 0])

    def test_missing_lut_rejected(self, rng):
        space = SearchSpace.from_cardinalities([3, 3])
        with pytest.raises(LutError):
            Evaluator(smooth_error, hand_lut(), space)
