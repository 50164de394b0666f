"""Surrogate-assisted fitness: boosted-tree error model plus additive latency/energy tables."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import gbtree
from .space import SearchSpace, random_population, validate

WORKERS_ENV = "ADAPTNAS_WORKERS"

#: Device tiers: multiplier applied to raw latency and to raw energy.
DEVICE_PROFILES: dict[str, tuple[float, float]] = {
    "fast": (1.0, 1.0),
    "medium": (1.9, 1.6),
    "slow": (4.2, 2.7),
}
PROFILE_ALIASES = {"agx": "fast", "tx2": "medium", "nano": "slow"}


def resolve_profile(name: str) -> str:
    name = PROFILE_ALIASES.get(name, name)
    if name not in DEVICE_PROFILES:
        raise ValueError(f"unknown device profile {name!r}; choose from {sorted(DEVICE_PROFILES)}")
    return name


class LutError(KeyError):
    pass


@dataclass
class CostLut:
    """Per-(parameter, ordinal) latency/energy contributions plus a fixed base cost.

    Unused cells of the padded tables (ordinal >= cardinality) hold NaN.
    """

    latency: np.ndarray
    energy: np.ndarray
    base_latency: float
    base_energy: float
    profile: str = "custom"

    def check_total(self, space: SearchSpace) -> None:
        for i, card in enumerate(space.cards):
            for o in range(int(card)):
                if i >= self.latency.shape[0] or o >= self.latency.shape[1]:
                    raise LutError(f"missing LUT entry (parameter {i}, ordinal {o})")
                lat, en = self.latency[i, o], self.energy[i, o]
                if not (np.isfinite(lat) and np.isfinite(en)):
                    raise LutError(f"missing LUT entry (parameter {i}, ordinal {o})")
                if lat < 0 or en < 0:
                    raise ValueError(f"negative LUT entry at (parameter {i}, ordinal {o})")

    def costs(self, pop: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pop = np.atleast_2d(pop)
        cols = np.arange(pop.shape[1])
        lat = self.base_latency + self.latency[cols, pop].sum(axis=1)
        en = self.base_energy + self.energy[cols, pop].sum(axis=1)
        if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(en))):
            raise LutError("genome hits a missing LUT entry")
        return lat, en

    def to_dict(self) -> dict:
        rows = []
        for i in range(self.latency.shape[0]):
            for o in range(self.latency.shape[1]):
                if np.isfinite(self.latency[i, o]):
                    rows.append([i, o, float(self.latency[i, o]), float(self.energy[i, o])])
        return {
            "header": {
                "schema_version": 1,
                "device_profile": self.profile,
                "base_latency_ms": self.base_latency,
                "base_energy_mj": self.base_energy,
                "columns": ["parameter", "ordinal", "latency_ms", "energy_mj"],
            },
            "rows": rows,
        }

    @classmethod
    def from_dict(cls, data: dict, space: SearchSpace | None = None) -> "CostLut":
        head = data["header"]
        rows = data["rows"]
        if space is not None:
            shape = (space.m, int(space.cards.max()))
        else:
            shape = (max(r[0] for r in rows) + 1, max(r[1] for r in rows) + 1)
        lat = np.full(shape, np.nan)
        en = np.full(shape, np.nan)
        for i, o, la, e in rows:
            if i < shape[0] and o < shape[1]:
                lat[int(i), int(o)] = la
                en[int(i), int(o)] = e
        lut = cls(lat, en, float(head["base_latency_ms"]), float(head["base_energy_mj"]),
                  head.get("device_profile", "custom"))
        if space is not None:
            lut.check_total(space)
        return lut

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def load_lut(path: str | Path, space: SearchSpace | None = None) -> CostLut:
    """Read a LUT file; with ``space`` given, every (parameter, ordinal) must be present."""
    return CostLut.from_dict(json.loads(Path(path).read_text()), space)


def synth_lut(
    space: SearchSpace,
    rng: np.random.Generator,
    profile: str = "medium",
    weights: np.ndarray | None = None,
) -> CostLut:
    """Random monotone LUT: larger ordinals always cost more.

    ``weights`` scales each parameter's cost range. Raw draws do not depend on
    the profile, so a faster profile is cheaper in every cell.
    """
    profile = resolve_profile(profile)
    lat_scale, en_scale = DEVICE_PROFILES[profile]
    m, width = space.m, int(space.cards.max())
    weights = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    steps = rng.uniform(0.5, 1.5, size=(m, width))
    power = rng.uniform(0.8, 1.2, size=(m, width))
    floor = rng.uniform(0.02, 0.05, size=m)
    lat = np.full((m, width), np.nan)
    en = np.full((m, width), np.nan)
    for i, card in enumerate(space.cards):
        card = int(card)
        inc = np.cumsum(steps[i, :card]) / steps[i, :card].sum()
        lat[i, :card] = weights[i] * (floor[i] + inc) * lat_scale
        en[i, :card] = weights[i] * (floor[i] + inc) * np.sort(power[i, :card]) * en_scale
    base_lat = 2.0 * lat_scale
    base_en = 1.5 * en_scale
    return CostLut(lat, en, base_lat, base_en, profile)


@dataclass
class AccuracySurrogate:
    model: gbtree.GbtModel
    train_size: int
    quality: gbtree.Quality

    def predict_error(self, pop: np.ndarray) -> np.ndarray:
        return np.clip(self.model.predict(np.atleast_2d(pop)), 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"train_size": self.train_size, "quality": self.quality.to_dict(), "model": self.model.to_dict()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_accuracy_surrogate(
    error_oracle: Callable[[np.ndarray], np.ndarray],
    space: SearchSpace,
    n_train: int,
    rng: np.random.Generator,
    config: gbtree.GbtConfig | None = None,
    holdout_fraction: float = 0.2,
) -> AccuracySurrogate:
    """Sample ``n_train`` genomes uniformly, query the oracle, fit on 80%, score on the rest."""
    if n_train < 50:
        raise ValueError("surrogate training needs at least 50 samples")
    X = random_population(space, n_train, rng)
    y = np.asarray(error_oracle(X), dtype=float)
    perm = rng.permutation(n_train)
    n_hold = int(round(holdout_fraction * n_train))
    hold, train = perm[:n_hold], perm[n_hold:]
    model = gbtree.fit(X[train], y[train], config)
    return AccuracySurrogate(model, n_train, gbtree.eval_quality(model, X[hold], y[hold]))


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


class Evaluator:
    """Maps genomes to (error, latency_ms, energy_mj); counts every call."""

    def __init__(
        self,
        error_fn: Callable[[np.ndarray], np.ndarray],
        lut: CostLut,
        space: SearchSpace,
        workers: int | None = None,
        chunk: int = 256,
    ):
        lut.check_total(space)
        self.error_fn = error_fn
        self.lut = lut
        self.space = space
        self.workers = workers or default_workers()
        self.chunk = chunk
        self.calls = 0

    def _eval(self, pop: np.ndarray) -> np.ndarray:
        err = np.clip(np.asarray(self.error_fn(pop), dtype=float), 0.0, 1.0)
        lat, en = self.lut.costs(pop)
        return np.column_stack([err, lat, en])

    def evaluate_batch(self, pop: np.ndarray) -> np.ndarray:
        pop = np.atleast_2d(np.asarray(pop, dtype=np.int64))
        if len(pop) == 0:
            return np.empty((0, 3))
        if not np.all((pop >= 0) & (pop < self.space.cards)) or pop.shape[1] != self.space.m:
            raise ValueError("population contains invalid genomes")
        self.calls += len(pop)
        if self.workers <= 1 or len(pop) <= self.chunk:
            return self._eval(pop)
        parts = [pop[s : s + self.chunk] for s in range(0, len(pop), self.chunk)]
        with ThreadPoolExecutor(self.workers) as ex:
            return np.vstack(list(ex.map(self._eval, parts)))

    def evaluate(self, genome) -> np.ndarray:
        if not validate(self.space, np.asarray(genome)):
            raise ValueError("invalid genome")
        return self.evaluate_batch(np.asarray(genome)[None, :])[0]


def evaluate(genome, surrogate: AccuracySurrogate, lut: CostLut) -> np.ndarray:
    """Objective vector of one genome: surrogate error in [0, 1], LUT latency and energy."""
    g = np.asarray(genome, dtype=np.int64)[None, :]
    lat, en = lut.costs(g)
    return np.array([surrogate.predict_error(g)[0], lat[0], en[0]])
