"""Discrete design spaces, ordinal genome encoding and population initialization.

A genome is a 1-D integer array holding one ordinal per design parameter.
Populations are 2-D arrays of shape ``(n, m)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

CATEGORIES = ("resolution", "kernel", "expand", "width", "depth", "other")

#: Genome alias: integer ordinals, one per parameter.
Genome = np.ndarray

LHS_MAX_RETRIES = 10


@dataclass(frozen=True)
class DesignParameter:
    name: str
    index: int
    values: tuple[Any, ...]
    category: str = "other"

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ValueError(f"parameter {self.name!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"parameter {self.name!r} has duplicate values")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r} for {self.name!r}")

    @property
    def cardinality(self) -> int:
        return len(self.values)

    def ordinal(self, value: Any) -> int:
        return self.values.index(value)


@dataclass(frozen=True)
class SearchSpace:
    """Ordered list of design parameters; the fixed macro-architecture is implicit."""

    parameters: tuple[DesignParameter, ...]
    cards: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.parameters) < 1:
            raise ValueError("search space needs at least one parameter")
        for i, p in enumerate(self.parameters):
            if p.index != i:
                raise ValueError(f"parameter {p.name!r} has index {p.index}, expected {i}")
        cards = np.array([p.cardinality for p in self.parameters], dtype=np.int64)
        cards.setflags(write=False)
        object.__setattr__(self, "cards", cards)

    @property
    def m(self) -> int:
        return len(self.parameters)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    def cardinality(self) -> int:
        """Exact number of distinct genomes (Python ints do not overflow)."""
        return math.prod(int(c) for c in self.cards)

    @classmethod
    def from_cardinalities(
        cls, cards: Sequence[int], categories: Sequence[str] | None = None
    ) -> "SearchSpace":
        """Build a space whose values are simply ``0..card-1``."""
        categories = categories or ["other"] * len(cards)
        params = tuple(
            DesignParameter(f"p{i}", i, tuple(range(int(c))), cat)
            for i, (c, cat) in enumerate(zip(cards, categories))
        )
        return cls(params)

    def decode(self, genome: Genome) -> list[Any]:
        return [p.values[int(g)] for p, g in zip(self.parameters, genome)]

    def encode(self, values: Sequence[Any]) -> Genome:
        if len(values) != self.m:
            raise ValueError(f"expected {self.m} values, got {len(values)}")
        return np.array([p.ordinal(v) for p, v in zip(self.parameters, values)], dtype=np.int64)

    def normalize(self, genomes: np.ndarray) -> np.ndarray:
        """Scale ordinals to [0, 1] per parameter (single-value parameters map to 0)."""
        span = np.maximum(self.cards - 1, 1)
        return np.asarray(genomes, dtype=float) / span

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "parameters": [
                {"name": p.name, "category": p.category, "values": list(p.values)}
                for p in self.parameters
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpace":
        params = tuple(
            DesignParameter(
                str(entry["name"]), i, tuple(entry["values"]), entry.get("category", "other")
            )
            for i, entry in enumerate(data["parameters"])
        )
        return cls(params)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SearchSpace":
        return cls.from_dict(json.loads(Path(path).read_text()))


def validate(space: SearchSpace, genome: Any) -> bool:
    """True iff ``genome`` has exactly ``m`` integer genes, each inside its ordinal range."""
    g = np.asarray(genome)
    if g.ndim != 1 or g.shape[0] != space.m:
        return False
    if g.size and not np.issubdtype(g.dtype, np.integer):
        return False
    return bool(np.all((g >= 0) & (g < space.cards)))


def random_genome(space: SearchSpace, rng: np.random.Generator) -> Genome:
    return rng.integers(0, space.cards).astype(np.int64)


def random_population(space: SearchSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, space.cards, size=(n, space.m)).astype(np.int64)


def _stratified_ordinals(card: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """One ordinal per stratum; ``n`` strata of (near) equal width over ``[0, card)``."""
    if n <= card:
        edges = (np.arange(n + 1) * card) // n
        return rng.integers(edges[:-1], edges[1:])
    full, rest = divmod(n, card)
    parts = [np.tile(np.arange(card), full)]
    if rest:
        parts.append(_stratified_ordinals(card, rest, rng))
    return np.concatenate(parts)


def lhs_init(space: SearchSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube sample of ``n`` genomes over the ordinal ranges.

    Each parameter's ordinal range is cut into ``n`` equal-probability strata
    (full cycles over the range when ``n`` exceeds the cardinality), one value
    is drawn per stratum, and strata are shuffled independently per parameter.
    Duplicate genomes are redrawn uniformly up to ``LHS_MAX_RETRIES`` times and
    then kept.
    """
    if n < 1:
        raise ValueError("population size must be >= 1")
    pop = np.empty((n, space.m), dtype=np.int64)
    for j, card in enumerate(space.cards):
        pop[:, j] = rng.permutation(_stratified_ordinals(int(card), n, rng))

    seen: set[bytes] = set()
    for i in range(n):
        key = pop[i].tobytes()
        tries = 0
        while key in seen and tries < LHS_MAX_RETRIES:
            pop[i] = random_genome(space, rng)
            key = pop[i].tobytes()
            tries += 1
        seen.add(key)
    return pop


def enumerate_space(space: SearchSpace, limit: int = 10**6) -> np.ndarray:
    """Every genome of the space, in lexicographic ordinal order."""
    total = space.cardinality()
    if total > limit:
        raise ValueError(f"space has {total} genomes, more than the enumeration limit {limit}")
    grids = np.indices(tuple(int(c) for c in space.cards)).reshape(space.m, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)
