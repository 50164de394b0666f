"""Synthetic problem instances with known structure.

Each instance has a discrete search space shaped like a mobile-network
micro-architecture space, a deterministic ground-truth error oracle and a
synthetic cost LUT. A handful of *planted* parameters carry most of the effect
on every objective: large ordinals lower the error but raise latency and
energy, so the objectives conflict.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .fitness import CostLut, resolve_profile, synth_lut
from .metrics import FrontSet
from .pareto import combined_score
from .space import DesignParameter, SearchSpace, enumerate_space, random_population

PLANTED_SHARE = 0.88
INTERACTION_SHARE = 0.05
MIN_PLANTED_SHARE = 0.8
ERROR_FLOOR = 0.18
ERROR_SPAN = 0.5
ABLATION_SAMPLES = 300
MAX_CONSTRUCTION_TRIES = 20
TRUE_FRONT_LIMIT = 10**6

# (category, values, count); order fixes parameter indices.
FAMILIES: dict[str, dict] = {
    "ofa": {
        "layout": [
            ("resolution", [160, 176, 192, 208, 224], 1),
            ("depth", [2, 3, 4], 5),
            ("kernel", [3, 5, 7], 12),
            ("expand", [3, 4, 6], 12),
            ("width", [1.0, 1.2], 3),
        ],
        "interaction_density": 0.02,
    },
    "proxyless": {
        "layout": [
            ("resolution", [160, 192, 224, 256], 1),
            ("kernel", [3, 5, 7], 10),
            ("expand", [3, 6], 10),
            ("depth", [2, 3, 4], 6),
            ("width", [0.5, 0.75, 1.0, 1.25], 5),
        ],
        "interaction_density": 0.01,
    },
    "alphanet": {
        "layout": [
            ("resolution", [192, 208, 224, 240, 256, 272, 288, 300], 1),
            ("depth", [3, 4, 5, 6], 7),
            ("kernel", [3, 5], 14),
            ("expand", [4, 5, 6], 14),
        ],
        "interaction_density": 0.04,
    },
    "nasvit": {
        "layout": [
            ("resolution", [192, 224, 256, 288, 320, 352], 1),
            ("depth", [1, 2, 3, 4], 8),
            ("kernel", [3, 5], 8),
            ("expand", [1, 4, 5], 8),
            ("width", [16, 24, 32, 40, 48], 9),
            ("other", [4, 8, 12], 6),
        ],
        "interaction_density": 0.05,
    },
    "small": {
        "layout": [("kernel", [3, 5, 7], 4), ("expand", [3, 4, 6], 4), ("depth", [2, 3, 4], 4)],
        "interaction_density": 0.05,
    },
}
SHIPPED_FAMILIES = ("ofa", "proxyless", "alphanet", "nasvit")


@dataclass
class ProblemSpec:
    family: str | None = None
    cardinalities: list[int] | None = None
    seed: int = 0
    device_profile: str = "medium"
    n_planted: int = 5
    interaction_density: float | None = None
    noise: float = 0.01

    def to_dict(self) -> dict:
        return {"schema_version": 1, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        d = {k: v for k, v in d.items() if k != "schema_version"}
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ProblemSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def family_space(family: str) -> SearchSpace:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    params = []
    for category, values, count in FAMILIES[family]["layout"]:
        for b in range(count):
            name = f"{category}{b}" if count > 1 else category
            params.append(DesignParameter(name, len(params), tuple(values), category))
    return SearchSpace(tuple(params))


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays."""
    x = x.copy()
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


@dataclass
class SyntheticProblem:
    spec: ProblemSpec
    space: SearchSpace
    lut: CostLut
    planted: np.ndarray
    effects: np.ndarray
    weights: np.ndarray
    pairs: np.ndarray
    pair_weights: np.ndarray
    hash_keys: np.ndarray = field(repr=False)
    noise_amplitude: float = 0.0

    @property
    def name(self) -> str:
        fam = self.spec.family or "custom"
        return f"{fam}-{resolve_profile(self.spec.device_profile)}-s{self.spec.seed}"

    def raw_effect(self, pop: np.ndarray) -> np.ndarray:
        pop = np.atleast_2d(pop)
        cols = np.arange(self.space.m)
        e = self.effects[cols, pop]
        raw = e @ self.weights
        if len(self.pairs):
            raw = raw + (e[:, self.pairs[:, 0]] * e[:, self.pairs[:, 1]]) @ self.pair_weights
        return raw

    def noise(self, pop: np.ndarray) -> np.ndarray:
        h = (np.atleast_2d(pop).astype(np.uint64) + np.uint64(1)) * self.hash_keys
        u = (_mix64(np.bitwise_xor.reduce(_mix64(h), axis=1)) >> np.uint64(11)).astype(float) / 2.0**53
        return (2.0 * u - 1.0) * self.noise_amplitude

    def error_oracle(self, pop: np.ndarray) -> np.ndarray:
        """Ground-truth error in [0, 1]; deterministic in (genome, seed)."""
        total = self.weights.sum() + self.pair_weights.sum()
        err = ERROR_FLOOR + ERROR_SPAN * (self.raw_effect(pop) + self.noise(pop)) / total
        return np.clip(err, 0.0, 1.0)

    def objectives(self, pop: np.ndarray) -> np.ndarray:
        pop = np.atleast_2d(pop)
        lat, en = self.lut.costs(pop)
        return np.column_stack([self.error_oracle(pop), lat, en])

    def effect_shares(self) -> np.ndarray:
        """Planted share of the per-parameter effect ranges, one value per objective."""
        m = self.space.m
        err_range = self.weights * np.ptp(np.nan_to_num(self.effects, nan=0.0), axis=1)
        for (a, b), w in zip(self.pairs, self.pair_weights):
            err_range[a] += w / 2
            err_range[b] += w / 2
        lat_range = np.nanmax(self.lut.latency, axis=1) - np.nanmin(self.lut.latency, axis=1)
        en_range = np.nanmax(self.lut.energy, axis=1) - np.nanmin(self.lut.energy, axis=1)
        mask = np.zeros(m, dtype=bool)
        mask[self.planted] = True
        # An objective no parameter can move is trivially dominated by the planted set.
        return np.array([r[mask].sum() / r.sum() if r.sum() > 0 else 1.0
                         for r in (err_range, lat_range, en_range)])

    def ablation_effects(self, n: int = ABLATION_SAMPLES, seed: int = 0) -> np.ndarray:
        """Mean absolute change of each genome's combined score when one column is shuffled.

        Original and ablated samples are scored together so they share the
        reference front and normalization.
        """
        rng = np.random.default_rng([self.spec.seed, seed, 7])
        pop = random_population(self.space, n, rng)
        F = self.objectives(pop)
        out = np.empty(self.space.m)
        for j in range(self.space.m):
            shuffled = pop.copy()
            shuffled[:, j] = rng.permutation(shuffled[:, j])
            S = combined_score(np.vstack([F, self.objectives(shuffled)])).combined
            out[j] = np.mean(np.abs(S[:n] - S[n:]))
        return out

    def is_recoverable(self) -> bool:
        eff = self.ablation_effects()
        mask = np.zeros(self.space.m, dtype=bool)
        mask[self.planted] = True
        if mask.all():
            return True
        return bool(eff[mask].min() > eff[~mask].max())

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "space": self.space.to_dict(),
            "lut": self.lut.to_dict(),
            "planted": self.planted.tolist(),
            "effects": np.nan_to_num(self.effects, nan=-1.0).tolist(),
            "weights": self.weights.tolist(),
            "pairs": self.pairs.tolist(),
            "pair_weights": self.pair_weights.tolist(),
            "hash_keys": [int(k) for k in self.hash_keys],
            "noise_amplitude": self.noise_amplitude,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _resolve_layout(spec: ProblemSpec) -> tuple[SearchSpace, float]:
    if spec.family is not None:
        space = family_space(spec.family)
        density = FAMILIES[spec.family]["interaction_density"]
        if spec.cardinalities is not None and list(spec.cardinalities) != space.cards.tolist():
            raise ValueError("cardinalities conflict with the chosen family")
    elif spec.cardinalities:
        space = SearchSpace.from_cardinalities(spec.cardinalities)
        density = 0.02
    else:
        raise ValueError("problem spec needs a family or explicit cardinalities")
    if spec.interaction_density is not None:
        density = spec.interaction_density
    if not 0 <= density <= 1:
        raise ValueError("interaction_density must be in [0, 1]")
    return space, density


def _build(spec: ProblemSpec, space: SearchSpace, density: float, rng: np.random.Generator) -> SyntheticProblem:
    m = space.m
    cards = space.cards
    width = int(cards.max())
    eligible = np.flatnonzero(cards >= 3)
    if len(eligible) < spec.n_planted:
        eligible = np.flatnonzero(cards >= 2)
    if len(eligible) < spec.n_planted:
        eligible = np.arange(m)
    planted = np.sort(rng.choice(eligible, size=spec.n_planted, replace=False))
    is_planted = np.zeros(m, dtype=bool)
    is_planted[planted] = True

    effects = np.full((m, width), np.nan)
    for i, card in enumerate(cards):
        card = int(card)
        if card == 1:
            effects[i, 0] = 0.0
            continue
        t = np.arange(card) / (card - 1)
        if is_planted[i]:
            curve = (1.0 - t) ** rng.uniform(0.6, 1.6) + rng.normal(0.0, 0.04, card)
        else:
            curve = rng.uniform(0.0, 1.0, card)
        curve = curve - curve.min()
        effects[i, :card] = curve / curve.max() if curve.max() > 0 else curve

    n_other = m - spec.n_planted
    weights = np.empty(m)
    planted_share = PLANTED_SHARE if n_other else 1.0
    w = rng.uniform(1.0, 1.6, spec.n_planted)
    weights[is_planted] = planted_share * w / w.sum()
    if n_other:
        w = rng.uniform(0.5, 1.5, n_other)
        weights[~is_planted] = (1.0 - planted_share) * w / w.sum()

    n_pairs = int(round(density * m * (m - 1) / 2))
    if n_pairs:
        all_pairs = np.array([(a, b) for a in range(m) for b in range(a + 1, m)])
        pairs = all_pairs[np.sort(rng.choice(len(all_pairs), size=n_pairs, replace=False))]
        pw = rng.uniform(0.5, 1.5, n_pairs)
        pair_weights = INTERACTION_SHARE * pw / pw.sum()
    else:
        pairs = np.empty((0, 2), dtype=np.int64)
        pair_weights = np.empty(0)

    cost_weights = np.empty(m)
    cost_weights[is_planted] = weights[is_planted] * rng.lognormal(0.0, 0.3, spec.n_planted)
    cost_weights[is_planted] *= PLANTED_SHARE / cost_weights[is_planted].sum()
    if n_other:
        cw = weights[~is_planted] * rng.lognormal(0.0, 0.3, n_other)
        cost_weights[~is_planted] = (1.0 - PLANTED_SHARE) * cw / cw.sum()
    # Scale so a mid-sized network costs tens of milliseconds.
    lut = synth_lut(space, rng, spec.device_profile, weights=40.0 * cost_weights)

    hash_keys = rng.integers(1, 2**63 - 1, size=m, dtype=np.int64).astype(np.uint64) | np.uint64(1)
    effect_range = weights.sum() + pair_weights.sum()
    return SyntheticProblem(
        spec=spec, space=space, lut=lut, planted=planted, effects=effects, weights=weights,
        pairs=pairs.astype(np.int64), pair_weights=pair_weights, hash_keys=hash_keys,
        noise_amplitude=spec.noise * effect_range,
    )


_CACHE: dict[str, SyntheticProblem] = {}


def make_problem(spec: ProblemSpec | dict, check: bool = True) -> SyntheticProblem:
    """Deterministically build a problem from its spec.

    With ``check`` the planted parameters must hold at least 80% of every
    objective's effect range and be recoverable by ablation; otherwise the
    internal draws are repeated (from the same seed) until they are.
    Instances are cached per spec and must be treated as read-only.
    """
    if isinstance(spec, dict):
        spec = ProblemSpec.from_dict(spec)
    key = json.dumps([spec.to_dict(), check], sort_keys=True)
    if key not in _CACHE:
        _CACHE[key] = _make_problem(spec, check)
    return _CACHE[key]


def _make_problem(spec: ProblemSpec, check: bool) -> SyntheticProblem:
    space, density = _resolve_layout(spec)
    if not 1 <= spec.n_planted <= space.m:
        raise ValueError(f"n_planted must be in [1, {space.m}]")
    resolve_profile(spec.device_profile)
    for attempt in range(MAX_CONSTRUCTION_TRIES):
        rng = np.random.default_rng([spec.seed, attempt])
        problem = _build(spec, space, density, rng)
        if not check:
            return problem
        if np.all(problem.effect_shares() >= MIN_PLANTED_SHARE) and problem.is_recoverable():
            return problem
    raise RuntimeError(f"could not build a recoverable instance for {spec}")


def true_front(
    problem: SyntheticProblem,
    objectives: Callable[[np.ndarray], np.ndarray] | None = None,
    limit: int = TRUE_FRONT_LIMIT,
) -> FrontSet:
    """Exact Pareto front by exhaustive enumeration (ground-truth objectives by default)."""
    total = problem.space.cardinality()
    if total > limit:
        raise ValueError(
            f"space has {total} genomes (> {limit}); use the merged-front protocol instead"
        )
    fn = objectives or problem.objectives
    genomes = enumerate_space(problem.space, limit)
    F = np.vstack([fn(genomes[s : s + 65536]) for s in range(0, len(genomes), 65536)])
    return FrontSet.from_points(F, label="true", genomes=genomes)
