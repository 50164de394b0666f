"""Generation loop, search history, adaptive-vs-static comparison and run persistence."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import gbtree
from .adaptive import (
    PolicyAgent,
    crossover_pairs,
    mutate_population,
    policy_update,
    sample_plan,
    static_plan,
    static_state,
    train_importance,
)
from .benchmarks import ProblemSpec, SyntheticProblem, make_problem, true_front
from .fitness import AccuracySurrogate, Evaluator, build_accuracy_surrogate
from .metrics import FrontSet, compare_fronts, hypervolume, igd, reference_point
from .pareto import combined_score, nondominated_mask, nsga2_survival, objective_bounds, rank_and_crowding, tournament_select
from .space import lhs_init

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OBJECTIVES = ("error", "latency_ms", "energy_mj")


class RunError(RuntimeError):
    """A module failure inside the loop, tagged with generation and phase."""


@dataclass
class RunConfig:
    mode: str = "adaptive"
    population_size: int = 300
    generations: int = 10
    update_period: int = 2
    top_k: int = 5
    static_mut_prob: float = 0.5
    static_cx_prob: float = 0.5
    prob_range: tuple[float, float] = (0.3, 1.0)
    tournament_k: int = 2
    seed: int = 0
    problem: dict = field(default_factory=lambda: {"family": "ofa", "seed": 0, "device_profile": "medium"})
    fitness: str = "surrogate"
    surrogate_train: int = 500
    surrogate_refresh: bool = False
    importance_gbt: dict = field(default_factory=dict)
    surrogate_gbt: dict = field(default_factory=dict)
    policy_hidden: int = 32
    policy_bins: int = 8
    policy_lr: float = 0.01
    policy_heads: int = 1
    learning: bool = True

    def __post_init__(self) -> None:
        self.prob_range = tuple(float(p) for p in self.prob_range)
        if self.mode not in ("adaptive", "static"):
            raise ValueError(f"mode must be 'adaptive' or 'static', not {self.mode!r}")
        if self.fitness not in ("surrogate", "oracle"):
            raise ValueError("fitness must be 'surrogate' or 'oracle'")
        if self.population_size < 2 or self.generations < 0 or self.update_period < 1:
            raise ValueError("population_size >= 2, generations >= 0 and update_period >= 1 required")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prob_range"] = list(self.prob_range)
        return {"schema_version": SCHEMA_VERSION, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema version {version}")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        d = json.loads(path.read_text())
        # A string problem entry is a path to a problem spec file, relative to the config.
        if isinstance(d.get("problem"), str):
            d["problem"] = ProblemSpec.load(path.parent / d["problem"]).to_dict()
        return cls.from_dict(d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def problem_spec(self) -> ProblemSpec:
        return ProblemSpec.from_dict(self.problem)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class HistoryArchive:
    """Append-only store of every evaluated genome; one row per distinct genome."""

    def __init__(self, m: int):
        self.m = m
        self._genomes: list[np.ndarray] = []
        self._objectives: list[np.ndarray] = []
        self._generation: list[int] = []
        self._index: dict[bytes, int] = {}

    def __len__(self) -> int:
        return len(self._index)

    @property
    def genomes(self) -> np.ndarray:
        return np.vstack(self._genomes) if self._genomes else np.empty((0, self.m), dtype=np.int64)

    @property
    def objectives(self) -> np.ndarray:
        return np.vstack(self._objectives) if self._objectives else np.empty((0, 3))

    @property
    def generation(self) -> np.ndarray:
        return np.concatenate(self._generation) if self._generation else np.empty(0, dtype=np.int64)

    def contains(self, pop: np.ndarray) -> np.ndarray:
        return np.array([g.tobytes() in self._index for g in np.asarray(pop, dtype=np.int64)], dtype=bool)

    def evaluate(self, pop: np.ndarray, evaluator: Evaluator, generation: int) -> tuple[np.ndarray, int]:
        """Objectives for ``pop``; unseen genomes are evaluated once and appended. Returns (F, cache hits)."""
        pop = np.asarray(pop, dtype=np.int64)
        keys = [g.tobytes() for g in pop]
        fresh: dict[bytes, int] = {}
        for i, k in enumerate(keys):
            if k not in self._index and k not in fresh:
                fresh[k] = i
        rows = np.fromiter(fresh.values(), dtype=np.int64, count=len(fresh))
        if len(rows):
            F_new = evaluator.evaluate_batch(pop[rows])
            start = len(self._index)
            for j, k in enumerate(fresh):
                self._index[k] = start + j
            self._genomes.append(pop[rows])
            self._objectives.append(F_new)
            self._generation.append(np.full(len(rows), generation, dtype=np.int64))
        all_F = self.objectives
        F = all_F[[self._index[k] for k in keys]]
        return F, len(pop) - len(rows)


@dataclass
class RunResult:
    config: RunConfig
    problem_name: str
    front: FrontSet
    generations: list[dict]
    importance: list[list[float]]
    rewards: list[float]
    counts: dict
    surrogate_quality: dict | None
    history_genomes: np.ndarray = field(repr=False)
    history_objectives: np.ndarray = field(repr=False)
    history_generation: np.ndarray = field(repr=False)
    population: np.ndarray = field(repr=False)
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def header(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "config_hash": self.config_hash, "seed": self.config.seed,
                "mode": self.config.mode, "problem": self.problem_name}

    def to_dict(self) -> dict:
        """Deterministic summary; wall-clock timings live in ``timings`` only."""
        return {
            "header": self.header(),
            "config": self.config.to_dict(),
            "front": self.front.to_dict(),
            "generations": self.generations,
            "importance": self.importance,
            "rewards": self.rewards,
            "counts": self.counts,
            "surrogate_quality": self.surrogate_quality,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def history_scores(self):
        return combined_score(self.history_objectives)

    def history_csv(self) -> str:
        scores = self.history_scores()
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash} seed={self.config.seed} mode={self.config.mode}\n")
        m = self.history_genomes.shape[1]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", *[f"g{i}" for i in range(m)], *OBJECTIVES, "optimality", "diversity", "combined"])
        for i in range(len(self.history_genomes)):
            w.writerow([
                int(self.history_generation[i]),
                *self.history_genomes[i].tolist(),
                *[repr(float(v)) for v in self.history_objectives[i]],
                repr(float(scores.optimality[i])), repr(float(scores.diversity[i])), repr(float(scores.combined[i])),
            ])
        return buf.getvalue()

    def save(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(self.dumps() + "\n")
        (out / "history.csv").write_text(self.history_csv())
        front = {"header": self.header(), **self.front.to_dict()}
        (out / "front.json").write_text(json.dumps(front, indent=1) + "\n")
        (out / "timings.json").write_text(json.dumps({"header": self.header(), **self.timings}, indent=1) + "\n")
        return out


def load_result(out_dir: str | Path) -> dict:
    """Read a saved run back: the result summary plus the history table as arrays."""
    out = Path(out_dir)
    result = json.loads((out / "result.json").read_text())
    lines = [ln for ln in (out / "history.csv").read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    head, body = rows[0], rows[1:]
    table = np.array([[float(v) for v in r] for r in body]) if body else np.empty((0, len(head)))
    result["history"] = {"columns": head, "table": table}
    return result


def _build_evaluator(problem: SyntheticProblem, config: RunConfig, rng: np.random.Generator):
    if config.fitness == "oracle":
        return Evaluator(problem.error_oracle, problem.lut, problem.space), None
    surrogate = build_accuracy_surrogate(
        problem.error_oracle, problem.space, config.surrogate_train, rng,
        gbtree.GbtConfig(**config.surrogate_gbt),
    )
    return Evaluator(surrogate.predict_error, problem.lut, problem.space), surrogate


def _refresh_surrogate(surrogate: AccuracySurrogate, problem: SyntheticProblem, genomes: np.ndarray,
                       config: RunConfig) -> AccuracySurrogate:
    y = problem.error_oracle(genomes)
    model = gbtree.fit(genomes, y, gbtree.GbtConfig(**config.surrogate_gbt))
    return AccuracySurrogate(model, len(genomes), surrogate.quality)


def _phase(generation: int, phase: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, RunError):
                raise RunError(f"generation {generation}, phase {phase}: {exc}") from exc
            return False

    return _Ctx()


def run(config: RunConfig, problem: SyntheticProblem | None = None) -> RunResult:
    """Evolve ``config.generations`` generations and return the full record.

    Initialization, surrogate training, selection, variation and the policy
    each draw from their own child stream of ``config.seed``, so adaptive and
    static runs with one seed share the initial population and surrogate.
    """
    t_start = time.perf_counter()
    timings: dict = {"generations": []}
    problem = problem or make_problem(config.problem_spec())
    space = problem.space
    N = config.population_size
    adaptive = config.mode == "adaptive"
    learning = adaptive and config.learning
    k = min(config.top_k, space.m)

    init_ss, sur_ss, sel_ss, var_ss, pol_ss = np.random.SeedSequence(config.seed).spawn(5)
    rng_init, rng_sur = np.random.default_rng(init_ss), np.random.default_rng(sur_ss)
    rng_sel, rng_var, rng_pol = (np.random.default_rng(s) for s in (sel_ss, var_ss, pol_ss))

    with _phase(0, "surrogate"):
        evaluator, surrogate = _build_evaluator(problem, config, rng_sur)
    oracle_calls = surrogate.train_size if surrogate is not None else 0
    timings["surrogate_s"] = time.perf_counter() - t_start

    archive = HistoryArchive(space.m)
    with _phase(0, "initialization"):
        pop = lhs_init(space, N, rng_init)
        F, hits = archive.evaluate(pop, evaluator, 0)
    fitness_requests, cache_hits = N, hits

    # Without learning the adaptive loop runs the static operators unchanged.
    agent = PolicyAgent.create(space.m, rng_pol, config.policy_hidden, config.policy_bins,
                               config.policy_heads, config.policy_lr, config.prob_range) if learning else None
    state = None if learning else static_state(space.m)

    gen_log: list[dict] = []
    importance_log: list[list[float]] = []
    rewards: list[float] = []
    n_off = N + (N % 2)

    for g in range(config.generations):
        t_gen = time.perf_counter()
        entry: dict = {"generation": g + 1}
        with _phase(g, "selection"):
            ranks, cd = rank_and_crowding(F)
            winners = tournament_select(ranks, cd, config.tournament_k, rng_sel, size=n_off)
        with _phase(g, "adaptation"):
            if learning and len(archive) < 2 * space.m:
                # Too little history to fit the importance model: every gene stays eligible.
                state = static_state(space.m)
            elif learning and (state is None or state.last_update_generation < 0
                               or g % config.update_period == 0):
                state = train_importance(
                    archive.genomes, archive.objectives, k, g, rng_var,
                    gbtree.GbtConfig(**config.importance_gbt),
                )
                if config.surrogate_refresh and surrogate is not None:
                    surrogate = _refresh_surrogate(surrogate, problem, archive.genomes, config)
                    oracle_calls += len(archive)
                    evaluator.error_fn = surrogate.predict_error
            if learning:
                encodings = space.normalize(pop[winners])
                plan = sample_plan(agent, encodings, rng_pol)
            else:
                plan = static_plan(n_off, config.static_mut_prob, config.static_cx_prob)
        entry["top_k"] = state.top_k.tolist()
        entry["importance_fallback"] = bool(state.fallback)
        importance_log.append([float(v) for v in state.importance])

        with _phase(g, "variation"):
            a, b = winners[0::2], winners[1::2]
            p_cx = (plan.crossover_prob[0::2] + plan.crossover_prob[1::2]) / 2.0
            c1, c2 = crossover_pairs(pop[a], pop[b], state.top_k, p_cx, rng_var)
            children = np.empty((n_off, space.m), dtype=np.int64)
            children[0::2], children[1::2] = c1, c2
            children = mutate_population(children, space.cards, state.top_k, plan.mutate_prob, rng_var)
            dup = archive.contains(children)
            if dup.any():
                children[dup] = mutate_population(children[dup], space.cards, state.top_k,
                                                  plan.mutate_prob[dup], rng_var)
            children = children[:N]
        with _phase(g, "evaluation"):
            F_child, hits = archive.evaluate(children, evaluator, g + 1)
        fitness_requests += N
        cache_hits += hits

        if learning:
            with _phase(g, "policy"):
                hist_F = archive.objectives
                lo, hi = objective_bounds(hist_F)
                ref = hist_F[nondominated_mask(hist_F)]
                S = combined_score(F_child, ref, lo, hi).combined
                agent, reward = policy_update(agent, encodings[:N], plan.chosen_bin[:N], S)
            rewards.append(reward)
            entry["reward"] = reward
        if learning:
            entry["mean_prob"] = float(plan.mutate_prob[:N].mean())
            entry["bin_counts"] = np.bincount(plan.chosen_bin[:N, 0], minlength=agent.bins).tolist()

        with _phase(g, "survival"):
            both_F = np.vstack([F, F_child])
            both = np.vstack([pop, children])
            keep = nsga2_survival(both_F, N)
            pop, F = both[keep], both_F[keep]
        entry["new_genomes"] = int(N - hits)
        gen_log.append(entry)
        timings["generations"].append(time.perf_counter() - t_gen)

    hist_F = archive.objectives
    hist_gen = archive.generation
    ref_pt = reference_point(hist_F)
    series = []
    for g in range(config.generations + 1):
        seen = hist_F[hist_gen <= g]
        series.append(hypervolume(seen[nondominated_mask(seen)], ref_pt))
    front_mask = nondominated_mask(hist_F)
    front = FrontSet.from_points(hist_F[front_mask], label=config.mode, genomes=archive.genomes[front_mask])
    for g, entry in enumerate(gen_log, start=1):
        entry["cumulative_hypervolume"] = series[g]
    counts = {
        "fitness_requests": fitness_requests,
        "surrogate_calls": evaluator.calls,
        "cache_hits": cache_hits,
        "oracle_calls": oracle_calls,
        "archive_size": len(archive),
        "total_evaluations": fitness_requests + oracle_calls,
    }
    timings["total_s"] = time.perf_counter() - t_start
    return RunResult(
        config=config,
        problem_name=problem.name,
        front=front,
        generations=[{"generation": 0, "cumulative_hypervolume": series[0], "new_genomes": len(archive.generation[hist_gen == 0])}] + gen_log,
        importance=importance_log,
        rewards=rewards,
        counts=counts,
        surrogate_quality=None if surrogate is None else surrogate.quality.to_dict(),
        history_genomes=archive.genomes,
        history_objectives=hist_F,
        history_generation=hist_gen,
        population=pop,
        timings=timings | {"reference_point": ref_pt.tolist()},
    )


@dataclass
class Comparison:
    results: tuple[RunResult, RunResult]
    merged: FrontSet
    ref_point: np.ndarray
    rows: list[dict]

    def to_dict(self) -> dict:
        a = self.results[0]
        return {
            "header": {"schema_version": SCHEMA_VERSION, "problem": a.problem_name, "seed": a.config.seed,
                       "config_hashes": [r.config_hash for r in self.results]},
            "reference_point": self.ref_point.tolist(),
            "merged_front_size": len(self.merged),
            "runs": self.rows,
        }


def compare(a: RunConfig, b: RunConfig, problem: SyntheticProblem | None = None,
            exact_front: bool | None = None) -> Comparison:
    """Run both configurations and score them with the merged-front protocol.

    With an enumerable space (or ``exact_front=True``) each run also gets its
    IGD to the exact front of the objectives the search actually optimized.
    """
    if a.problem_spec() != b.problem_spec():
        raise ValueError("compared runs must share the same problem")
    if (a.population_size, a.generations) != (b.population_size, b.generations):
        raise ValueError("compared runs must share the same budget")
    problem = problem or make_problem(a.problem_spec())
    ra, rb = run(a, problem), run(b, problem)
    fa = replace(ra.front, label=f"{a.mode}")
    fb = replace(rb.front, label=f"{b.mode}")
    merged, ref, metrics = compare_fronts(fa, fb)
    rows = [m.to_dict() | {"front_size": len(f)} for m, f in zip(metrics, (fa, fb))]
    if exact_front is None:
        exact_front = problem.space.cardinality() <= 10**6
    if exact_front:
        if a.fitness != b.fitness or a.surrogate_train != b.surrogate_train or a.seed != b.seed:
            raise ValueError("exact-front IGD needs both runs to optimize the same objectives")
        evaluator, _ = _build_evaluator(problem, a, np.random.default_rng(np.random.SeedSequence(a.seed).spawn(5)[1]))
        truth = true_front(problem, evaluator.evaluate_batch)
        for row, f in zip(rows, (fa, fb)):
            row["igd_true_front"] = igd(f, truth)
    return Comparison((ra, rb), merged, ref, rows)


def paired_configs(config: RunConfig) -> tuple[RunConfig, RunConfig]:
    return replace(config, mode="adaptive"), replace(config, mode="static")
