"""Self-adaptive evolution operators.

Two learned components steer the variation step:

* an importance model: boosted trees regress the combined Pareto score of
  every archived genome on its ordinals; split counts rank the parameters and
  only the top-k genes are ever mutated or crossed over;
* a policy agent: a two-layer network that maps an elite's normalized
  encoding to a softmax over discretized evolution probabilities and is
  trained with a REINFORCE-style update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import gbtree
from .pareto import combined_score, nondominated_mask, objective_bounds

log = logging.getLogger(__name__)

PROB_RANGE = (0.3, 1.0)


@dataclass
class ImportanceState:
    model: gbtree.GbtModel | None
    importance: np.ndarray
    top_k: np.ndarray
    last_update_generation: int
    fallback: bool = False
    fit_quality: gbtree.Quality | None = None


def select_top_k(importance: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores; ties go to the lower index. Returned sorted."""
    importance = np.asarray(importance, dtype=float)
    k = min(k, len(importance))
    order = np.lexsort((np.arange(len(importance)), -importance))
    return np.sort(order[:k])


def static_state(m: int) -> ImportanceState:
    """Every gene is eligible; used by the static baseline."""
    return ImportanceState(None, np.full(m, 1.0 / m), np.arange(m), -1)


def train_importance(
    genomes: np.ndarray,
    objectives: np.ndarray,
    k: int,
    generation: int,
    rng: np.random.Generator,
    config: gbtree.GbtConfig | None = None,
    ref_front: np.ndarray | None = None,
) -> ImportanceState:
    """Fit the importance model on the search history and pick the top-``k`` parameters.

    Targets are combined scores of every archived genome against the
    archive's own first front. If the model never splits (e.g. all scores
    equal) the top-k set is drawn uniformly at random and ``fallback`` is set.
    """
    genomes = np.asarray(genomes)
    objectives = np.asarray(objectives, dtype=float)
    n, m = genomes.shape
    if n < 2 * m:
        raise ValueError(f"history has {n} rows, need at least {2 * m} to train importance")
    if ref_front is None:
        ref_front = objectives[nondominated_mask(objectives)]
    lo, hi = objective_bounds(objectives)
    scores = combined_score(objectives, ref_front, lo, hi).combined
    model = gbtree.fit(genomes, scores, config)
    importance = gbtree.feature_importance(model)
    fit_quality = gbtree.quality(model.predict(genomes), scores)
    if k >= m:
        return ImportanceState(model, importance, np.arange(m), generation, False, fit_quality)
    if importance.sum() == 0:
        log.warning("generation %d: importance model never split; random top-%d fallback", generation, k)
        top = np.sort(rng.choice(m, size=k, replace=False))
        return ImportanceState(model, importance, top, generation, True, fit_quality)
    return ImportanceState(model, importance, select_top_k(importance, k), generation, False, fit_quality)


def _loci_mask(m: int, top_k: np.ndarray) -> np.ndarray:
    mask = np.zeros(m, dtype=bool)
    mask[np.asarray(top_k, dtype=np.int64)] = True
    return mask


def mutate_population(
    pop: np.ndarray, cards: np.ndarray, top_k: np.ndarray, p_mut, rng: np.random.Generator
) -> np.ndarray:
    """Per-gene mutation restricted to ``top_k`` loci.

    Each eligible gene fires with its row's probability and is redrawn
    uniformly among the *other* ordinals, so a fired mutation always changes
    the gene. Single-valued parameters never change.
    """
    pop = np.array(pop, dtype=np.int64, copy=True)
    n, m = pop.shape
    p = np.broadcast_to(np.asarray(p_mut, dtype=float).reshape(-1, 1), (n, 1))
    cards = np.asarray(cards, dtype=np.int64)
    fire = (rng.random((n, m)) < p) & _loci_mask(m, top_k) & (cards > 1)
    shift = 1 + np.floor(rng.random((n, m)) * np.maximum(cards - 1, 1)).astype(np.int64)
    pop[fire] = ((pop + shift) % cards)[fire]
    return pop


def crossover_pairs(
    a: np.ndarray, b: np.ndarray, top_k: np.ndarray, p_cx, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform crossover on ``top_k`` loci: each such gene is swapped with probability ``p_cx``."""
    a = np.array(a, dtype=np.int64, copy=True)
    b = np.array(b, dtype=np.int64, copy=True)
    n, m = a.shape
    p = np.broadcast_to(np.asarray(p_cx, dtype=float).reshape(-1, 1), (n, 1))
    swap = (rng.random((n, m)) < p) & _loci_mask(m, top_k)
    a[swap], b[swap] = b[swap], a[swap]
    return a, b


def guided_mutation(parent, state: ImportanceState, p_mut: float, cards, rng) -> np.ndarray:
    return mutate_population(np.atleast_2d(parent), cards, state.top_k, p_mut, rng)[0]


def guided_crossover(a, b, state: ImportanceState, p_cx: float, rng) -> tuple[np.ndarray, np.ndarray]:
    ca, cb = crossover_pairs(np.atleast_2d(a), np.atleast_2d(b), state.top_k, p_cx, rng)
    return ca[0], cb[0]


@dataclass
class PolicyAgent:
    """Two fully connected layers (ReLU) ending in one softmax per head.

    ``heads == 1`` shares the sampled probability between mutation and
    crossover; ``heads == 2`` samples them independently.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    bin_centers: np.ndarray
    heads: int = 1
    learning_rate: float = 0.01

    @classmethod
    def create(
        cls,
        m: int,
        rng: np.random.Generator,
        hidden: int = 32,
        bins: int = 8,
        heads: int = 1,
        learning_rate: float = 0.01,
        prob_range: tuple[float, float] = PROB_RANGE,
    ) -> "PolicyAgent":
        lo, hi = prob_range
        if not 0 <= lo <= hi <= 1:
            raise ValueError(f"invalid probability range {prob_range}")
        centers = np.linspace(lo, hi, bins) if bins > 1 else np.array([(lo + hi) / 2])
        return cls(
            W1=rng.normal(0.0, np.sqrt(2.0 / m), size=(m, hidden)),
            b1=np.zeros(hidden),
            W2=rng.normal(0.0, 0.01, size=(hidden, heads * bins)),
            b2=np.zeros(heads * bins),
            bin_centers=centers,
            heads=heads,
            learning_rate=learning_rate,
        )

    @property
    def bins(self) -> int:
        return len(self.bin_centers)

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "PolicyAgent":
        return PolicyAgent(
            self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(),
            self.bin_centers.copy(), self.heads, self.learning_rate,
        )

    def to_dict(self) -> dict:
        d = {k: v.tolist() for k, v in self.params().items()}
        d.update(bin_centers=self.bin_centers.tolist(), heads=self.heads, learning_rate=self.learning_rate)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyAgent":
        return cls(
            np.asarray(d["W1"]), np.asarray(d["b1"]), np.asarray(d["W2"]), np.asarray(d["b2"]),
            np.asarray(d["bin_centers"]), int(d["heads"]), float(d["learning_rate"]),
        )


def _forward(agent: PolicyAgent, X: np.ndarray):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    pre = X @ agent.W1 + agent.b1
    hidden = np.maximum(pre, 0.0)
    logits = (hidden @ agent.W2 + agent.b2).reshape(len(X), agent.heads, agent.bins)
    logits = logits - logits.max(axis=2, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=2, keepdims=True)
    return X, pre, hidden, probs


def policy_forward(agent: PolicyAgent, encodings: np.ndarray) -> np.ndarray:
    """Softmax distributions over bins: ``(N, B)`` for one head, ``(N, heads, B)`` otherwise.

    ``encodings`` are ordinals already scaled to [0, 1] per parameter.
    """
    probs = _forward(agent, encodings)[3]
    return probs[:, 0, :] if agent.heads == 1 else probs


@dataclass
class EvolutionPlan:
    chosen_bin: np.ndarray
    mutate_prob: np.ndarray
    crossover_prob: np.ndarray
    probs: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.mutate_prob)


def sample_plan(
    agent: PolicyAgent, encodings: np.ndarray, rng: np.random.Generator, greedy: bool = False
) -> EvolutionPlan:
    """Draw one bin per elite (and head); its center is the evolution probability."""
    probs = _forward(agent, encodings)[3]
    if len(probs) == 0:
        raise ValueError("no elites to plan for")
    if greedy:
        chosen = probs.argmax(axis=2)
    else:
        u = rng.random(probs.shape[:2])
        cdf = np.cumsum(probs, axis=2)
        chosen = np.minimum((u[..., None] >= cdf).sum(axis=2), agent.bins - 1)
    centers = agent.bin_centers[chosen]
    mutate = centers[:, 0]
    cross = centers[:, 1] if agent.heads > 1 else centers[:, 0]
    return EvolutionPlan(chosen, mutate, cross, probs)


def static_plan(n: int, p_mut: float = 0.5, p_cx: float = 0.5) -> EvolutionPlan:
    return EvolutionPlan(
        np.zeros((n, 1), dtype=np.int64), np.full(n, p_mut), np.full(n, p_cx), np.ones((n, 1, 1))
    )


def reward_and_gradient(
    agent: PolicyAgent, encodings: np.ndarray, chosen_bins: np.ndarray, scores: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Reward ``mean(-(S_i - max S) * log p_i(chosen_i))`` and its gradient w.r.t. the agent weights.

    With several heads, ``log p_i`` is the joint log-probability (sum over heads).
    """
    scores = np.asarray(scores, dtype=float)
    chosen = np.asarray(chosen_bins, dtype=np.int64).reshape(len(scores), agent.heads)
    X, pre, hidden, probs = _forward(agent, encodings)
    N = len(scores)
    if len(X) != N:
        raise ValueError("encodings, chosen bins and scores must have equal length")
    coef = -(scores - scores.max())
    rows = np.arange(N)[:, None]
    heads = np.arange(agent.heads)[None, :]
    logp = np.log(probs[rows, heads, chosen]).sum(axis=1)
    reward = float(np.mean(coef * logp))

    onehot = np.zeros_like(probs)
    onehot[rows, heads, chosen] = 1.0
    d_logits = ((coef / N)[:, None, None] * (onehot - probs)).reshape(N, -1)
    grads = {
        "W2": hidden.T @ d_logits,
        "b2": d_logits.sum(axis=0),
    }
    d_hidden = (d_logits @ agent.W2.T) * (pre > 0)
    grads["W1"] = X.T @ d_hidden
    grads["b1"] = d_hidden.sum(axis=0)
    return reward, grads


def policy_update(
    agent: PolicyAgent, encodings: np.ndarray, chosen_bins: np.ndarray, scores: np.ndarray
) -> tuple[PolicyAgent, float]:
    """One gradient-ascent step on the reward. Returns the updated copy and the pre-step reward."""
    reward, grads = reward_and_gradient(agent, encodings, chosen_bins, scores)
    new = agent.copy()
    for name, g in grads.items():
        getattr(new, name)[...] += agent.learning_rate * g
    return new, reward
