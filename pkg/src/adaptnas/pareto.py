"""Dominance, non-dominated sorting, crowding distance and NSGA-II selection.

All objectives are minimized. Objective sets are ``(n, K)`` float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMALITY_WEIGHT = 0.5
DIVERSITY_WEIGHT = 0.5

_CHUNK = 1024


def dominates(a, b) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when point ``i`` dominates point ``j``."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    D = np.empty((n, n), dtype=bool)
    for start in range(0, n, _CHUNK):
        block = F[start : start + _CHUNK, None, :]
        le = np.all(block <= F[None, :, :], axis=2)
        lt = np.any(block < F[None, :, :], axis=2)
        D[start : start + _CHUNK] = le & lt
    return D


def non_dominated_sort(F: np.ndarray) -> list[list[int]]:
    """Partition indices into fronts PF_1, PF_2, ...; ascending index order inside a front."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or len(F) == 0:
        raise ValueError("non_dominated_sort needs a non-empty (n, K) array")
    D = dominance_matrix(F)
    dominated_by = D.sum(axis=0)
    remaining = np.ones(len(F), dtype=bool)
    fronts: list[list[int]] = []
    current = np.flatnonzero(dominated_by == 0)
    while current.size:
        fronts.append(current.tolist())
        remaining[current] = False
        dominated_by = dominated_by - D[current].sum(axis=0)
        current = np.flatnonzero(remaining & (dominated_by == 0))
    return fronts


def front_ranks(F: np.ndarray) -> np.ndarray:
    """Zero-based front index for every point."""
    ranks = np.empty(len(F), dtype=np.int64)
    for r, front in enumerate(non_dominated_sort(F)):
        ranks[front] = r
    return ranks


def nondominated_mask(F: np.ndarray) -> np.ndarray:
    """Mask of the first front. Scales to large sets by sweeping in lexicographic order."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    mask = np.zeros(n, dtype=bool)
    if n == 0:
        return mask
    order = np.lexsort(F.T[::-1])
    front = np.empty((0, F.shape[1]))
    # In lexicographic order a later point never dominates an earlier one.
    for start in range(0, n, _CHUNK):
        idx = order[start : start + _CHUNK]
        block = F[idx]
        keep = np.ones(len(idx), dtype=bool)
        for s in range(0, len(front), 4 * _CHUNK):
            ref = front[s : s + 4 * _CHUNK]
            le = np.all(ref[:, None, :] <= block[None, :, :], axis=2)
            lt = np.any(ref[:, None, :] < block[None, :, :], axis=2)
            keep &= ~np.any(le & lt, axis=0)
        idx, block = idx[keep], block[keep]
        if len(idx):
            alive = ~dominance_matrix(block).any(axis=0)
            idx, block = idx[alive], block[alive]
        mask[idx] = True
        front = np.vstack([front, block])
    return mask


def crowding_distance(front: np.ndarray) -> np.ndarray:
    """Average normalized cuboid side length around each point, in [0, 1].

    Boundary points of any non-degenerate objective get 1. Objectives with a
    zero range contribute nothing.
    """
    front = np.asarray(front, dtype=float)
    n, K = front.shape
    if n == 0:
        raise ValueError("crowding_distance needs at least one point")
    if n <= 2:
        return np.ones(n)
    cd = np.zeros(n)
    boundary = np.zeros(n, dtype=bool)
    for k in range(K):
        col = front[:, k]
        span = col.max() - col.min()
        if span == 0:
            continue
        order = np.argsort(col, kind="stable")
        boundary[order[0]] = boundary[order[-1]] = True
        gaps = (col[order[2:]] - col[order[:-2]]) / span
        cd[order[1:-1]] += gaps
    cd /= K
    cd[boundary] = 1.0
    return cd


def rank_and_crowding(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Front rank and within-front crowding distance for every point."""
    F = np.asarray(F, dtype=float)
    ranks = np.empty(len(F), dtype=np.int64)
    cd = np.empty(len(F))
    for r, front in enumerate(non_dominated_sort(F)):
        ranks[front] = r
        cd[front] = crowding_distance(F[front])
    return ranks, cd


def objective_bounds(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=float)
    return F.min(axis=0), F.max(axis=0)


def normalize(F: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Min-max scaling; degenerate ranges are treated as span 1."""
    span = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    span = np.where(span > 0, span, 1.0)
    return (np.asarray(F, dtype=float) - lo) / span


def pareto_ranks(
    Y: np.ndarray, ref_front: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """Minimal Euclidean distance from each normalized row of ``Y`` to the normalized reference front."""
    ref_front = np.atleast_2d(np.asarray(ref_front, dtype=float))
    if len(ref_front) == 0:
        raise ValueError("reference front is empty")
    Yn = normalize(np.atleast_2d(Y), lo, hi)
    Rn = normalize(ref_front, lo, hi)
    out = np.empty(len(Yn))
    for start in range(0, len(Yn), _CHUNK):
        diff = Yn[start : start + _CHUNK, None, :] - Rn[None, :, :]
        out[start : start + _CHUNK] = np.sqrt(np.min(np.sum(diff**2, axis=2), axis=1))
    return out


def pareto_rank(y, ref_front, lo, hi) -> float:
    return float(pareto_ranks(np.atleast_2d(y), ref_front, lo, hi)[0])


@dataclass(frozen=True)
class ParetoScores:
    optimality: np.ndarray
    diversity: np.ndarray
    combined: np.ndarray

    def __len__(self) -> int:
        return len(self.combined)


def combined_score(
    F: np.ndarray,
    ref_front: np.ndarray | None = None,
    lo: np.ndarray | None = None,
    hi: np.ndarray | None = None,
) -> ParetoScores:
    """Weighted optimality/diversity score, lower is better.

    Optimality is the Pareto-rank distance to ``ref_front`` (default: the
    first front of ``F``) in objectives normalized by ``lo``/``hi`` (default:
    bounds of ``F`` and the reference front), then divided by its maximum over
    ``F``. Diversity is ``1 - crowding distance`` inside each front of ``F``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if len(F) == 0:
        raise ValueError("combined_score needs a non-empty population")
    if ref_front is None:
        ref_front = F[nondominated_mask(F)]
    ref_front = np.atleast_2d(np.asarray(ref_front, dtype=float))
    if lo is None or hi is None:
        lo, hi = objective_bounds(np.vstack([F, ref_front]))
    optimality = pareto_ranks(F, ref_front, lo, hi)
    _, cd = rank_and_crowding(F)
    diversity = 1.0 - cd
    top = optimality.max()
    scaled = optimality / top if top > 0 else np.zeros_like(optimality)
    combined = OPTIMALITY_WEIGHT * scaled + DIVERSITY_WEIGHT * diversity
    return ParetoScores(optimality, diversity, combined)


def nsga2_survival(F: np.ndarray, n: int) -> np.ndarray:
    """Indices of the ``n`` survivors: whole fronts first, then the last front by descending crowding."""
    F = np.asarray(F, dtype=float)
    if len(F) < n:
        raise ValueError(f"cannot select {n} survivors from {len(F)} candidates")
    chosen: list[int] = []
    for front in non_dominated_sort(F):
        if len(chosen) + len(front) <= n:
            chosen.extend(front)
            if len(chosen) == n:
                break
            continue
        cd = crowding_distance(F[front])
        idx = np.asarray(front)
        order = np.lexsort((idx, -cd))
        chosen.extend(idx[order[: n - len(chosen)]].tolist())
        break
    return np.asarray(chosen, dtype=np.int64)


def tournament_select(
    ranks: np.ndarray, crowding: np.ndarray, k: int, rng: np.random.Generator, size: int | None = None
):
    """Draw ``k`` contestants with replacement; best (rank, -crowding, index) wins.

    Returns one index, or an array of ``size`` winners when ``size`` is given.
    """
    if k < 1:
        raise ValueError("tournament pool size must be >= 1")
    n = len(ranks)
    if n == 0:
        raise ValueError("empty population")
    draws = rng.integers(0, n, size=(1 if size is None else size, k))
    r = np.asarray(ranks)[draws]
    c = np.asarray(crowding)[draws]
    # Lexicographic key: lower rank, higher crowding, lower index.
    best = np.zeros(len(draws), dtype=np.int64)
    for j in range(1, k):
        cur = draws[np.arange(len(draws)), best]
        rb, cb = r[np.arange(len(draws)), best], c[np.arange(len(draws)), best]
        better = (r[:, j] < rb) | ((r[:, j] == rb) & (c[:, j] > cb)) | (
            (r[:, j] == rb) & (c[:, j] == cb) & (draws[:, j] < cur)
        )
        best = np.where(better, j, best)
    winners = draws[np.arange(len(draws)), best]
    return int(winners[0]) if size is None else winners
