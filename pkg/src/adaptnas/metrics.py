"""Front quality indicators: hypervolume, IGD and dominance ratio against a merged reference front."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pareto import nondominated_mask, normalize

MEMBERSHIP_TOL = 1e-9
REF_POINT_SCALE = 1.1


@dataclass
class FrontSet:
    """Mutually non-dominated objective vectors, optionally with the genomes that produced them."""

    points: np.ndarray
    label: str = ""
    genomes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        self.points = points.reshape(0, 3) if points.size == 0 else np.atleast_2d(points)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_points(cls, points, label: str = "", genomes=None) -> "FrontSet":
        """Keep only the non-dominated points (and drop exact duplicates)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(points) == 0:
            return cls(points, label, genomes)
        mask = nondominated_mask(points)
        idx = np.flatnonzero(mask)
        _, first = np.unique(points[idx], axis=0, return_index=True)
        idx = idx[np.sort(first)]
        g = None if genomes is None else np.asarray(genomes)[idx]
        return cls(points[idx], label, g)

    def to_dict(self) -> dict:
        d = {"label": self.label, "points": self.points.tolist()}
        if self.genomes is not None:
            d["genomes"] = np.asarray(self.genomes).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FrontSet":
        g = d.get("genomes")
        return cls(np.asarray(d["points"], dtype=float), d.get("label", ""),
                   None if g is None else np.asarray(g, dtype=np.int64))


def merged_reference_front(a: FrontSet, b: FrontSet, label: str = "merged") -> FrontSet:
    """Non-dominated subset of the union of two fronts, duplicates collapsed."""
    parts = [f.points for f in (a, b) if len(f)]
    if not parts:
        raise ValueError("cannot merge two empty fronts")
    return FrontSet.from_points(np.vstack(parts), label)


def _hv2(P: np.ndarray, ref: np.ndarray) -> float:
    order = np.argsort(P[:, 0], kind="stable")
    x = P[order, 0]
    y = np.minimum.accumulate(P[order, 1])
    widths = np.diff(np.append(x, ref[0]))
    return float(np.sum(widths * (ref[1] - y)))


def _hv(P: np.ndarray, ref: np.ndarray) -> float:
    d = P.shape[1]
    if len(P) == 0:
        return 0.0
    if d == 1:
        return float(ref[0] - P[:, 0].min())
    if d == 2:
        return _hv2(P, ref)
    # Sweep along the last objective: each slab is the (d-1)-volume of the points below it.
    order = np.argsort(P[:, -1], kind="stable")
    P = P[order]
    levels = np.append(P[:, -1], ref[-1])
    total = 0.0
    for i in range(len(P)):
        height = levels[i + 1] - levels[i]
        if height > 0:
            total += height * _hv(P[: i + 1, :-1], ref[:-1])
    return total


def hypervolume(front, ref_point) -> float:
    """Exact Lebesgue measure of the region dominated by ``front`` and bounded by ``ref_point``.

    Points that do not strictly dominate the reference point in every
    objective contribute nothing.
    """
    P = front.points if isinstance(front, FrontSet) else np.atleast_2d(np.asarray(front, dtype=float))
    ref = np.asarray(ref_point, dtype=float)
    if len(P) == 0:
        return 0.0
    P = P[np.all(P < ref, axis=1)]
    if len(P) == 0:
        return 0.0
    P = P[nondominated_mask(P)]
    return _hv(P, ref)


def reference_point(points: np.ndarray, scale: float = REF_POINT_SCALE) -> np.ndarray:
    """Component-wise nadir of ``points`` scaled outward by ``scale``."""
    return np.asarray(points, dtype=float).max(axis=0) * scale


def igd(front, reference) -> float:
    """Mean distance from each reference point to its nearest front point.

    Objectives are min-max normalized over the union of both sets.
    """
    F = front.points if isinstance(front, FrontSet) else np.atleast_2d(np.asarray(front, dtype=float))
    R = reference.points if isinstance(reference, FrontSet) else np.atleast_2d(np.asarray(reference, dtype=float))
    if len(R) == 0:
        raise ValueError("reference front is empty")
    if len(F) == 0:
        raise ValueError("front is empty")
    both = np.vstack([F, R])
    lo, hi = both.min(axis=0), both.max(axis=0)
    Fn, Rn = normalize(F, lo, hi), normalize(R, lo, hi)
    total = 0.0
    for s in range(0, len(Rn), 512):
        d = np.sqrt(((Rn[s : s + 512, None, :] - Fn[None, :, :]) ** 2).sum(axis=2))
        total += d.min(axis=1).sum()
    return float(total / len(Rn))


def _members(reference: np.ndarray, front: np.ndarray, tol: float) -> np.ndarray:
    if len(front) == 0:
        return np.zeros(len(reference), dtype=bool)
    hit = np.zeros(len(reference), dtype=bool)
    for s in range(0, len(reference), 512):
        close = np.isclose(reference[s : s + 512, None, :], front[None, :, :], rtol=tol, atol=tol)
        hit[s : s + 512] = close.all(axis=2).any(axis=1)
    return hit


def dominance_ratio(front, reference, tol: float = MEMBERSHIP_TOL) -> float:
    """Share of reference points that also appear in ``front``."""
    F = front.points if isinstance(front, FrontSet) else np.atleast_2d(np.asarray(front, dtype=float))
    R = reference.points if isinstance(reference, FrontSet) else np.atleast_2d(np.asarray(reference, dtype=float))
    if len(R) == 0:
        raise ValueError("reference front is empty")
    return float(_members(R, F, tol).mean())


@dataclass(frozen=True)
class FrontMetrics:
    label: str
    hypervolume: float
    igd: float
    dominance_ratio: float

    def to_dict(self) -> dict:
        return {"label": self.label, "hypervolume": self.hypervolume, "igd": self.igd,
                "dominance_ratio": self.dominance_ratio}


def compare_fronts(a: FrontSet, b: FrontSet, ref_point=None) -> tuple[FrontSet, np.ndarray, list[FrontMetrics]]:
    """Merged-front protocol: both fronts scored against the non-dominated union."""
    merged = merged_reference_front(a, b)
    ref = reference_point(merged.points) if ref_point is None else np.asarray(ref_point, dtype=float)
    rows = [
        FrontMetrics(f.label, hypervolume(f, ref), igd(f, merged), dominance_ratio(f, merged))
        for f in (a, b)
    ]
    return merged, ref, rows
