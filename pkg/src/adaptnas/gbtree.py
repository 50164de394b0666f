"""Gradient-boosted regression trees for small ordinal feature spaces.

Squared loss with an L2 penalty on leaf weights and a per-split penalty:
with unit hessians the optimal leaf weight is ``sum(residual) / (n + lambda)``
and a split's gain is

    0.5 * (G_L^2 / (n_L + lambda) + G_R^2 / (n_R + lambda) - G^2 / (n + lambda))

Splits are found by an exact scan over every threshold between consecutive
distinct feature values. Feature importance is the number of internal nodes
that split on each feature.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class GbtConfig:
    n_trees: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    gamma: float = 0.0
    reg_lambda: float = 1.0
    min_samples_leaf: int = 2
    importance: str = "split"

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.n_trees < 0 or self.max_depth < 0:
            raise ValueError("n_trees and max_depth must be non-negative")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.importance not in ("split", "gain"):
            raise ValueError("importance must be 'split' or 'gain'")


@dataclass
class Tree:
    """Flat array tree. ``feature == -1`` marks a leaf; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        for _ in range(self.depth):
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            x = X[rows, np.where(inner, feat, 0)]
            nxt = np.where(x <= self.threshold[node], self.left[node], self.right[node])
            node = np.where(inner, nxt, node)
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )


@dataclass
class GbtModel:
    base_score: float
    n_features: int
    config: GbtConfig = field(default_factory=GbtConfig)
    trees: list[Tree] = field(default_factory=list)
    split_counts: np.ndarray | None = None
    split_gains: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.split_counts is None:
            self.split_counts = np.zeros(self.n_features, dtype=np.int64)
        if self.split_gains is None:
            self.split_gains = np.zeros(self.n_features)

    @property
    def learning_rate(self) -> float:
        return self.config.learning_rate

    def predict(self, X) -> np.ndarray | float:
        """Predict one row (returns a float) or a matrix of rows."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X2.shape[1]}")
        out = np.full(len(X2), self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X2)
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "n_features": self.n_features,
            "config": asdict(self.config),
            "split_counts": self.split_counts.tolist(),
            "split_gains": self.split_gains.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbtModel":
        return cls(
            base_score=float(d["base_score"]),
            n_features=int(d["n_features"]),
            config=GbtConfig(**d["config"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            split_counts=np.asarray(d["split_counts"], dtype=np.int64),
            split_gains=np.asarray(d["split_gains"], dtype=float),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "GbtModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


class _TreeBuilder:
    def __init__(self, codes: np.ndarray, values: list[np.ndarray], config: GbtConfig):
        self.codes = codes
        self.values = values
        self.cfg = config
        n_features = codes.shape[1]
        self.width = max(len(v) for v in values)
        self.offsets = (np.arange(n_features) * self.width)[None, :]
        # Thresholds beyond a feature's last value are never valid splits.
        self.valid_cut = np.zeros((n_features, self.width), dtype=bool)
        self.cut_value = np.zeros((n_features, self.width))
        for f, v in enumerate(values):
            if len(v) > 1:
                self.valid_cut[f, : len(v) - 1] = True
                self.cut_value[f, : len(v) - 1] = (v[:-1] + v[1:]) / 2.0

    def build(self, residual: np.ndarray, split_counts: np.ndarray, split_gains: np.ndarray) -> Tree:
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []
        lam = self.cfg.reg_lambda

        def new_node() -> int:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        stack = [(new_node(), np.arange(len(residual)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            r = residual[idx]
            G = r.sum()
            value[node] = G / (len(idx) + lam)
            if depth >= self.cfg.max_depth or len(idx) < 2 * self.cfg.min_samples_leaf:
                continue
            split = self._best_split(idx, r, G)
            if split is None:
                continue
            f, c, gain = split
            feature[node] = f
            threshold[node] = self.cut_value[f, c]
            split_counts[f] += 1
            split_gains[f] += gain
            go_left = self.codes[idx, f] <= c
            lnode, rnode = new_node(), new_node()
            left[node], right[node] = lnode, rnode
            # Right pushed first so the left subtree gets the lower node ids.
            stack.append((rnode, idx[~go_left], depth + 1))
            stack.append((lnode, idx[go_left], depth + 1))

        return Tree(
            np.asarray(feature, dtype=np.int64),
            np.asarray(threshold, dtype=float),
            np.asarray(left, dtype=np.int64),
            np.asarray(right, dtype=np.int64),
            np.asarray(value, dtype=float),
        )

    def _best_split(self, idx: np.ndarray, r: np.ndarray, G: float):
        cfg = self.cfg
        n_features = self.codes.shape[1]
        n = len(idx)
        flat = (self.codes[idx] + self.offsets).ravel()
        size = n_features * self.width
        g_hist = np.bincount(flat, weights=np.repeat(r, n_features), minlength=size)
        n_hist = np.bincount(flat, minlength=size)
        GL = np.cumsum(g_hist.reshape(n_features, self.width), axis=1)
        NL = np.cumsum(n_hist.reshape(n_features, self.width), axis=1)
        GR = G - GL
        NR = n - NL
        lam = cfg.reg_lambda
        ok = self.valid_cut & (NL >= cfg.min_samples_leaf) & (NR >= cfg.min_samples_leaf)
        if not ok.any():
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (GL**2 / (NL + lam) + GR**2 / (NR + lam) - G**2 / (n + lam))
        gain = np.where(ok, gain, -np.inf)
        # argmax returns the first maximum: lowest feature, then lowest threshold.
        best = int(np.argmax(gain))
        f, c = divmod(best, self.width)
        if not gain[f, c] > cfg.gamma:
            return None
        return f, c, float(gain[f, c])


def fit(X, y, config: GbtConfig | None = None) -> GbtModel:
    """Boost ``config.n_trees`` regression trees on squared-error residuals."""
    config = config or GbtConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, m) with one target per row")
    if len(X) < 2:
        raise ValueError("need at least two training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("features and targets must be finite")

    n, m = X.shape
    model = GbtModel(base_score=float(np.mean(y)), n_features=m, config=config)
    if np.ptp(y) == 0:
        return model

    values = []
    codes = np.empty((n, m), dtype=np.int64)
    for f in range(m):
        uniq, inv = np.unique(X[:, f], return_inverse=True)
        values.append(uniq)
        codes[:, f] = inv
    builder = _TreeBuilder(codes, values, config)

    pred = np.full(n, model.base_score)
    for _ in range(config.n_trees):
        residual = y - pred
        tree = builder.build(residual, model.split_counts, model.split_gains)
        model.trees.append(tree)
        pred += config.learning_rate * tree.predict(X)
    return model


def predict(model: GbtModel, x) -> np.ndarray | float:
    return model.predict(x)


def feature_importance(model: GbtModel, kind: str | None = None) -> np.ndarray:
    """Split-count (or total-gain) importance normalized to sum 1; zeros if the model never split."""
    kind = kind or model.config.importance
    raw = model.split_counts if kind == "split" else model.split_gains
    raw = np.asarray(raw, dtype=float)
    total = raw.sum()
    return raw / total if total > 0 else np.zeros_like(raw)


@dataclass(frozen=True)
class Quality:
    r2: float
    kendall_tau: float
    r2_defined: bool = True

    def to_dict(self) -> dict:
        return {"r2": self.r2, "kendall_tau": self.kendall_tau, "r2_defined": self.r2_defined}


def quality(pred, target) -> Quality:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    if ss_tot == 0:
        return Quality(float("nan"), float("nan"), r2_defined=False)
    r2 = 1.0 - float(np.sum((target - pred) ** 2)) / ss_tot
    tau = stats.kendalltau(pred, target, variant="b").statistic
    return Quality(r2, float(tau))


def eval_quality(model: GbtModel, X, y) -> Quality:
    """Holdout R^2 and tie-adjusted Kendall tau-b."""
    X = np.asarray(X, dtype=float)
    if len(X) < 5:
        raise ValueError("holdout needs at least 5 rows")
    return quality(model.predict(X), y)
