"""Layout prototype features, k-means clustering and rebalanced sampling.

Each layout is summarised by three feature blocks: where its salient
content sits, how its region tree is shaped, and how many elements of each
category it has. The standardized, weighted concatenation is clustered with
k-means, and clusters are resampled with weights ``cnt ** (1 / theta)``
normalized to sum to one.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Element
from .region_tree import COLUMN, ROW, RegionNode
from .saliency import SalientBlock

logger = logging.getLogger(__name__)

DEFAULT_K = 8
DEFAULT_THETA = 6.0
SALIENCY_DIM = 2
REGION_DIM = 5


@dataclass(frozen=True)
class PrototypeFeatures:
    saliency: tuple[float, float]
    region: tuple[float, float, float, float, float]  # s, sigma_x, sigma_y, n_row, n_col
    element: tuple[float, ...]

    def raw(self) -> np.ndarray:
        return np.array(self.saliency + self.region + self.element, dtype=np.float64)

    def to_json(self) -> dict:
        return {"saliency": list(self.saliency), "region": list(self.region),
                "element": list(self.element)}

    @classmethod
    def from_json(cls, data: dict) -> PrototypeFeatures:
        return cls(tuple(map(float, data["saliency"])), tuple(map(float, data["region"])),
                   tuple(map(float, data["element"])))


def extract_saliency_feature(blocks: Sequence[SalientBlock]) -> tuple[float, float]:
    """Area-weighted mean of block centers; (0.5, 0.5) when there is no area."""
    total = sum(b.bbox.area for b in blocks)
    if total <= 0:
        return (0.5, 0.5)
    cx = sum(b.bbox.area * b.bbox.cx for b in blocks) / total
    cy = sum(b.bbox.area * b.bbox.cy for b in blocks) / total
    return (cx, cy)


def extract_region_feature(tree: RegionNode) -> tuple[float, float, float, float, float]:
    regions = tree.regions()
    s = len(regions)
    if s == 0:
        return (0.0, 0.0, 0.0, 0.0, 0.0)
    cx = np.array([r.bbox.cx for r in regions])
    cy = np.array([r.bbox.cy for r in regions])
    n_row = sum(r.direction == ROW for r in regions)
    n_col = sum(r.direction == COLUMN for r in regions)
    return (float(s), float(cx.std()), float(cy.std()), float(n_row), float(n_col))


def extract_element_feature(elements: Sequence[Element],
                            category_order: Sequence[str]) -> tuple[float, ...]:
    slot = {c: k for k, c in enumerate(category_order)}
    counts = [0.0] * len(category_order)
    for e in elements:
        if e.category not in slot:
            raise ValueError(f"category {e.category!r} not in {list(category_order)}")
        counts[slot[e.category]] += 1
    return tuple(counts)


def extract_features(elements, tree, blocks, category_order) -> PrototypeFeatures:
    return PrototypeFeatures(extract_saliency_feature(blocks),
                             extract_region_feature(tree),
                             extract_element_feature(elements, category_order))


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, raw: np.ndarray) -> Standardization:
        raw = np.asarray(raw, dtype=np.float64)
        return cls(raw.mean(axis=0), raw.std(axis=0))

    @classmethod
    def identity(cls, dim: int) -> Standardization:
        return cls(np.zeros(dim), np.ones(dim))

    def apply(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=np.float64)
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (raw - self.mean) / safe, 0.0)

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> Standardization:
        return cls(np.asarray(data["mean"], float), np.asarray(data["std"], float))


def block_weights(n_element: int, alpha: float, beta: float, gamma: float) -> np.ndarray:
    return np.concatenate([np.full(SALIENCY_DIM, alpha), np.full(REGION_DIM, beta),
                           np.full(n_element, gamma)])


def combine(features: PrototypeFeatures | np.ndarray, alpha: float = 1.0, beta: float = 1.0,
            gamma: float = 1.0, std: Standardization | None = None) -> np.ndarray:
    """Standardize every raw dimension, then scale the three blocks."""
    raw = features.raw() if isinstance(features, PrototypeFeatures) else np.asarray(features, float)
    if std is None:
        std = Standardization.identity(raw.shape[-1])
    weights = block_weights(raw.shape[-1] - SALIENCY_DIM - REGION_DIM, alpha, beta, gamma)
    return std.apply(raw) * weights


# -- k-means ------------------------------------------------------------------

@dataclass
class ClusterModel:
    centroids: np.ndarray
    assignments: np.ndarray
    counts: np.ndarray
    seed: int
    inertia_history: list[float] = field(default_factory=list)
    standardization: Standardization | None = None
    block_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    ids: list[str] | None = None

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1] if self.inertia_history else float("nan")

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "centroids": self.centroids.tolist(),
            "assignments": self.assignments.tolist(),
            "counts": self.counts.tolist(),
            "inertia_history": self.inertia_history,
            "standardization": self.standardization.to_json() if self.standardization else None,
            "block_weights": list(self.block_weights),
            "ids": self.ids,
        }

    @classmethod
    def from_json(cls, data: dict) -> ClusterModel:
        std = data.get("standardization")
        return cls(np.asarray(data["centroids"], float),
                   np.asarray(data["assignments"], int),
                   np.asarray(data["counts"], int),
                   int(data["seed"]),
                   list(data.get("inertia_history", [])),
                   Standardization.from_json(std) if std else None,
                   tuple(data.get("block_weights", (1.0, 1.0, 1.0))),
                   data.get("ids"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> ClusterModel:
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(X, X[chosen]).min(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # fewer distinct points than clusters
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(X, X[idx:idx + 1])[:, 0])
    return X[chosen].copy()


def _assign(X: np.ndarray, C: np.ndarray):
    d = _sq_dists(X, C)
    labels = d.argmin(axis=1)
    for j in range(len(C)):
        if not np.any(labels == j):
            # claim the point lying farthest from its own centroid
            own = d[np.arange(len(X)), labels]
            movable = np.bincount(labels, minlength=len(C))[labels] > 1
            own = np.where(movable, own, -1.0)
            far = int(own.argmax())
            C[j] = X[far]
            d[:, j] = ((X - C[j]) ** 2).sum(axis=1)
            labels[far] = j
    return labels, float(d[np.arange(len(X)), labels].sum())


def kmeans(vectors, k: int = DEFAULT_K, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-6) -> ClusterModel:
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops once no centroid moves by ``tol`` or more, or after ``max_iter``
    iterations. ``inertia_history`` holds the inertia after every assignment.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("vectors must form a 2-D array")
    if len(X) < k:
        raise ValueError(f"{len(X)} points cannot fill {k} clusters")
    rng = np.random.default_rng(seed)
    C = kmeans_plusplus(X, k, rng)
    history = []
    for _ in range(max_iter):
        labels, inertia = _assign(X, C)
        history.append(inertia)
        new_C = np.array([X[labels == j].mean(axis=0) for j in range(k)])
        shift = np.sqrt(((new_C - C) ** 2).sum(axis=1)).max()
        C = new_C
        if shift < tol:
            break
    labels, inertia = _assign(X, C)
    history.append(inertia)
    counts = np.bincount(labels, minlength=k)
    return ClusterModel(C, labels, counts, seed, history)


# -- rebalanced sampling -------------------------------------------------------

def rebalance_weights(counts, theta: float = DEFAULT_THETA) -> np.ndarray:
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    cnt = np.asarray(counts, dtype=np.float64)
    if np.any(cnt < 0) or cnt.sum() <= 0:
        raise ValueError("cluster counts must be non-negative with a positive total")
    tempered = np.power(cnt, 1.0 / theta)
    tempered[cnt == 0] = 0.0
    return tempered / tempered.sum()


def entropy(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    w = w[w > 0]
    return float(-(w * np.log(w)).sum())


def per_item_weights(assignments, weights) -> np.ndarray:
    """Probability that one draw picks each individual layout: w_k / cnt_k."""
    assignments = np.asarray(assignments)
    w = np.asarray(weights, dtype=np.float64)
    counts = np.bincount(assignments, minlength=len(w))
    return w[assignments] / counts[assignments]


def sample(assignments, weights, n_draws: int, seed: int) -> np.ndarray:
    """Draw layout indices with replacement: a cluster by weight, then a member uniformly."""
    assignments = np.asarray(assignments)
    w = np.asarray(weights, dtype=np.float64)
    members = [np.flatnonzero(assignments == k) for k in range(len(w))]
    for k, m in enumerate(members):
        if w[k] > 0 and len(m) == 0:
            raise ValueError(f"cluster {k} has weight {w[k]} but no members")
    rng = np.random.default_rng(seed)
    clusters = rng.choice(len(w), size=n_draws, p=w / w.sum())
    out = np.empty(n_draws, dtype=np.int64)
    for k in np.unique(clusters):
        slots = np.flatnonzero(clusters == k)
        out[slots] = members[k][rng.integers(len(members[k]), size=len(slots))]
    return out


def fit_prototypes(features: Sequence[PrototypeFeatures], k: int = DEFAULT_K, seed: int = 0,
                   alpha: float = 1.0, beta: float = 1.0, gamma: float = 1.0,
                   ids: Sequence[str] | None = None) -> ClusterModel:
    """Standardize on the given corpus, weight the blocks and cluster."""
    raw = np.stack([f.raw() for f in features])
    std = Standardization.fit(raw)
    vectors = combine(raw, alpha, beta, gamma, std)
    if len(vectors) < k:
        logger.warning("only %d layouts; clustering with k=%d instead of %d",
                       len(vectors), len(vectors), k)
        k = len(vectors)
    model = kmeans(vectors, k, seed)
    model.standardization = std
    model.block_weights = (alpha, beta, gamma)
    model.ids = list(ids) if ids is not None else None
    return model
