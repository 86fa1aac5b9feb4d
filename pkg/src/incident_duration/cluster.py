"""K-means clustering with elbow and silhouette diagnostics.

Used by the comparison harness as the unsupervised stand-in for the band
classifier: clusters take the place of duration bands and each one gets its
own regressor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .schema import FeatureMatrix


class ClusterError(ValueError):
    pass


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    inertia: float
    n_iter: int
    seed: int
    inertia_path: tuple = ()  # per-iteration inertia of the winning restart
    feature_names: Optional[tuple] = None

    def to_state(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "n_iter": self.n_iter,
            "seed": self.seed,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    @classmethod
    def from_state(cls, s: dict) -> "KMeansModel":
        return cls(
            k=int(s["k"]),
            centroids=np.array(s["centroids"], dtype=np.float64),
            inertia=float(s["inertia"]),
            n_iter=int(s["n_iter"]),
            seed=int(s["seed"]),
            feature_names=None if s.get("feature_names") is None else tuple(s["feature_names"]),
        )


def _as_array(matrix):
    if isinstance(matrix, FeatureMatrix):
        return matrix.rows, matrix.names
    return np.asarray(matrix, dtype=np.float64), None


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    xx = (x * x).sum(axis=1)[:, None]
    cc = (centroids * centroids).sum(axis=1)[None, :]
    return np.maximum(xx + cc - 2.0 * (x @ centroids.T), 0.0)


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(0, n))
    centroids[0] = x[first]
    d2 = _sq_dists(x, centroids[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(0, n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = x[idx]
        d2 = np.minimum(d2, _sq_dists(x, centroids[j : j + 1])[:, 0])
    return centroids


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int):
    k = centroids.shape[0]
    n = x.shape[0]
    rows = np.arange(n)
    path: list = []
    assign = None
    used = centroids
    cur = centroids
    for _ in range(max_iter):
        d2 = _sq_dists(x, cur)
        new_assign = d2.argmin(axis=1)
        mind = d2[rows, new_assign]
        for c in range(k):
            if not (new_assign == c).any():
                # re-seed an empty cluster to the farthest point
                cur = cur.copy()
                cur[c] = x[int(mind.argmax())]
                d2 = _sq_dists(x, cur)
                new_assign = d2.argmin(axis=1)
                mind = d2[rows, new_assign]
        inertia = float(mind.sum())
        if path and inertia > path[-1]:
            break  # numerical stagnation: keep the previous iterate
        stable = assign is not None and np.array_equal(new_assign, assign)
        path.append(inertia)
        assign = new_assign
        used = cur
        if stable:
            break
        nxt = np.empty_like(cur)
        for c in range(k):
            nxt[c] = x[assign == c].mean(axis=0)
        cur = nxt
    return used, assign, path[-1], len(path), path


def kmeans_fit(matrix, k: int, seed: int = 0, max_iter: int = 100, n_restarts: int = 5) -> KMeansModel:
    """Best-of-``n_restarts`` k-means with k-means++ seeding and Lloyd updates.

    Deterministic for a fixed seed: restart r uses the stream keyed by
    (seed, r) and the lowest-inertia run wins (earliest restart on ties).
    """
    x, names = _as_array(matrix)
    n = x.shape[0]
    if k < 1:
        raise ClusterError("k must be >= 1")
    if k > n:
        raise ClusterError(f"k={k} exceeds the number of points ({n})")
    best = None
    for r in range(n_restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, r])))
        centroids = _kmeanspp_init(x, k, rng)
        centroids, assign, inertia, n_iter, path = _lloyd(x, centroids.copy(), max_iter)
        if best is None or inertia < best[2]:
            best = (centroids, assign, inertia, n_iter, path)
    centroids, assign, inertia, n_iter, path = best
    return KMeansModel(
        k=k,
        centroids=centroids,
        inertia=inertia,
        n_iter=n_iter,
        seed=seed,
        inertia_path=tuple(path),
        feature_names=names,
    )


def assign_clusters(model: KMeansModel, matrix) -> np.ndarray:
    x, _ = _as_array(matrix)
    return _sq_dists(x, model.centroids).argmin(axis=1)


def silhouette(matrix, assignments) -> float:
    """Mean silhouette value over all points, in [-1, 1].

    Points in singleton clusters contribute 0, as do points whose intra- and
    inter-cluster distances are both zero.
    """
    x, _ = _as_array(matrix)
    labels = np.asarray(assignments, dtype=np.int64)
    n = x.shape[0]
    if labels.shape[0] != n:
        raise ClusterError("assignments length must match the matrix rows")
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ClusterError("silhouette needs at least two non-empty clusters")
    k = uniq.size
    remap = {c: i for i, c in enumerate(uniq)}
    lab = np.array([remap[c] for c in labels])
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    counts = onehot.sum(axis=0)

    values = np.zeros(n)
    block = max(1, int(2e7 // max(n, 1)))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d = np.sqrt(_sq_dists(x[start:stop], x))  # (b, n) distances
        sums = d @ onehot  # (b, k) total distance to each cluster
        for i in range(stop - start):
            c = lab[start + i]
            own = counts[c] - 1.0
            if own <= 0:
                values[start + i] = 0.0  # singleton cluster
                continue
            a = sums[i, c] / own
            other = [sums[i, j] / counts[j] for j in range(k) if j != c]
            b = min(other)
            m = max(a, b)
            values[start + i] = 0.0 if m == 0 else (b - a) / m
    return float(values.mean())


def elbow_scan(matrix, k_range: Sequence, seed: int = 0, n_restarts: int = 5) -> list:
    """Inertia per k over a common seed schedule; returns [(k, inertia)]."""
    ks = list(k_range)
    if not ks:
        raise ClusterError("empty k range")
    x, _ = _as_array(matrix)
    for k in ks:
        if not 1 <= k <= x.shape[0]:
            raise ClusterError(f"k={k} outside [1, {x.shape[0]}]")
    return [(k, kmeans_fit(x, k, seed=seed, n_restarts=n_restarts).inertia) for k in ks]


def pick_elbow(scan: Sequence) -> int:
    """Pick the k with the sharpest inertia knee (largest second difference).

    Needs at least three points; with fewer, the smallest k with the largest
    relative drop wins.
    """
    pts = sorted(scan)
    if len(pts) < 2:
        return pts[0][0]
    if len(pts) < 3:
        return pts[1][0]
    best_k = pts[1][0]
    best_curv = -np.inf
    for i in range(1, len(pts) - 1):
        curv = (pts[i - 1][1] - pts[i][1]) - (pts[i][1] - pts[i + 1][1])
        if curv > best_curv:
            best_curv = curv
            best_k = pts[i][0]
    return best_k


@dataclass
class FeatureScaler:
    """Zero-mean unit-variance scaling for numeric/ordinal columns; one-hot
    and binary indicator columns pass through untouched."""

    mean: np.ndarray
    std: np.ndarray
    names: tuple

    @classmethod
    def fit(cls, matrix: FeatureMatrix) -> "FeatureScaler":
        scale_mask = np.array([c.kind in ("numeric", "ordinal") for c in matrix.columns])
        mean = np.where(scale_mask, matrix.rows.mean(axis=0), 0.0)
        std = np.where(scale_mask, matrix.rows.std(axis=0), 1.0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std, names=matrix.names)

    def transform(self, matrix: FeatureMatrix) -> np.ndarray:
        if matrix.names != self.names:
            raise ClusterError("scaler schema mismatch")
        return (matrix.rows - self.mean) / self.std

    def to_state(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "names": list(self.names)}

    @classmethod
    def from_state(cls, s: dict) -> "FeatureScaler":
        return cls(
            mean=np.array(s["mean"], dtype=np.float64),
            std=np.array(s["std"], dtype=np.float64),
            names=tuple(s["names"]),
        )
