"""Imputation, correlation filtering, box-cox target transform, SMOTE, splits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .schema import DurationBand, FeatureMatrix, IncidentRecord


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for the train / test(holdout) / validation partition."""

    train_fraction: float = 0.70
    test_fraction: float = 0.15
    validation_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        for f in (self.train_fraction, self.test_fraction, self.validation_fraction):
            if not 0.0 < f < 1.0:
                raise PreprocessError(f"split fractions must lie in (0,1), got {f}")
        total = self.train_fraction + self.test_fraction + self.validation_fraction
        if abs(total - 1.0) > 1e-12:
            raise PreprocessError(f"split fractions must sum to 1, got {total}")


class Imputer:
    """Column-wise imputation fitted on training data only.

    Numeric columns are filled with the training mean; ordinal and binary
    columns with the training mode; a one-hot group with missing rows is set
    to its training mode category.
    """

    def __init__(self):
        self.fill_: dict = {}
        self.group_mode_: dict = {}

    def fit(self, matrix: FeatureMatrix) -> "Imputer":
        rows = matrix.rows
        groups: dict[str, list[int]] = {}
        for j, col in enumerate(matrix.columns):
            if col.kind == "onehot":
                groups.setdefault(col.source, []).append(j)
                continue
            vals = rows[:, j]
            obs = vals[~np.isnan(vals)]
            if obs.size == 0:
                raise PreprocessError(f"column '{col.name}' has no observed values to impute from")
            if col.kind == "numeric":
                self.fill_[col.name] = float(obs.mean())
            else:
                self.fill_[col.name] = _mode(obs)
        for src, idxs in groups.items():
            block = rows[:, idxs]
            observed = ~np.isnan(block).any(axis=1)
            if not observed.any():
                raise PreprocessError(f"one-hot group '{src}' has no observed values to impute from")
            counts = block[observed].sum(axis=0)
            self.group_mode_[src] = int(np.argmax(counts))
        return self

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        rows = matrix.rows.copy()
        groups: dict[str, list[int]] = {}
        for j, col in enumerate(matrix.columns):
            if col.kind == "onehot":
                groups.setdefault(col.source, []).append(j)
                continue
            fill = self.fill_.get(col.name)
            if fill is None:
                continue
            mask = np.isnan(rows[:, j])
            rows[mask, j] = fill
        for src, idxs in groups.items():
            if src not in self.group_mode_:
                continue
            block = rows[:, idxs]
            miss = np.isnan(block).any(axis=1)
            if miss.any():
                block[miss] = 0.0
                block[miss, self.group_mode_[src]] = 1.0
                rows[:, idxs] = block
        return FeatureMatrix(matrix.columns, rows, matrix.target)

    def fit_transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        return self.fit(matrix).transform(matrix)

    def to_state(self) -> dict:
        return {"fill": dict(self.fill_), "group_mode": dict(self.group_mode_)}

    @classmethod
    def from_state(cls, state: dict) -> "Imputer":
        imp = cls()
        imp.fill_ = dict(state["fill"])
        imp.group_mode_ = {k: int(v) for k, v in state["group_mode"].items()}
        return imp


def _mode(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    return float(uniq[np.argmax(counts)])


def impute(matrix: FeatureMatrix) -> FeatureMatrix:
    """Fit-and-apply imputation on one matrix (training-time convenience)."""
    return Imputer().fit_transform(matrix)


def correlation_filter(matrix: FeatureMatrix, threshold: float):
    """Drop the later of any column pair with |Pearson r| above the threshold.

    Scans pairs in schema order, so the earlier column always survives.
    Zero-variance columns never participate. Returns the filtered matrix and
    the dropped column names.
    """
    if not 0.0 < threshold <= 1.0:
        raise PreprocessError(f"correlation threshold must lie in (0,1], got {threshold}")
    if matrix.n_rows < 2:
        raise PreprocessError("correlation filter needs at least 2 rows")
    rows = matrix.rows
    if np.isnan(rows).any():
        raise PreprocessError("correlation filter requires an imputed matrix")
    stds = rows.std(axis=0)
    active = np.flatnonzero(stds > 0)
    dropped: list[str] = []
    if active.size >= 2:
        corr = np.corrcoef(rows[:, active], rowvar=False)
        alive = np.ones(active.size, dtype=bool)
        for a in range(active.size):
            if not alive[a]:
                continue
            for b in range(a + 1, active.size):
                if alive[b] and abs(corr[a, b]) > threshold:
                    alive[b] = False
                    dropped.append(matrix.columns[active[b]].name)
    return matrix.drop_columns(dropped), dropped


@dataclass(frozen=True)
class BoxCoxTransform:
    """Power transform (y^lam - 1)/lam, log at lam=0, with optional pre-shift."""

    lam: float
    shift: float = 0.0

    def apply(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64) + self.shift
        if np.any(y <= 0):
            raise PreprocessError("box-cox transform requires strictly positive (shifted) values")
        if self.lam == 0.0:
            return np.log(y)
        return (np.power(y, self.lam) - 1.0) / self.lam

    def invert(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.lam == 0.0:
            y = np.exp(t)
        else:
            base = self.lam * t + 1.0
            # outside the invertible range the transform saturates at the
            # smallest representable positive value
            y = np.power(np.maximum(base, 1e-12), 1.0 / self.lam)
        return y - self.shift

    def to_state(self) -> dict:
        return {"lam": self.lam, "shift": self.shift}

    @classmethod
    def from_state(cls, state: dict) -> "BoxCoxTransform":
        return cls(lam=float(state["lam"]), shift=float(state["shift"]))


def boxcox_fit(y, shift: float = 0.0) -> BoxCoxTransform:
    """Pick lambda on a [-2, 2] grid (step 0.01) by maximum profile likelihood.

    Exact ties are broken toward lambda = 0.
    """
    y = np.asarray(y, dtype=np.float64) + shift
    if y.size == 0:
        raise PreprocessError("cannot fit box-cox on empty data")
    if np.any(y <= 0):
        raise PreprocessError("box-cox requires strictly positive values (adjust the shift)")
    n = y.size
    logy = np.log(y)
    sum_logy = logy.sum()
    lams = np.arange(-200, 201) / 100.0
    best_ll = -np.inf
    best_lam = 0.0
    for lam in lams:
        if lam == 0.0:
            t = logy
        else:
            t = (np.power(y, lam) - 1.0) / lam
        var = t.var()
        if var <= 0:
            continue
        ll = -0.5 * n * math.log(var) + (lam - 1.0) * sum_logy
        if ll > best_ll or (ll == best_ll and abs(lam) < abs(best_lam)):
            best_ll = ll
            best_lam = float(lam)
    return BoxCoxTransform(lam=best_lam, shift=shift)


def smote(matrix: FeatureMatrix, k: int = 5, seed: int = 0) -> FeatureMatrix:
    """Oversample minority classes to the majority count by interpolation.

    Each synthetic row is x + u * (neighbor - x) for a minority row x, one of
    its k nearest same-class neighbors, and u uniform on [0, 1]. One-hot and
    binary columns of synthetic rows snap to the nearer of {0, 1}. Original
    rows are preserved unchanged as a prefix of the output.
    """
    if matrix.target is None:
        raise PreprocessError("smote requires class labels in matrix.target")
    if k < 1:
        raise PreprocessError("smote requires k >= 1")
    labels = matrix.target.astype(np.int64)
    classes, counts = np.unique(labels, return_counts=True)
    majority = counts.max()
    rng = np.random.default_rng(seed)
    snap_cols = np.array([c.kind in ("onehot", "binary") for c in matrix.columns])
    new_rows = [matrix.rows]
    new_labels = [labels.astype(np.float64)]
    for cls, cnt in zip(classes, counts):
        need = int(majority - cnt)
        if need == 0:
            continue
        if cnt < k + 1:
            raise PreprocessError(
                f"class {int(cls)} has {int(cnt)} rows, fewer than k+1={k + 1}; use a smaller k"
            )
        xc = matrix.rows[labels == cls]
        sq = (xc * xc).sum(axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (xc @ xc.T), 0.0)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
        base = rng.integers(0, cnt, size=need)
        pick = rng.integers(0, k, size=need)
        u = rng.random(need)
        anchors = xc[base]
        neighbors = xc[nn[base, pick]]
        syn = anchors + u[:, None] * (neighbors - anchors)
        if snap_cols.any():
            vals = syn[:, snap_cols]
            syn[:, snap_cols] = (vals >= 0.5).astype(np.float64)
        new_rows.append(syn)
        new_labels.append(np.full(need, float(cls)))
    return FeatureMatrix(matrix.columns, np.vstack(new_rows), np.concatenate(new_labels))


def split_records(records: Sequence[IncidentRecord], spec: SplitSpec):
    """Stratified-by-band split into (train, test, validation).

    Deterministic for a fixed seed; disjoint and exhaustive. Raises when any
    stratum would leave one of the three splits empty.
    """
    if len(records) < 10:
        raise PreprocessError("need at least 10 records to split")
    by_band: dict[DurationBand, list[int]] = {}
    for i, r in enumerate(records):
        if r.duration_minutes is None:
            raise PreprocessError(f"record {r.id} has no duration; cannot stratify")
        by_band.setdefault(r.band, []).append(i)
    rng = np.random.default_rng(spec.seed)
    out: list[list[int]] = [[], [], []]
    fracs = (spec.train_fraction, spec.test_fraction, spec.validation_fraction)
    for band in sorted(by_band):
        idx = np.array(by_band[band])
        rng.shuffle(idx)
        sizes = _largest_remainder(len(idx), fracs)
        if min(sizes) == 0:
            raise PreprocessError(
                f"band {band.name} with {len(idx)} records leaves an empty split at fractions {fracs}"
            )
        a, b = sizes[0], sizes[0] + sizes[1]
        out[0].extend(idx[:a].tolist())
        out[1].extend(idx[a:b].tolist())
        out[2].extend(idx[b:].tolist())
    return tuple([records[i] for i in sorted(part)] for part in out)


def _largest_remainder(n: int, fracs) -> list:
    raw = [n * f for f in fracs]
    sizes = [int(math.floor(x)) for x in raw]
    rem = n - sum(sizes)
    order = sorted(range(len(fracs)), key=lambda i: raw[i] - sizes[i], reverse=True)
    for i in range(rem):
        sizes[order[i]] += 1
    return sizes
