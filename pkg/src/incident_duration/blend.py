"""Blending ensembles: bases fit on the training split, a linear or
logistic meta-learner fit on their holdout predictions.

The meta-learner sees predictions only (class-probability vectors for
classification, point predictions for regression), never raw features.
After the meta-learner is fixed the bases may be refit on the union of the
two splits, mirroring the train / holdout / retrain protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linear, trees
from .metrics import multiclass_auc, regression_metrics
from .schema import FeatureMatrix


class BlendError(ValueError):
    pass


@dataclass(frozen=True)
class BlendSpec:
    base_model_ids: tuple
    meta: str = "auto"  # logistic for classification, ols for regression
    retrain_on_union: bool = True

    def __post_init__(self):
        if len(self.base_model_ids) < 1:
            raise BlendError("a blend needs at least one base model")


@dataclass
class BlendedModel:
    base_ids: tuple
    bases: list
    meta: list  # one LinearModel per class (classification) or a single-item list (regression)
    task: str
    n_classes: int = 0
    feature_names: Optional[tuple] = None
    diagnostics: dict = field(default_factory=dict)

    def to_state(self) -> dict:
        return {
            "base_ids": list(self.base_ids),
            "bases": [_model_state(b) for b in self.bases],
            "meta": [m.to_state() for m in self.meta],
            "task": self.task,
            "n_classes": self.n_classes,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    @classmethod
    def from_state(cls, s: dict) -> "BlendedModel":
        return cls(
            base_ids=tuple(s["base_ids"]),
            bases=[_model_from_state(b) for b in s["bases"]],
            meta=[linear.LinearModel.from_state(m) for m in s["meta"]],
            task=s["task"],
            n_classes=int(s["n_classes"]),
            feature_names=None if s.get("feature_names") is None else tuple(s["feature_names"]),
        )


def _model_state(model) -> dict:
    kind = type(model).__name__
    return {"kind": kind, "state": model.to_state()}


def _model_from_state(s: dict):
    kind = s["kind"]
    cls = {
        "TreeModel": trees.TreeModel,
        "ForestModel": trees.ForestModel,
        "GbmModel": trees.GbmModel,
        "LinearModel": linear.LinearModel,
        "BlendedModel": BlendedModel,
    }.get(kind)
    if cls is None:
        raise BlendError(f"unknown model kind {kind!r} in artifact")
    return cls.from_state(s["state"])


def predict_model(model, matrix: FeatureMatrix) -> np.ndarray:
    """Dispatch prediction across the model families used in this package."""
    if isinstance(model, (trees.TreeModel, trees.ForestModel, trees.GbmModel)):
        return trees.predict(model, matrix)
    if isinstance(model, linear.LinearModel):
        return linear.predict_linear(model, matrix)
    if isinstance(model, BlendedModel):
        return blend_predict(model, matrix)
    raise BlendError(f"cannot predict with model of type {type(model).__name__}")


def _base_feature_block(bases, matrix: FeatureMatrix) -> np.ndarray:
    parts = []
    for b in bases:
        pred = predict_model(b, matrix)
        parts.append(pred if pred.ndim == 2 else pred[:, None])
    return np.hstack(parts)


def blend_fit(
    train: FeatureMatrix,
    holdout: FeatureMatrix,
    base_fitters: Sequence,
    task: str,
    meta: str = "auto",
    retrain_on: Optional[FeatureMatrix] = None,
) -> BlendedModel:
    """Fit a blended ensemble.

    ``base_fitters`` is a sequence of (id, fit_fn) pairs where fit_fn maps a
    FeatureMatrix (with target) to a fitted model. Bases train on ``train``;
    the meta-learner trains on their ``holdout`` predictions. When
    ``retrain_on`` is given the bases are refit on it afterwards (typically
    the union of train and holdout), leaving the meta-learner fixed.

    Classification uses one logistic meta-model per class on the stacked
    probability vectors; regression uses OLS on the stacked predictions.
    """
    if train.names != holdout.names:
        raise BlendError("train and holdout schemas differ")
    if train.target is None or holdout.target is None:
        raise BlendError("blend_fit needs targets on both matrices")
    n_bases = len(base_fitters)
    if n_bases < 1:
        raise BlendError("a blend needs at least one base model")
    if holdout.n_rows < 10 * n_bases:
        raise BlendError(
            f"holdout has {holdout.n_rows} rows, fewer than 10 per base model ({n_bases} bases)"
        )
    if meta == "auto":
        meta = "logistic" if task == "classification" else "ols"

    ids = tuple(bid for bid, _ in base_fitters)
    bases = [fit(train) for _, fit in base_fitters]
    meta_x = _base_feature_block(bases, holdout)
    diagnostics: dict = {}

    if task == "classification":
        y = holdout.target.astype(np.int64)
        classes = np.unique(y)
        if classes.size < 2:
            raise BlendError("holdout contains a single class; cannot fit the meta-learner")
        k = int(max(b.n_classes for b in bases if hasattr(b, "n_classes")))
        metas = []
        for c in range(k):
            yc = (y == c).astype(np.float64)
            if yc.min() == yc.max():
                # class absent from the holdout: keep a flat 0/1 scorer
                metas.append(
                    linear.LinearModel(
                        weights=np.zeros(meta_x.shape[1]),
                        intercept=-20.0 if yc.max() == 0.0 else 20.0,
                        family="logistic",
                    )
                )
                continue
            metas.append(linear.logistic_fit(meta_x, yc))
        model = BlendedModel(ids, bases, metas, task, n_classes=k, feature_names=train.names)
        diagnostics["holdout_auc"] = multiclass_auc(blend_predict(model, holdout), y)
    else:
        y = holdout.target
        m = _stable_regression_meta(meta_x, y)
        model = BlendedModel(ids, bases, [m], task, feature_names=train.names)
        blended = blend_predict(model, holdout)
        diagnostics["holdout_sse"] = float(np.sum((blended - y) ** 2))
        diagnostics["base_holdout_sse"] = [
            float(np.sum((meta_x[:, i] - y) ** 2)) for i in range(n_bases)
        ]
    model.diagnostics = diagnostics

    if retrain_on is not None:
        if retrain_on.names != train.names:
            raise BlendError("retrain matrix schema differs from the training schema")
        model.bases = [fit(retrain_on) for _, fit in base_fitters]
    return model


def _stable_regression_meta(meta_x: np.ndarray, y: np.ndarray) -> linear.LinearModel:
    """OLS meta-learner with a sensitivity guard.

    A base whose holdout predictions are nearly constant is close to
    collinear with the intercept; exact OLS then pairs a huge weight with a
    compensating intercept, and when the bases are refit on the union their
    predictions drift slightly and the blend explodes. Weights are therefore
    bounded: total output sensitivity (sum of |weight| times a floored
    feature spread) must stay within a few target spreads. Exact OLS is kept
    whenever it already satisfies the bound; otherwise the ridge escalates,
    and if the stabilized blend would score worse on the holdout than the
    best single base, that base is used verbatim (which keeps the
    holdout-SSE optimality bound intact).
    """
    m = linear.ols_fit(meta_x, y)
    std_y = max(float(y.std()), 1e-12)
    spread = np.maximum(meta_x.std(axis=0), 0.05 * std_y)

    def sensitivity(model):
        return float(np.sum(np.abs(model.weights) * spread))

    if sensitivity(m) <= 3.0 * std_y:
        return m
    n, p = meta_x.shape
    lam = 1e-8 * float(np.trace(meta_x.T @ meta_x)) / max(p, 1)
    for _ in range(12):
        lam *= 100.0
        m = linear.ols_fit(meta_x, y, ridge=lam)
        if sensitivity(m) <= 3.0 * std_y:
            break
    base_sse = [float(np.sum((meta_x[:, i] - y) ** 2)) for i in range(p)]
    blend_sse = float(np.sum((meta_x @ m.weights + m.intercept - y) ** 2))
    if blend_sse > min(base_sse):
        best = int(np.argmin(base_sse))
        w = np.zeros(p)
        w[best] = 1.0
        m = linear.LinearModel(weights=w, intercept=0.0, family="ols")
    return m


def blend_predict(model: BlendedModel, matrix: FeatureMatrix) -> np.ndarray:
    """Feed base predictions through the meta-learner.

    Classification output is renormalized to a probability vector.
    """
    if model.feature_names is not None and tuple(matrix.names) != tuple(model.feature_names):
        raise trees.SchemaMismatchError(model.feature_names, matrix.names)
    meta_x = _base_feature_block(model.bases, matrix)
    if model.task == "classification":
        scores = np.column_stack(
            [linear.predict_linear(m, meta_x) for m in model.meta]
        )
        total = scores.sum(axis=1, keepdims=True)
        flat = total[:, 0] <= 0
        if flat.any():
            scores[flat] = 1.0 / model.n_classes
            total[flat] = 1.0
        return scores / total
    return linear.predict_linear(model.meta[0], meta_x)


@dataclass
class CandidateScore:
    model_id: str
    score: float  # holdout AUC (classification) or MAE (regression)


def rank_and_blend(
    train: FeatureMatrix,
    holdout: FeatureMatrix,
    candidates: Sequence,
    task: str,
    top_ks: Sequence = (2, 3, 4, 5),
    retrain_on: Optional[FeatureMatrix] = None,
):
    """Model-selection sweep: rank candidates on the holdout split, blend the
    top k for each k, and keep the best of the singles and blends.

    Classification ranks by holdout AUC (higher is better); regression by
    holdout MAE (lower is better). Returns (winner, table) where the table
    lists every candidate and blend with its holdout score.
    """
    if len(candidates) < 2:
        raise BlendError("ranking needs at least two candidate models")
    fitted = [(bid, fit, fit(train)) for bid, fit in candidates]
    scored = []
    for bid, fit, model in fitted:
        pred = predict_model(model, holdout)
        if task == "classification":
            score = multiclass_auc(pred, holdout.target.astype(np.int64))
        else:
            score = regression_metrics(pred, holdout.target).mae
        scored.append((bid, fit, model, score))
    reverse = task == "classification"
    scored.sort(key=lambda t: (-t[3] if reverse else t[3], t[0]))
    table = [CandidateScore(bid, score) for bid, _, _, score in scored]

    best_model = scored[0][2]
    best_score = scored[0][3]
    best_label = scored[0][0]
    for k in top_ks:
        if k > len(scored):
            continue
        subset = [(bid, fit) for bid, fit, _, _ in scored[:k]]
        blended = blend_fit(train, holdout, subset, task=task)
        pred = blend_predict(blended, holdout)
        if task == "classification":
            s = multiclass_auc(pred, holdout.target.astype(np.int64))
            better = s > best_score
        else:
            s = regression_metrics(pred, holdout.target).mae
            better = s < best_score
        label = "blend_top%d" % k
        table.append(CandidateScore(label, s))
        if better:
            best_model, best_score, best_label = blended, s, label
    if retrain_on is not None:
        if isinstance(best_model, BlendedModel):
            subset = [(bid, fit) for bid, fit, _, _ in scored[: len(best_model.base_ids)]]
            best_model.bases = [fit(retrain_on) for _, fit in subset]
        else:
            for bid, fit, model, _ in scored:
                if model is best_model:
                    best_model = fit(retrain_on)
                    break
    return best_model, best_label, table
