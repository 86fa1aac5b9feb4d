"""End-to-end framework: preprocessing, band classification, enrichment,
band-routed regression, evaluation, and the comparison harness.

Training follows the train / holdout / validation protocol: base models fit
on the training split, blending meta-learners fit on holdout predictions,
and (by default) bases refit on the union before the model is persisted.
The classifier trains on SMOTE-balanced data; regressors train per band on
box-cox transformed durations and predictions return to the minutes scale,
floored at one minute.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import blend, cluster, linear, trees
from .enrichment import EnrichmentTable
from .metrics import (
    EvaluationReport,
    confusion,
    multiclass_auc_detail,
    precision_recall_accuracy,
    regression_metrics,
)
from .preprocess import (
    BoxCoxTransform,
    Imputer,
    SplitSpec,
    boxcox_fit,
    correlation_filter,
    smote,
    split_records,
)
from .schema import (
    BAND_LABELS,
    DurationBand,
    Encoder,
    FeatureMatrix,
    IncidentRecord,
    band_of,
    feature_set,
)


class PipelineError(ValueError):
    pass


MODEL_VERSION = "incident-duration/1"
_BAND_KEYS = ("short", "medium", "long")


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run (with the seed and data)."""

    feature_set: str = "fs2"  # classifier inputs; regressors always use fs2
    seed: int = 7
    train_fraction: float = 0.70
    test_fraction: float = 0.15
    validation_fraction: float = 0.15
    smote_k: int = 5
    correlation_threshold: float = 0.4
    n_trees: int = 100
    forest_max_features: float = 0.33
    max_depth: int = 8
    min_samples_leaf: int = 5
    classifier_gbm_rounds: int = 60
    regressor_gbm_rounds: int = 150
    gbm_learning_rate: float = 0.1
    max_leaves: int = 31
    classifier_bases: tuple = ("rf", "extra_trees", "gbm_leaf")
    band_regressors: tuple = (
        ("rf", "gbm_ts"),  # short
        ("rf", "huber"),  # medium
        ("gbm_level",),  # long
    )
    retrain_on_union: bool = True
    enrichment_bucket: float = 0.5
    detour_overhead_minutes: float = 30.0
    cluster_k: int = 4

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.test_fraction, self.validation_fraction, seed=self.seed)

    def to_state(self) -> dict:
        return {
            "feature_set": self.feature_set,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "test_fraction": self.test_fraction,
            "validation_fraction": self.validation_fraction,
            "smote_k": self.smote_k,
            "correlation_threshold": self.correlation_threshold,
            "n_trees": self.n_trees,
            "forest_max_features": self.forest_max_features,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "classifier_gbm_rounds": self.classifier_gbm_rounds,
            "regressor_gbm_rounds": self.regressor_gbm_rounds,
            "gbm_learning_rate": self.gbm_learning_rate,
            "max_leaves": self.max_leaves,
            "classifier_bases": list(self.classifier_bases),
            "band_regressors": [list(b) for b in self.band_regressors],
            "retrain_on_union": self.retrain_on_union,
            "enrichment_bucket": self.enrichment_bucket,
            "detour_overhead_minutes": self.detour_overhead_minutes,
            "cluster_k": self.cluster_k,
        }

    @classmethod
    def from_state(cls, s: dict) -> "TrainConfig":
        s = dict(s)
        s["classifier_bases"] = tuple(s["classifier_bases"])
        s["band_regressors"] = tuple(tuple(b) for b in s["band_regressors"])
        return cls(**s)


@dataclass
class PreprocessState:
    """Fitted per-feature-set preprocessing: encoder, imputer, dropped columns."""

    encoder: Encoder
    imputer: Imputer
    dropped: list

    def prepare(self, records: Sequence[IncidentRecord], table: Optional[EnrichmentTable]) -> FeatureMatrix:
        if table is not None:
            records = [table.enrich(r) for r in records]
        m = self.encoder.transform(records, strict=False)
        m = self.imputer.transform(m)
        return m.drop_columns(self.dropped)

    def to_state(self) -> dict:
        return {
            "encoder": self.encoder.to_state(),
            "imputer": self.imputer.to_state(),
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_state(cls, s: dict) -> "PreprocessState":
        return cls(
            encoder=Encoder.from_state(s["encoder"]),
            imputer=Imputer.from_state(s["imputer"]),
            dropped=list(s["dropped"]),
        )


@dataclass(frozen=True)
class Prediction:
    band: DurationBand
    band_probabilities: tuple
    duration_minutes: float
    model_version: str


@dataclass
class FrameworkModel:
    version: str
    seed: int
    feature_set_kind: str
    classifier_state: PreprocessState
    regressor_state: PreprocessState
    boxcox: BoxCoxTransform
    classifier: blend.BlendedModel
    regressors: dict  # band value (0/1/2) -> model
    enrichment: EnrichmentTable
    detour_overhead_minutes: float
    config: TrainConfig

    def to_state(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "feature_set": self.feature_set_kind,
            "preprocessing": {
                "classifier": self.classifier_state.to_state(),
                "regressor": self.regressor_state.to_state(),
                "boxcox": self.boxcox.to_state(),
            },
            "classifier": self.classifier.to_state(),
            "regressors": {str(b): blend._model_state(m) for b, m in self.regressors.items()},
            "enrichment": self.enrichment.to_state(),
            "detour_overhead_minutes": self.detour_overhead_minutes,
            "config": self.config.to_state(),
        }

    @classmethod
    def from_state(cls, s: dict) -> "FrameworkModel":
        return cls(
            version=s["version"],
            seed=int(s["seed"]),
            feature_set_kind=s["feature_set"],
            classifier_state=PreprocessState.from_state(s["preprocessing"]["classifier"]),
            regressor_state=PreprocessState.from_state(s["preprocessing"]["regressor"]),
            boxcox=BoxCoxTransform.from_state(s["preprocessing"]["boxcox"]),
            classifier=blend.BlendedModel.from_state(s["classifier"]),
            regressors={int(b): blend._model_from_state(m) for b, m in s["regressors"].items()},
            enrichment=EnrichmentTable.from_state(s["enrichment"]),
            detour_overhead_minutes=float(s["detour_overhead_minutes"]),
            config=TrainConfig.from_state(s["config"]),
        )


# --- learner registry --------------------------------------------------------


def _base_fitter(name: str, config: TrainConfig, task: str, seed: int) -> Callable:
    forest_cfg = trees.ForestConfig(
        n_estimators=config.n_trees,
        max_depth=config.max_depth,
        min_samples_leaf=config.min_samples_leaf,
        max_features=config.forest_max_features,
        seed=seed,
    )
    rounds = config.classifier_gbm_rounds if task == "classification" else config.regressor_gbm_rounds
    loss = "logistic" if task == "classification" else "squared"
    if name == "rf":
        return lambda m: trees.forest_fit(m, m.target, forest_cfg, mode="rf", task=task)
    if name == "extra_trees":
        return lambda m: trees.forest_fit(m, m.target, forest_cfg, mode="extra_trees", task=task)
    if name == "cart":
        return lambda m: trees.cart_fit(m, m.target, forest_cfg, task=task)
    if name in ("gbm_leaf", "gbm_level", "gbm_ts"):
        gbm_cfg = trees.GbmConfig(
            n_rounds=rounds,
            learning_rate=config.gbm_learning_rate,
            growth="leaf_wise" if name == "gbm_leaf" else "level_wise",
            max_leaves=config.max_leaves,
            max_depth=config.max_depth,
            loss=loss,
            categorical_encoding="target_statistic" if name == "gbm_ts" else "onehot_passthrough",
            min_samples_leaf=config.min_samples_leaf,
            seed=seed,
        )
        return lambda m: trees.gbm_fit(m, m.target, gbm_cfg, task=task)
    if task == "classification":
        raise PipelineError(f"unknown classifier base {name!r}")
    if name == "huber":
        return lambda m: linear.huber_fit(m, m.target)
    if name == "ols":
        return lambda m: linear.ols_fit(m, m.target)
    if name == "tobit":
        return lambda m: linear.tobit_fit(m, m.target, linear.TobitLimits(lower=0.0))
    raise PipelineError(f"unknown regressor base {name!r}")


def _fitters(names: Sequence, config: TrainConfig, task: str) -> list:
    return [(name, _base_fitter(name, config, task, seed=config.seed + 101 * (i + 1))) for i, name in enumerate(names)]


# --- training -----------------------------------------------------------------


def _require_bands(records: Sequence[IncidentRecord]):
    present = {r.band for r in records if r.duration_minutes is not None}
    missing = [b.name for b in DurationBand if b not in present]
    if missing:
        raise PipelineError(f"training data is missing duration bands: {missing}")


def _fit_state(records: Sequence[IncidentRecord], fs_kind: str, threshold: float) -> tuple:
    enc = Encoder(feature_set(fs_kind), add_unknown=True).fit(records)
    m = enc.transform(records, strict=False)
    imp = Imputer().fit(m)
    m = imp.transform(m)
    filtered, dropped = correlation_filter(m, threshold)
    return PreprocessState(encoder=enc, imputer=imp, dropped=dropped), filtered


def _bands_vector(records: Sequence[IncidentRecord]) -> np.ndarray:
    return np.array([int(band_of(r.duration_minutes)) for r in records], dtype=np.float64)


def _durations_vector(records: Sequence[IncidentRecord]) -> np.ndarray:
    return np.array([r.duration_minutes for r in records], dtype=np.float64)


def train_framework(records: Sequence[IncidentRecord], config: TrainConfig = TrainConfig()) -> FrameworkModel:
    """Train the full two-stage framework.

    Requires at least 500 labeled records covering all three bands.
    """
    labeled = [r for r in records if r.duration_minutes is not None]
    if len(labeled) < 500:
        raise PipelineError(f"need at least 500 labeled records, got {len(labeled)}")
    _require_bands(labeled)

    train, holdout, valid = split_records(labeled, config.split_spec())
    table = EnrichmentTable.build_from_records(train, config.enrichment_bucket)
    enriched_train = [table.enrich(r) for r in train]

    reg_state, reg_train_matrix = _fit_state(enriched_train, "fs2", config.correlation_threshold)
    if feature_set(config.feature_set).kind == "FS2_Full":
        cls_state, cls_train_matrix = reg_state, reg_train_matrix
    else:
        cls_state, cls_train_matrix = _fit_state(enriched_train, config.feature_set, config.correlation_threshold)

    transform = boxcox_fit(_durations_vector(train))

    # classification stage: SMOTE-balanced training data, meta on the holdout
    cls_train = cls_train_matrix.with_target(_bands_vector(train))
    cls_train_bal = smote(cls_train, k=config.smote_k, seed=config.seed)
    cls_holdout = cls_state.prepare(holdout, table).with_target(_bands_vector(holdout))
    retrain_cls = None
    if config.retrain_on_union:
        union = train + holdout
        union_m = cls_state.prepare(union, table).with_target(_bands_vector(union))
        retrain_cls = smote(union_m, k=config.smote_k, seed=config.seed)
    classifier = blend.blend_fit(
        cls_train_bal,
        cls_holdout,
        _fitters(config.classifier_bases, config, "classification"),
        task="classification",
        retrain_on=retrain_cls,
    )

    # regression stage: per-band models on transformed durations
    reg_train = reg_train_matrix.with_target(transform.apply(_durations_vector(train)))
    reg_holdout = reg_state.prepare(holdout, table).with_target(transform.apply(_durations_vector(holdout)))
    train_bands = _bands_vector(train).astype(np.int64)
    holdout_bands = _bands_vector(holdout).astype(np.int64)
    union_matrix = None
    union_bands = None
    if config.retrain_on_union:
        union = train + holdout
        union_matrix = reg_state.prepare(union, table).with_target(transform.apply(_durations_vector(union)))
        union_bands = np.concatenate([train_bands, holdout_bands])

    regressors: dict = {}
    for b in (0, 1, 2):
        names = config.band_regressors[b]
        fitters = _fitters(names, config, "regression")
        tb = reg_train.take_rows(np.flatnonzero(train_bands == b))
        hb = reg_holdout.take_rows(np.flatnonzero(holdout_bands == b))
        ub = None
        if union_matrix is not None:
            ub = union_matrix.take_rows(np.flatnonzero(union_bands == b))
        if len(fitters) == 1:
            fit = fitters[0][1]
            regressors[b] = fit(ub if ub is not None else tb)
        else:
            regressors[b] = blend.blend_fit(tb, hb, fitters, task="regression", retrain_on=ub)

    return FrameworkModel(
        version=MODEL_VERSION,
        seed=config.seed,
        feature_set_kind=feature_set(config.feature_set).kind,
        classifier_state=cls_state,
        regressor_state=reg_state,
        boxcox=transform,
        classifier=classifier,
        regressors=regressors,
        enrichment=table,
        detour_overhead_minutes=config.detour_overhead_minutes,
        config=config,
    )


# --- prediction ---------------------------------------------------------------


def _route_and_predict(model: FrameworkModel, reg_matrix: FeatureMatrix, band_idx: np.ndarray) -> np.ndarray:
    """Regress each row with its band's model; returns minutes floored at 1."""
    out = np.empty(reg_matrix.n_rows)
    for b in (0, 1, 2):
        rows = np.flatnonzero(band_idx == b)
        if rows.size == 0:
            continue
        t = blend.predict_model(model.regressors[b], reg_matrix.take_rows(rows))
        out[rows] = model.boxcox.invert(t)
    return np.maximum(out, 1.0)


def predict_batch(model: FrameworkModel, records: Sequence[IncidentRecord]) -> list:
    """Classify, route, regress, and invert the transform for many records."""
    if not records:
        return []
    cls_m = model.classifier_state.prepare(records, model.enrichment)
    probs = blend.blend_predict(model.classifier, cls_m)
    band_idx = probs.argmax(axis=1)
    reg_m = model.regressor_state.prepare(records, model.enrichment)
    minutes = _route_and_predict(model, reg_m, band_idx)
    return [
        Prediction(
            band=DurationBand(int(band_idx[i])),
            band_probabilities=tuple(float(v) for v in probs[i]),
            duration_minutes=float(minutes[i]),
            model_version=model.version,
        )
        for i in range(len(records))
    ]


def predict_incident(model: FrameworkModel, record: IncidentRecord) -> Prediction:
    """Single-record prediction (see predict_batch)."""
    return predict_batch(model, [record])[0]


# --- evaluation ---------------------------------------------------------------


def _per_band_regression(pred_minutes: np.ndarray, true_minutes: np.ndarray, true_bands: np.ndarray) -> dict:
    out = {}
    for b in (0, 1, 2):
        rows = np.flatnonzero(true_bands == b)
        if rows.size:
            out[_BAND_KEYS[b]] = regression_metrics(pred_minutes[rows], true_minutes[rows])
    out["overall"] = regression_metrics(pred_minutes, true_minutes)
    return out


def evaluate_framework(model: FrameworkModel, records: Sequence[IncidentRecord]):
    """Score classification and regression on labeled records.

    Regression errors are reported on the minutes scale under two routing
    rules: ``sup_mc`` routes each record by its predicted band (deployment
    behavior, misclassification included), ``oracle`` routes by the true
    band. Returns (EvaluationReport, report dict).
    """
    labeled = [r for r in records if r.duration_minutes is not None]
    if not labeled:
        raise PipelineError("evaluation needs labeled records")
    true_minutes = _durations_vector(labeled)
    true_bands = _bands_vector(labeled).astype(np.int64)

    cls_m = model.classifier_state.prepare(labeled, model.enrichment)
    probs = blend.blend_predict(model.classifier, cls_m)
    pred_bands = probs.argmax(axis=1)

    cm = confusion(pred_bands, true_bands)
    scores = precision_recall_accuracy(cm)
    auc = multiclass_auc_detail(probs, true_bands)

    reg_m = model.regressor_state.prepare(labeled, model.enrichment)
    sup_mc_minutes = _route_and_predict(model, reg_m, pred_bands)
    oracle_minutes = _route_and_predict(model, reg_m, true_bands)

    sup_mc = _per_band_regression(sup_mc_minutes, true_minutes, true_bands)
    oracle = _per_band_regression(oracle_minutes, true_minutes, true_bands)

    report = EvaluationReport(
        auc_macro=auc.macro,
        accuracy=scores.accuracy,
        precision_macro=scores.precision_macro,
        recall_macro=scores.recall_macro,
        per_class_precision={BAND_LABELS[i]: float(scores.precision[i]) for i in range(3)},
        per_class_recall={BAND_LABELS[i]: float(scores.recall[i]) for i in range(3)},
        confusion=cm,
        regression_overall=sup_mc["overall"],
        regression_per_band={k: v for k, v in sup_mc.items() if k != "overall"},
        flags=scores.zero_division_flags + [f"auc_excluded_class_{c}" for c in auc.excluded],
    )
    tree_dict = {
        "classification": {
            "auc_macro": auc.macro,
            "accuracy": scores.accuracy,
            "precision_macro": scores.precision_macro,
            "recall_macro": scores.recall_macro,
        },
        "regression": {
            "sup_mc": _metrics_tree(sup_mc),
            "oracle": _metrics_tree(oracle),
        },
    }
    for i, pl in enumerate(BAND_LABELS):
        tree_dict["classification"][f"precision.{pl}"] = float(scores.precision[i])
        tree_dict["classification"][f"recall.{pl}"] = float(scores.recall[i])
        for j, ol in enumerate(BAND_LABELS):
            tree_dict["classification"][f"confusion.pred_{pl}.obs_{ol}"] = int(cm.counts[i, j])
    return report, tree_dict


def _metrics_tree(per_band: dict) -> dict:
    return {
        key: {"mae": rm.mae, "mape": rm.mape, "rmse": rm.rmse}
        for key, rm in per_band.items()
    }


# --- comparison harness --------------------------------------------------------


def _mae_rows(pred_minutes, true_minutes, true_bands) -> dict:
    rows = {}
    for b in (0, 1, 2):
        sel = np.flatnonzero(true_bands == b)
        rows[_BAND_KEYS[b]] = float(np.mean(np.abs(pred_minutes[sel] - true_minutes[sel]))) if sel.size else float("nan")
    rows["overall"] = float(np.mean(np.abs(pred_minutes - true_minutes)))
    return rows


def compare_frameworks(
    records: Sequence[IncidentRecord],
    config: TrainConfig = TrainConfig(),
    framework: Optional[FrameworkModel] = None,
) -> dict:
    """Run the five-way comparison and return the MAE tables.

    Frameworks: the supervised two-stage model under predicted-band routing
    (sup_mc) and true-band routing (with_class); k-means clusters with
    per-cluster forests (unsup); the classifier with per-band censored
    linear fits (tobit_mc); a single forest with no classification
    (without_class); and a single censored linear fit (tobit_without_class).
    MAE is reported per true band on the test and validation splits.
    """
    labeled = [r for r in records if r.duration_minutes is not None]
    if framework is None:
        framework = train_framework(labeled, config)
    train, holdout, valid = split_records(labeled, config.split_spec())
    table = framework.enrichment
    transform = framework.boxcox
    state = framework.regressor_state

    fit_pool = train + holdout  # models in the harness train on train+holdout
    pool_matrix = state.prepare(fit_pool, table).with_target(transform.apply(_durations_vector(fit_pool)))
    pool_bands = _bands_vector(fit_pool).astype(np.int64)

    # per-band censored fits and the unclassified baselines
    tobit_limits = linear.TobitLimits(lower=0.0)
    tobit_single = linear.tobit_fit(pool_matrix, pool_matrix.target, tobit_limits)
    tobit_by_band = {}
    for b in (0, 1, 2):
        rows = np.flatnonzero(pool_bands == b)
        if rows.size <= pool_matrix.n_cols + 1:
            # band too thin for its own censored fit: use the pooled one
            tobit_by_band[b] = tobit_single
            continue
        tobit_by_band[b] = linear.tobit_fit(pool_matrix.take_rows(rows), pool_matrix.target[rows], tobit_limits)
    rf_cfg = trees.ForestConfig(
        n_estimators=config.n_trees,
        max_depth=config.max_depth,
        min_samples_leaf=config.min_samples_leaf,
        max_features=config.forest_max_features,
        seed=config.seed + 7,
    )
    rf_single = trees.forest_fit(pool_matrix, pool_matrix.target, rf_cfg, mode="rf", task="regression")

    # unsupervised route: k-means clusters with one forest per cluster
    scaler = cluster.FeatureScaler.fit(pool_matrix)
    scaled_pool = scaler.transform(pool_matrix)
    km = cluster.kmeans_fit(scaled_pool, config.cluster_k, seed=config.seed)
    pool_clusters = cluster.assign_clusters(km, scaled_pool)
    cluster_models = {}
    min_cluster = max(30, 4 * config.min_samples_leaf)
    for c in range(config.cluster_k):
        rows = np.flatnonzero(pool_clusters == c)
        if rows.size < min_cluster:
            cluster_models[c] = rf_single  # tiny cluster: fall back to the pooled forest
            continue
        cfg_c = trees.ForestConfig(
            n_estimators=config.n_trees,
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            max_features=config.forest_max_features,
            seed=config.seed + 13 + c,
        )
        cluster_models[c] = trees.forest_fit(
            pool_matrix.take_rows(rows), pool_matrix.target[rows], cfg_c, mode="rf", task="regression"
        )

    silhouette_std = cluster.silhouette(scaled_pool, pool_clusters)
    silhouette_raw = cluster.silhouette(pool_matrix.rows, pool_clusters)
    elbow = cluster.elbow_scan(scaled_pool, range(2, 9), seed=config.seed, n_restarts=3)

    out = {
        "clustering": {
            "k": config.cluster_k,
            "silhouette_standardized": silhouette_std,
            "silhouette_raw": silhouette_raw,
            "elbow_k": cluster.pick_elbow(elbow),
            "inertia": {f"k{k}": v for k, v in elbow},
        }
    }

    for split_name, split_records_ in (("test", holdout), ("validation", valid)):
        true_minutes = _durations_vector(split_records_)
        true_bands = _bands_vector(split_records_).astype(np.int64)
        reg_m = state.prepare(split_records_, table)
        cls_m = framework.classifier_state.prepare(split_records_, table)
        pred_bands = blend.blend_predict(framework.classifier, cls_m).argmax(axis=1)

        sup_mc_minutes = _route_and_predict(framework, reg_m, pred_bands)
        with_class_minutes = _route_and_predict(framework, reg_m, true_bands)

        tobit_mc_minutes = np.empty(len(split_records_))
        for b in (0, 1, 2):
            rows = np.flatnonzero(pred_bands == b)
            if rows.size:
                t = linear.predict_linear(tobit_by_band[b], reg_m.take_rows(rows), observed_scale=True)
                tobit_mc_minutes[rows] = transform.invert(t)
        tobit_mc_minutes = np.maximum(tobit_mc_minutes, 1.0)

        unsup_minutes = np.empty(len(split_records_))
        split_clusters = cluster.assign_clusters(km, scaler.transform(reg_m))
        for c in range(config.cluster_k):
            rows = np.flatnonzero(split_clusters == c)
            if rows.size:
                t = trees.predict(cluster_models[c], reg_m.take_rows(rows))
                unsup_minutes[rows] = transform.invert(t)
        unsup_minutes = np.maximum(unsup_minutes, 1.0)

        without_minutes = np.maximum(transform.invert(trees.predict(rf_single, reg_m)), 1.0)
        tobit_without_minutes = np.maximum(
            transform.invert(linear.predict_linear(tobit_single, reg_m, observed_scale=True)), 1.0
        )

        split_out = {
            "sup_mc": _mae_rows(sup_mc_minutes, true_minutes, true_bands),
            "with_class": _mae_rows(with_class_minutes, true_minutes, true_bands),
            "tobit_mc": _mae_rows(tobit_mc_minutes, true_minutes, true_bands),
            "unsup": _mae_rows(unsup_minutes, true_minutes, true_bands),
            "without_class": _mae_rows(without_minutes, true_minutes, true_bands),
            "tobit_without_class": _mae_rows(tobit_without_minutes, true_minutes, true_bands),
        }
        reductions = {}
        for band in _BAND_KEYS + ("overall",):
            base = split_out["without_class"][band]
            ours = split_out["sup_mc"][band]
            reductions[band] = float("nan") if base == 0 else 100.0 * (base - ours) / base
        split_out["reduction_pct"] = reductions
        out[split_name] = split_out
    return out
