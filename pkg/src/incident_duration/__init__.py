"""Two-stage traffic incident duration prediction.

A supervised classifier assigns an incident to a short / medium / long
duration band; a band-specific blended regressor then predicts the duration
in minutes. The package also carries the surrounding machinery: synthetic
data generation, preprocessing, evaluation metrics, an unsupervised
comparison harness, model persistence, a CLI, and an HTTP service.
"""

from .schema import (
    DurationBand,
    FeatureMatrix,
    IncidentRecord,
    band_of,
    derive_temporal,
    encode,
    feature_set,
    read_incidents_csv,
    write_incidents_csv,
)
from .preprocess import (
    BoxCoxTransform,
    SplitSpec,
    boxcox_fit,
    correlation_filter,
    impute,
    smote,
    split_records,
)
from .trees import ForestConfig, GbmConfig, cart_fit, forest_fit, gbm_fit, predict
from .linear import TobitLimits, huber_fit, logistic_fit, ols_fit, predict_linear, tobit_fit
from .blend import blend_fit, blend_predict, rank_and_blend
from .cluster import elbow_scan, kmeans_fit, silhouette
from .metrics import confusion, multiclass_auc, precision_recall_accuracy, regression_metrics, roc_auc
from .pipeline import (
    FrameworkModel,
    TrainConfig,
    compare_frameworks,
    evaluate_framework,
    predict_batch,
    predict_incident,
    train_framework,
)
from .artifact import load_model, save_model
from .synthgen import GeneratorConfig, generate, generate_to_csv

__version__ = "1.0.0"
