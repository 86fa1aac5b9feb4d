"""Acceptance suite.

One test per acceptance criterion, each printing a PASS/FAIL line (run with
``pytest -s tests/test_acceptance.py`` to see them stream). Tolerances and
time bounds are pinned in the assertions. The end-to-end criteria share one
full-size training run through module fixtures; its wall time is budgeted
inside the relevant criteria.
"""

import time

import numpy as np
import pytest

from incident_duration import blend, cluster, linear, trees
from incident_duration.artifact import load_model, save_model
from incident_duration.metrics import roc_auc
from incident_duration.pipeline import (
    TrainConfig,
    compare_frameworks,
    evaluate_framework,
    predict_batch,
    train_framework,
)
from incident_duration.preprocess import boxcox_fit, smote, split_records
from incident_duration.schema import FeatureColumn, FeatureMatrix
from incident_duration.synthgen import GeneratorConfig, generate


def check(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
    print(line, flush=True)
    assert ok, line


def numeric_matrix(rows, target=None):
    rows = np.asarray(rows, dtype=np.float64)
    cols = tuple(FeatureColumn(f"c{i}", "numeric", f"c{i}") for i in range(rows.shape[1]))
    return FeatureMatrix(cols, rows, target)


# --- shared full-size run ----------------------------------------------------


@pytest.fixture(scope="module")
def e2e():
    """Default synthetic dataset, trained framework, evaluations, comparison."""
    t0 = time.perf_counter()
    records, _ = generate(GeneratorConfig())
    config = TrainConfig()
    model = train_framework(records, config)
    train, holdout, valid = split_records(records, config.split_spec())
    _, test_tree = evaluate_framework(model, holdout)
    _, valid_tree = evaluate_framework(model, valid)
    train_elapsed = time.perf_counter() - t0
    t1 = time.perf_counter()
    comparison = compare_frameworks(records, config, framework=model)
    compare_elapsed = time.perf_counter() - t1
    return {
        "records": records,
        "config": config,
        "model": model,
        "splits": (train, holdout, valid),
        "test_tree": test_tree,
        "valid_tree": valid_tree,
        "comparison": comparison,
        "train_elapsed": train_elapsed,
        "compare_elapsed": compare_elapsed,
    }


# --- criteria ----------------------------------------------------------------


def test_metric_oracle_equivalence():
    """roc_auc equals brute-force pairwise concordance exactly (ties = 1/2)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    mismatches = 0
    for trial in range(500):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[rng.integers(0, n)] = 1 - labels[0]
        if trial % 3 == 0:
            scores = rng.integers(0, 8, size=n).astype(float)  # heavy ties
        elif trial % 3 == 1:
            scores = rng.normal(size=n)
        else:
            scores = np.round(rng.normal(size=n), 1)
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        brute = float((pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum())
        brute /= len(pos) * len(neg)
        if roc_auc(scores, labels) != brute:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    check(
        "metric oracle equivalence",
        mismatches == 0 and elapsed < 10.0,
        f"mismatches={mismatches}/500, {elapsed:.1f}s (limit 10s)",
    )


def test_tobit_reduces_to_ols_without_censoring():
    """Unbounded limits: coefficients match OLS within 1e-4 absolute."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    x = rng.normal(size=(500, 4))
    y = x @ np.array([1.2, -0.4, 0.0, 2.0]) + 0.7 * rng.normal(size=500)
    tob = linear.tobit_fit(x, y, linear.TobitLimits())
    ols = linear.ols_fit(x, y)
    dev = max(
        float(np.max(np.abs(tob.weights - ols.weights))),
        abs(tob.intercept - ols.intercept),
    )
    sigma_dev = abs(tob.scale_sigma - float(np.std(y - (x @ ols.weights + ols.intercept))))
    elapsed = time.perf_counter() - t0
    check(
        "tobit reduction to OLS",
        dev < 1e-4 and sigma_dev < 1e-4 and elapsed < 5.0,
        f"coef dev={dev:.2e}, sigma dev={sigma_dev:.2e}, {elapsed:.1f}s (limit 5s)",
    )


def test_gradient_checks():
    """Analytic gradients vs central differences, 20 points per family."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    x = rng.normal(size=(80, 3))
    y_reg = x @ np.array([0.5, -1.0, 0.8]) + rng.normal(size=80)
    y_bin = (y_reg > 0).astype(float)
    y_cens = np.clip(y_reg, -0.5, 2.5)
    limits = linear.TobitLimits(lower=-0.5, upper=2.5)

    def fd(func, theta, eps=1e-6):
        out = np.zeros_like(theta)
        for i in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[i] += eps
            dn[i] -= eps
            out[i] = (func(up) - func(dn)) / (2 * eps)
        return out

    worst = 0.0
    for _ in range(20):
        th = rng.normal(scale=0.7, size=4)
        _, g = linear.logistic_nll_grad(th, x, y_bin)
        worst = max(worst, np.linalg.norm(g - fd(lambda t: linear.logistic_nll_grad(t, x, y_bin)[0], th)) / max(np.linalg.norm(g), 1e-12))
    for _ in range(20):
        th = rng.normal(scale=0.7, size=4)
        _, g = linear.huber_objective_grad(th, x, y_reg, 1.1)
        worst = max(worst, np.linalg.norm(g - fd(lambda t: linear.huber_objective_grad(t, x, y_reg, 1.1)[0], th)) / max(np.linalg.norm(g), 1e-12))
    for _ in range(20):
        th = np.concatenate([rng.normal(scale=0.5, size=4), [rng.normal(scale=0.3)]])
        _, g = linear.tobit_nll_grad(th, x, y_cens, limits)
        worst = max(worst, np.linalg.norm(g - fd(lambda t: linear.tobit_nll_grad(t, x, y_cens, limits)[0], th)) / max(np.linalg.norm(g), 1e-12))
    elapsed = time.perf_counter() - t0
    check(
        "gradient checks (logistic, huber, tobit)",
        worst < 1e-5 and elapsed < 10.0,
        f"worst rel err={worst:.2e} (limit 1e-5), {elapsed:.1f}s (limit 10s)",
    )


def test_degenerate_forest_identity():
    """1-tree, no-bootstrap, all-features forest is bit-identical to CART."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    identical = True
    for trial in range(10):
        n = int(rng.integers(60, 250))
        p = int(rng.integers(2, 7))
        x = rng.normal(size=(n, p))
        if trial % 2 == 0:
            y = rng.integers(0, 3, size=n)
            task = "classification"
        else:
            y = rng.normal(size=n)
            task = "regression"
        f = trees.forest_fit(
            x, y, trees.ForestConfig(n_estimators=1, bootstrap=False, max_features="all", seed=trial), mode="rf", task=task
        )
        c = trees.cart_fit(x, y, trees.ForestConfig(), task=task)
        if not np.array_equal(trees.predict(f, x), trees.predict(c, x)):
            identical = False
    elapsed = time.perf_counter() - t0
    check(
        "degenerate forest identity",
        identical and elapsed < 10.0,
        f"bit-identical on 10 datasets, {elapsed:.1f}s (limit 10s)",
    )


def test_gbm_training_sse_monotone():
    """Squared-loss training SSE is nonincreasing across 200 rounds, exactly."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    x = rng.normal(size=(600, 5))
    y = x @ rng.normal(size=5) + rng.normal(size=600)
    cfg = trees.GbmConfig(n_rounds=200, learning_rate=0.1, growth="leaf_wise", max_leaves=31)
    model = trees.gbm_fit(x, y, cfg, task="regression")
    score = np.full(600, model.initial[0])
    prev = float(np.sum((y - score) ** 2))
    violations = 0
    for tree in model.trees[0]:
        score = score + cfg.learning_rate * trees.predict(tree, x)
        sse = float(np.sum((y - score) ** 2))
        if sse > prev:
            violations += 1
        prev = sse
    elapsed = time.perf_counter() - t0
    check(
        "gbm training SSE monotonicity",
        violations == 0 and elapsed < 30.0,
        f"violations={violations}/200 rounds (exact), {elapsed:.1f}s (limit 30s)",
    )


def test_blending_optimality():
    """OLS-meta blend beats or ties the best single base on its holdout."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    failures = 0
    for trial in range(20):
        n = int(rng.integers(160, 320))
        p = int(rng.integers(3, 6))
        x = rng.normal(size=(n, p))
        y = x @ rng.normal(size=p) + rng.normal(size=n) * rng.uniform(0.3, 1.5)
        half = n // 2
        train = numeric_matrix(x[:half], y[:half])
        holdout = numeric_matrix(x[half:], y[half:])
        seed = 1000 + trial
        fitters = [
            ("rf", lambda m, s=seed: trees.forest_fit(m, m.target, trees.ForestConfig(n_estimators=8, seed=s), mode="rf", task="regression")),
            ("gbm", lambda m, s=seed: trees.gbm_fit(m, m.target, trees.GbmConfig(n_rounds=12, seed=s), task="regression")),
            ("ols", lambda m: linear.ols_fit(m, m.target)),
        ]
        model = blend.blend_fit(train, holdout, fitters, task="regression")
        blended = blend.blend_predict(model, holdout)
        sse = float(np.sum((blended - holdout.target) ** 2))
        if sse > min(model.diagnostics["base_holdout_sse"]) + 1e-9:
            failures += 1
    elapsed = time.perf_counter() - t0
    check(
        "blending optimality (holdout SSE)",
        failures == 0 and elapsed < 30.0,
        f"failures={failures}/20 configurations (slack 1e-9), {elapsed:.1f}s (limit 30s)",
    )


def test_smote_contract():
    """Balanced counts; synthetics on neighbor segments within 1e-9."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(107)
    k = 5
    counts = np.array([150, 90, 40])
    labels = np.repeat([0.0, 1.0, 2.0], counts)
    x = rng.normal(size=(counts.sum(), 5))
    matrix = numeric_matrix(x, labels)
    out = smote(matrix, k=k, seed=9)
    _, new_counts = np.unique(out.target, return_counts=True)
    balanced = new_counts.tolist() == [150, 150, 150]

    on_segment = True
    originals = matrix.rows
    for cls in (1.0, 2.0):
        xc = originals[labels == cls]
        d2 = ((xc[:, None, :] - xc[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1)[:, :k]
        syn_rows = out.rows[counts.sum():][out.target[counts.sum():] == cls]
        for srow in syn_rows:
            found = False
            for a in range(xc.shape[0]):
                for b in nn[a]:
                    seg = xc[b] - xc[a]
                    denom = float(seg @ seg)
                    if denom == 0.0:
                        continue
                    u = float((srow - xc[a]) @ seg) / denom
                    if -1e-9 <= u <= 1.0 + 1e-9 and np.max(np.abs(xc[a] + u * seg - srow)) <= 1e-9:
                        found = True
                        break
                if found:
                    break
            if not found:
                on_segment = False
    elapsed = time.perf_counter() - t0
    check(
        "SMOTE contract",
        balanced and on_segment and elapsed < 10.0,
        f"counts={new_counts.tolist()}, segments within 1e-9, {elapsed:.1f}s (limit 10s)",
    )


def test_boxcox_effectiveness():
    """A heavily right-skewed sample transforms to |skewness| < 0.5."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(108)
    y = np.exp(rng.normal(3.2, 1.05, size=6000))

    def skew(v):
        return float(np.mean((v - v.mean()) ** 3) / np.std(v) ** 3)

    raw_skew = skew(y)
    transform = boxcox_fit(y)
    post_skew = skew(transform.apply(y))
    elapsed = time.perf_counter() - t0
    check(
        "box-cox effectiveness",
        raw_skew > 4.0 and abs(post_skew) < 0.5 and elapsed < 5.0,
        f"skew {raw_skew:.2f} -> {post_skew:.3f} (limit |.| < 0.5), {elapsed:.1f}s (limit 5s)",
    )


def test_end_to_end_direction(e2e):
    """Classification-first beats the unclassified forest on long incidents
    (>= 5 percent lower test MAE) and test AUC reaches 0.70."""
    comp = e2e["comparison"]["test"]
    long_ours = comp["sup_mc"]["long"]
    long_base = comp["without_class"]["long"]
    improvement = 100.0 * (long_base - long_ours) / long_base
    auc = e2e["test_tree"]["classification"]["auc_macro"]
    elapsed = e2e["train_elapsed"]
    check(
        "end-to-end direction check",
        improvement >= 5.0 and auc >= 0.70 and elapsed < 300.0,
        f"long MAE {long_ours:.1f} vs baseline {long_base:.1f} ({improvement:.1f}% better, need >=5%), "
        f"test AUC={auc:.3f} (need >=0.70), train+eval {elapsed:.0f}s (limit 300s)",
    )


def test_misrouting_bound(e2e):
    """Routing by predicted band never beats routing by the true band."""
    ok = True
    details = []
    for name, tree in (("test", e2e["test_tree"]), ("validation", e2e["valid_tree"])):
        sup = tree["regression"]["sup_mc"]["overall"]["mae"]
        oracle = tree["regression"]["oracle"]["overall"]["mae"]
        details.append(f"{name}: sup_mc={sup:.2f} >= oracle={oracle:.2f}")
        if not sup >= oracle:
            ok = False
    check("misrouting bound", ok, "; ".join(details))


def test_persistence_round_trip(e2e):
    """Save, load, and predict bit-identically on 1000 records."""
    t0 = time.perf_counter()
    import tempfile, os

    model = e2e["model"]
    records = e2e["records"][:1000]
    before = predict_batch(model, records)
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "model.idp")
        save_model(model, path)
        loaded = load_model(path)
    after = predict_batch(loaded, records)
    identical = all(
        a.band == b.band
        and a.duration_minutes == b.duration_minutes
        and a.band_probabilities == b.band_probabilities
        for a, b in zip(before, after)
    )
    elapsed = time.perf_counter() - t0
    check(
        "persistence round trip",
        identical and elapsed < 10.0,
        f"1000 predictions bit-identical, {elapsed:.1f}s (limit 10s)",
    )


def test_kmeans_criteria():
    """Inertia monotone per iteration (exact), silhouette bounded, and a
    four-blob dataset recovers k=4 by both elbow and silhouette."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(109)

    monotone = True
    for trial in range(5):
        x = rng.normal(size=(300, 4)) * rng.uniform(0.5, 2.0)
        model = cluster.kmeans_fit(x, 5, seed=trial)
        path = np.array(model.inertia_path)
        if np.any(np.diff(path) > 0.0):
            monotone = False

    sil_ok = True
    for trial in range(5):
        x = rng.normal(size=(120, 3))
        labels = rng.integers(0, 4, size=120)
        labels[:4] = [0, 1, 2, 3]
        s = cluster.silhouette(x, labels)
        if not -1.0 <= s <= 1.0:
            sil_ok = False

    centers = np.array([[0, 0], [12, 0], [0, 12], [12, 12]], dtype=float)
    blobs = np.vstack([rng.normal(c, 0.8, size=(60, 2)) for c in centers])
    scan = cluster.elbow_scan(blobs, range(2, 9), seed=5)
    elbow_k = cluster.pick_elbow(scan)
    sil_by_k = {}
    for k in range(2, 9):
        km = cluster.kmeans_fit(blobs, k, seed=5)
        sil_by_k[k] = cluster.silhouette(blobs, cluster.assign_clusters(km, blobs))
    sil_k = max(sil_by_k, key=sil_by_k.get)
    elapsed = time.perf_counter() - t0
    check(
        "k-means criteria",
        monotone and sil_ok and elbow_k == 4 and sil_k == 4 and elapsed < 20.0,
        f"inertia monotone, silhouette in [-1,1], elbow k={elbow_k}, silhouette k={sil_k}, {elapsed:.1f}s (limit 20s)",
    )


def test_comparison_harness_structure(e2e):
    """All five framework rows per band per split, plus clustering diagnostics."""
    comp = e2e["comparison"]
    required_rows = ("unsup", "sup_mc", "tobit_mc", "with_class", "without_class")
    bands = ("short", "medium", "long", "overall")
    ok = True
    for split in ("test", "validation"):
        for row in required_rows:
            for band in bands:
                v = comp[split][row][band]
                if not np.isfinite(v) or v < 0:
                    ok = False
    ok = ok and "silhouette_standardized" in comp["clustering"]
    ok = ok and comp["clustering"]["k"] == 4
    elapsed = e2e["compare_elapsed"]
    check(
        "comparison harness structure",
        ok and elapsed < 300.0,
        f"5 rows x 4 bands x 2 splits finite, k=4, harness {elapsed:.0f}s (limit 300s)",
    )
