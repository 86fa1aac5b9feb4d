"""Imputation, correlation filter, box-cox, SMOTE, and split tests."""

from datetime import datetime, timedelta

import numpy as np
import pytest

from incident_duration.preprocess import (
    BoxCoxTransform,
    Imputer,
    PreprocessError,
    SplitSpec,
    boxcox_fit,
    correlation_filter,
    impute,
    smote,
    split_records,
)
from incident_duration.schema import FeatureColumn, FeatureMatrix, band_of

from .test_schema import make_record


def numeric_matrix(rows, kinds=None, target=None, names=None):
    rows = np.asarray(rows, dtype=np.float64)
    p = rows.shape[1]
    kinds = kinds or ["numeric"] * p
    names = names or [f"c{i}" for i in range(p)]
    cols = tuple(FeatureColumn(names[i], kinds[i], names[i]) for i in range(p))
    return FeatureMatrix(cols, rows, target)


class TestImpute:
    def test_numeric_mean(self):
        m = numeric_matrix([[2.0], [np.nan], [4.0]])
        out = impute(m)
        assert out.rows[:, 0].tolist() == [2.0, 3.0, 4.0]

    def test_categorical_mode_fills_onehot_group(self):
        # categories A, A, missing, B one-hot encoded
        rows = np.array(
            [[1.0, 0.0], [1.0, 0.0], [np.nan, np.nan], [0.0, 1.0]]
        )
        cols = (FeatureColumn("f=A", "onehot", "f"), FeatureColumn("f=B", "onehot", "f"))
        out = impute(FeatureMatrix(cols, rows))
        assert out.rows[2].tolist() == [1.0, 0.0]  # mode is A

    def test_all_missing_column_errors(self):
        m = numeric_matrix([[np.nan], [np.nan]])
        with pytest.raises(PreprocessError, match="c0"):
            impute(m)

    def test_training_stats_reused_at_transform(self):
        imp = Imputer().fit(numeric_matrix([[2.0], [4.0]]))
        out = imp.transform(numeric_matrix([[np.nan], [100.0]]))
        assert out.rows[0, 0] == 3.0  # training mean, not the new data's

    def test_ordinal_uses_mode(self):
        m = numeric_matrix([[1.0], [2.0], [2.0], [np.nan]], kinds=["ordinal"])
        out = impute(m)
        assert out.rows[3, 0] == 2.0


class TestCorrelationFilter:
    def test_identical_columns_drop_later(self):
        x = np.random.default_rng(0).normal(size=(50, 1))
        m = numeric_matrix(np.hstack([x, x]))
        out, dropped = correlation_filter(m, 0.4)
        assert dropped == ["c1"]
        assert out.names == ("c0",)

    def test_anticorrelated_drops_later(self):
        x = np.random.default_rng(1).normal(size=(50, 1))
        m = numeric_matrix(np.hstack([x, -x]))
        _, dropped = correlation_filter(m, 0.4)
        assert dropped == ["c1"]

    def test_independent_columns_survive(self):
        rng = np.random.default_rng(7)
        m = numeric_matrix(rng.normal(size=(1000, 6)))
        out, dropped = correlation_filter(m, 0.4)
        assert dropped == []
        assert out.n_cols == 6

    def test_zero_variance_column_never_dropped(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(100, 1))
        m = numeric_matrix(np.hstack([x, np.ones((100, 1)), x]))
        out, dropped = correlation_filter(m, 0.4)
        assert "c1" not in dropped
        assert dropped == ["c2"]

    def test_surviving_pairs_below_threshold(self):
        rng = np.random.default_rng(3)
        base = rng.normal(size=(300, 3))
        extra = base @ rng.normal(size=(3, 5)) + 0.3 * rng.normal(size=(300, 5))
        m = numeric_matrix(np.hstack([base, extra]))
        out, _ = correlation_filter(m, 0.4)
        corr = np.corrcoef(out.rows, rowvar=False)
        off = corr[~np.eye(out.n_cols, dtype=bool)]
        assert np.max(np.abs(off)) <= 0.4 + 1e-12

    def test_bad_threshold(self):
        m = numeric_matrix([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(PreprocessError):
            correlation_filter(m, 0.0)


class TestBoxCox:
    def test_identity_lambda_one(self):
        t = BoxCoxTransform(lam=1.0)
        assert t.apply([5.0])[0] == pytest.approx(4.0)

    def test_log_lambda_zero(self):
        t = BoxCoxTransform(lam=0.0)
        assert t.apply([np.e])[0] == pytest.approx(1.0)

    def test_lognormal_sample_fits_lambda_near_zero(self):
        rng = np.random.default_rng(11)
        y = np.exp(rng.normal(3.43, 0.87, size=5000))
        t = boxcox_fit(y)
        assert abs(t.lam) <= 0.05
        z = t.apply(y)
        skew = float(np.mean((z - z.mean()) ** 3) / np.std(z) ** 3)
        assert abs(skew) < 0.2

    def test_round_trip_within_1e9_relative(self):
        rng = np.random.default_rng(5)
        y = np.exp(rng.normal(3.4, 0.9, size=2000))
        t = boxcox_fit(y)
        back = t.invert(t.apply(y))
        assert np.max(np.abs(back - y) / y) < 1e-9

    def test_round_trip_with_shift(self):
        y = np.array([0.5, 1.0, 10.0, 300.0])
        t = BoxCoxTransform(lam=0.3, shift=1.0)
        assert np.allclose(t.invert(t.apply(y)), y, rtol=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(PreprocessError):
            boxcox_fit(np.array([1.0, 0.0]))

    def test_grid_maximizes_likelihood(self):
        # oracle: recompute the profile likelihood on the same grid
        rng = np.random.default_rng(13)
        y = rng.gamma(2.0, 10.0, size=800) + 1.0
        t = boxcox_fit(y)
        logy = np.log(y)

        def ll(lam):
            z = np.log(y) if lam == 0 else (y**lam - 1.0) / lam
            return -0.5 * y.size * np.log(z.var()) + (lam - 1.0) * logy.sum()

        grid = np.arange(-200, 201) / 100.0
        best = max(grid, key=ll)
        assert t.lam == pytest.approx(best)


class TestSmote:
    def test_already_balanced_unchanged(self):
        rng = np.random.default_rng(0)
        m = numeric_matrix(rng.normal(size=(40, 3)), target=np.repeat([0.0, 1.0], 20))
        out = smote(m, k=3, seed=1)
        assert out.n_rows == 40
        assert np.array_equal(out.rows, m.rows)

    def test_counts_equalized(self):
        rng = np.random.default_rng(1)
        target = np.array([0.0] * 100 + [1.0] * 80 + [2.0] * 20)
        m = numeric_matrix(rng.normal(size=(200, 4)), target=target)
        out = smote(m, k=5, seed=2)
        _, counts = np.unique(out.target, return_counts=True)
        assert counts.tolist() == [100, 100, 100]

    def test_originals_preserved_as_prefix(self):
        rng = np.random.default_rng(2)
        target = np.array([0.0] * 30 + [1.0] * 10)
        m = numeric_matrix(rng.normal(size=(40, 3)), target=target)
        out = smote(m, k=3, seed=3)
        assert np.array_equal(out.rows[:40], m.rows)
        assert np.array_equal(out.target[:40], m.target)

    def test_two_point_segment(self):
        rows = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 6.0], [7.0, 7.0]])
        target = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
        m = numeric_matrix(rows, target=target)
        out = smote(m, k=1, seed=4)
        syn = out.rows[5:]
        assert syn.shape[0] == 1
        t = syn[0, 0]
        assert syn[0, 1] == pytest.approx(t)
        assert 0.0 <= t <= 1.0

    def test_synthetic_rows_on_neighbor_segments(self):
        rng = np.random.default_rng(5)
        n_min = 25
        target = np.array([0.0] * 80 + [1.0] * n_min)
        m = numeric_matrix(rng.normal(size=(105, 4)), target=target)
        k = 4
        out = smote(m, k=k, seed=6)
        minority = m.rows[m.target == 1.0]
        # oracle: brute-force neighbor lists
        d2 = ((minority[:, None, :] - minority[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1)[:, :k]
        for syn in out.rows[105:]:
            ok = False
            for a in range(n_min):
                for b in nn[a]:
                    seg = minority[b] - minority[a]
                    denom = float(seg @ seg)
                    if denom == 0.0:
                        continue
                    u = float((syn - minority[a]) @ seg) / denom
                    if -1e-9 <= u <= 1 + 1e-9 and np.allclose(minority[a] + u * seg, syn, atol=1e-9):
                        ok = True
                        break
                if ok:
                    break
            assert ok, f"synthetic row {syn} not on any neighbor segment"

    def test_binary_columns_snapped(self):
        rng = np.random.default_rng(7)
        rows = np.hstack([rng.normal(size=(60, 2)), rng.integers(0, 2, size=(60, 1)).astype(float)])
        target = np.array([0.0] * 45 + [1.0] * 15)
        m = numeric_matrix(rows, kinds=["numeric", "numeric", "binary"], target=target)
        out = smote(m, k=3, seed=8)
        assert set(np.unique(out.rows[:, 2])) <= {0.0, 1.0}

    def test_minority_smaller_than_k_plus_1(self):
        rng = np.random.default_rng(8)
        target = np.array([0.0] * 20 + [1.0] * 4)
        m = numeric_matrix(rng.normal(size=(24, 2)), target=target)
        with pytest.raises(PreprocessError, match="smaller k"):
            smote(m, k=5, seed=9)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        target = np.array([0.0] * 50 + [1.0] * 20)
        m = numeric_matrix(rng.normal(size=(70, 3)), target=target)
        a = smote(m, k=3, seed=10)
        b = smote(m, k=3, seed=10)
        assert np.array_equal(a.rows, b.rows)


def labeled_records(n, seed=0):
    rng = np.random.default_rng(seed)
    durations = np.exp(rng.normal(3.4, 0.9, size=n)).clip(1, 1300)
    return [
        make_record(i, start_time=datetime(2018, 1, 1) + timedelta(hours=int(rng.integers(0, 20000))), duration_minutes=float(d))
        for i, d in enumerate(durations)
    ]


class TestSplit:
    def test_sizes(self):
        records = labeled_records(100)
        spec = SplitSpec(0.6, 0.2, 0.2, seed=1)
        train, test, valid = split_records(records, spec)
        assert len(train) + len(test) + len(valid) == 100
        assert abs(len(train) - 60) <= 3
        assert abs(len(test) - 20) <= 3

    def test_deterministic(self):
        records = labeled_records(80)
        spec = SplitSpec(seed=42)
        a = split_records(records, spec)
        b = split_records(records, spec)
        assert [[r.id for r in part] for part in a] == [[r.id for r in part] for part in b]

    def test_disjoint_exhaustive(self):
        records = labeled_records(123)
        train, test, valid = split_records(records, SplitSpec(seed=3))
        ids = [r.id for part in (train, test, valid) for r in part]
        assert len(ids) == 123
        assert len(set(ids)) == 123

    def test_stratified_within_5_points(self):
        records = labeled_records(1000, seed=5)
        overall = np.array([int(band_of(r.duration_minutes)) for r in records])
        shares = np.bincount(overall, minlength=3) / len(records)
        for part in split_records(records, SplitSpec(seed=6)):
            bands = np.bincount([int(band_of(r.duration_minutes)) for r in part], minlength=3) / len(part)
            assert np.max(np.abs(bands - shares)) < 0.05

    def test_fractions_validated(self):
        with pytest.raises(PreprocessError):
            SplitSpec(0.5, 0.2, 0.2)

    def test_empty_stratum_errors(self):
        records = labeled_records(30, seed=7)
        # make LONG a singleton stratum: one long record cannot fill three splits
        records = [r for r in records if band_of(r.duration_minutes) != 2]
        records.append(make_record(999, duration_minutes=300.0))
        with pytest.raises(PreprocessError):
            split_records(records, SplitSpec(seed=8))
