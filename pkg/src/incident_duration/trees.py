"""Tree learners: CART, bagged forests, extremely randomized trees, and
gradient boosting with level-wise or leaf-wise growth.

One grower serves every variant. Classification trees maximize the Gini
purity gain from exact threshold scans; regression and boosting trees
maximize the usual gradient/hessian gain (squared-error reduction when the
hessian is constant). Ties break toward the lowest column index, then the
lowest threshold. The exact splitter presorts each feature once and
maintains the sorted order through partitions, so no per-node sorting is
needed; boosting reuses one presort across all rounds. Forest trees draw
independent per-tree random streams so fits are reproducible regardless of
scheduling.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .schema import FeatureMatrix


class TreeFitError(ValueError):
    pass


class SchemaMismatchError(ValueError):
    def __init__(self, expected, got):
        missing = sorted(set(expected) - set(got))
        extra = sorted(set(got) - set(expected))
        super().__init__(f"schema mismatch: missing columns {missing}, unexpected columns {extra}")
        self.missing = missing
        self.extra = extra


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    max_depth: Optional[int] = 8  # None = unlimited
    min_samples_leaf: int = 5
    max_features: object = "all"  # fraction in (0,1] or "all"
    bootstrap: Optional[bool] = None  # None = mode default (rf: yes, extra trees: no)
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise TreeFitError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise TreeFitError("max_depth must be positive or None")
        if self.min_samples_leaf < 1:
            raise TreeFitError("min_samples_leaf must be >= 1")
        if self.max_features != "all":
            f = float(self.max_features)
            if not 0.0 < f <= 1.0:
                raise TreeFitError("max_features must be a fraction in (0,1] or 'all'")


@dataclass(frozen=True)
class GbmConfig:
    n_rounds: int = 200
    learning_rate: float = 0.1
    growth: str = "leaf_wise"  # or "level_wise"
    max_leaves: int = 31
    max_depth: int = 8
    loss: str = "squared"  # or "logistic"
    categorical_encoding: str = "onehot_passthrough"  # or "target_statistic"
    min_samples_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1:
            raise TreeFitError("n_rounds must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise TreeFitError("learning_rate must lie in (0,1]")
        if self.growth not in ("level_wise", "leaf_wise"):
            raise TreeFitError(f"unknown growth mode {self.growth!r}")
        if self.loss not in ("squared", "logistic"):
            raise TreeFitError(f"unknown loss {self.loss!r}")
        if self.categorical_encoding not in ("onehot_passthrough", "target_statistic"):
            raise TreeFitError(f"unknown categorical encoding {self.categorical_encoding!r}")
        if self.max_leaves < 1 or self.max_depth < 1:
            raise TreeFitError("max_leaves and max_depth must be positive")


@dataclass
class TreeModel:
    """Flat node-array tree: feature < 0 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray  # (nodes,) regression, (nodes, K) classification
    task: str
    n_classes: int = 0
    feature_names: Optional[tuple] = None

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def to_state(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "n_samples": self.n_samples.tolist(),
            "value": self.value.tolist(),
            "task": self.task,
            "n_classes": self.n_classes,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    @classmethod
    def from_state(cls, s: dict) -> "TreeModel":
        return cls(
            feature=np.array(s["feature"], dtype=np.int32),
            threshold=np.array(s["threshold"], dtype=np.float64),
            left=np.array(s["left"], dtype=np.int32),
            right=np.array(s["right"], dtype=np.int32),
            n_samples=np.array(s["n_samples"], dtype=np.int64),
            value=np.array(s["value"], dtype=np.float64),
            task=s["task"],
            n_classes=int(s["n_classes"]),
            feature_names=None if s.get("feature_names") is None else tuple(s["feature_names"]),
        )


@dataclass
class ForestModel:
    trees: list
    mode: str  # rf | extra_trees
    task: str
    config: ForestConfig
    n_classes: int = 0
    feature_names: Optional[tuple] = None

    def to_state(self) -> dict:
        return {
            "mode": self.mode,
            "task": self.task,
            "n_classes": self.n_classes,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
            "config": _forest_config_state(self.config),
            "trees": [t.to_state() for t in self.trees],
        }

    @classmethod
    def from_state(cls, s: dict) -> "ForestModel":
        return cls(
            trees=[TreeModel.from_state(t) for t in s["trees"]],
            mode=s["mode"],
            task=s["task"],
            config=ForestConfig(**s["config"]),
            n_classes=int(s["n_classes"]),
            feature_names=None if s.get("feature_names") is None else tuple(s["feature_names"]),
        )


@dataclass
class GbmModel:
    task: str
    config: GbmConfig
    initial: list  # one scalar per output
    trees: list  # list (per output) of lists of TreeModel
    ts_encoders: list  # one target-statistic state (or None) per output
    n_classes: int = 0
    feature_names: Optional[tuple] = None

    def to_state(self) -> dict:
        return {
            "task": self.task,
            "config": _gbm_config_state(self.config),
            "initial": list(self.initial),
            "trees": [[t.to_state() for t in rounds] for rounds in self.trees],
            "ts_encoders": list(self.ts_encoders),
            "n_classes": self.n_classes,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    @classmethod
    def from_state(cls, s: dict) -> "GbmModel":
        return cls(
            task=s["task"],
            config=GbmConfig(**s["config"]),
            initial=[float(v) for v in s["initial"]],
            trees=[[TreeModel.from_state(t) for t in rounds] for rounds in s["trees"]],
            ts_encoders=list(s["ts_encoders"]),
            n_classes=int(s["n_classes"]),
            feature_names=None if s.get("feature_names") is None else tuple(s["feature_names"]),
        )


def _forest_config_state(c: ForestConfig) -> dict:
    return {
        "n_estimators": c.n_estimators,
        "max_depth": c.max_depth,
        "min_samples_leaf": c.min_samples_leaf,
        "max_features": c.max_features,
        "bootstrap": c.bootstrap,
        "seed": c.seed,
    }


def _gbm_config_state(c: GbmConfig) -> dict:
    return {
        "n_rounds": c.n_rounds,
        "learning_rate": c.learning_rate,
        "growth": c.growth,
        "max_leaves": c.max_leaves,
        "max_depth": c.max_depth,
        "loss": c.loss,
        "categorical_encoding": c.categorical_encoding,
        "min_samples_leaf": c.min_samples_leaf,
        "seed": c.seed,
    }


# --- growing ----------------------------------------------------------------


class _Grower:
    """Builds one tree over a design matrix.

    For classification pass integer labels ``y`` and the class count; for
    regression/boosting pass per-row targets ``g`` and optional hessians
    ``h``. Split search always least-squares-fits the targets; hessians only
    shape the leaf constants (sum(g)/sum(h), the Newton step), which is the
    classic boosting recipe.

    The exact splitter never re-sorts: a node is a (p, n_node) int32 block
    whose row j lists the node's members in feature-j order, and splitting
    compresses the block through a membership mask, which preserves each
    feature's order.
    """

    def __init__(
        self,
        x: np.ndarray,
        *,
        y: Optional[np.ndarray] = None,
        n_classes: int = 0,
        g: Optional[np.ndarray] = None,
        h: Optional[np.ndarray] = None,
        min_samples_leaf: int = 1,
        max_features: object = "all",
        splitter: str = "exact",
        rng: Optional[np.random.Generator] = None,
        presorted: Optional[np.ndarray] = None,
    ):
        self.x = x
        self.y = None if y is None else np.asarray(y).astype(np.int16)
        self.k = n_classes
        self.g = g
        self.h = h
        self.min_leaf = min_samples_leaf
        self.splitter = splitter
        self.rng = rng
        self.presorted = presorted
        p = x.shape[1]
        if max_features == "all":
            self.m = p
        else:
            self.m = int(float(max_features) * p)
            if self.m < 1:
                raise TreeFitError(f"max_features={max_features} resolves to 0 of {p} columns")
        self.feature: list = []
        self.threshold: list = []
        self.left: list = []
        self.right: list = []
        self.n_samples: list = []
        self.value: list = []

    # -- node bookkeeping --

    def _candidates(self) -> np.ndarray:
        p = self.x.shape[1]
        if self.m >= p:
            return np.arange(p)
        return np.sort(self.rng.choice(p, size=self.m, replace=False))

    def _leaf_value(self, rows: np.ndarray):
        if self.y is not None:
            counts = np.bincount(self.y[rows], minlength=self.k).astype(np.float64)
            return counts / counts.sum()
        gs = float(self.g[rows].sum())
        hs = float(rows.size) if self.h is None else float(self.h[rows].sum())
        return gs / hs if hs > 1e-12 else 0.0

    def _new_node(self, rows: np.ndarray) -> int:
        nid = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.n_samples.append(int(rows.size))
        self.value.append(self._leaf_value(rows))
        return nid

    def _pure(self, rows: np.ndarray) -> bool:
        if self.y is not None:
            return bool(np.all(self.y[rows] == self.y[rows[0]]))
        g = self.g[rows]
        return bool(np.all(g == g[0]))

    # -- split search --

    def _node_rows(self, node) -> np.ndarray:
        return node[0] if node.ndim == 2 else node

    def find_split(self, node):
        rows = self._node_rows(node)
        n = rows.size
        if n < 2 * self.min_leaf or n < 2 or self._pure(rows):
            return None
        cand = self._candidates()
        if self.splitter == "exact":
            return self._exact_split(node, cand)
        return self._random_split(rows, cand)

    def _exact_split(self, sorted_block: np.ndarray, cand: np.ndarray):
        # sorted_block is (p, n): row ids of the node, sorted per feature
        n = sorted_block.shape[1]
        sub = sorted_block[cand]  # (m, n)
        xs = self.x[sub, cand[:, None]]
        valid = xs[:, 1:] > xs[:, :-1]
        nl = np.arange(1, n, dtype=np.float64)[None, :]
        nr = float(n) - nl
        if self.min_leaf > 1:
            valid &= (nl >= self.min_leaf) & (nr >= self.min_leaf)
        if not valid.any():
            return None
        if self.y is not None:
            yn = self.y[sub]
            score = np.zeros((cand.size, n - 1))
            parent = 0.0
            csum = None
            for k in range(self.k - 1):
                pk = np.cumsum(yn == k, axis=1, dtype=np.int32)
                csum = pk if csum is None else csum + pk
                tot = float(pk[0, -1])
                clk = pk[:, :-1].astype(np.float64)
                crk = tot - clk
                score += clk * clk / nl + crk * crk / nr
                parent += tot * tot
            # counts of the last class follow from the running total
            if csum is None:
                cl_last = nl
                tot = float(n)
            else:
                cl_last = nl - csum[:, :-1]
                tot = float(n - csum[0, -1])
            score += cl_last * cl_last / nl + (tot - cl_last) ** 2 / nr
            parent = (parent + tot * tot) / n
        else:
            gs = np.cumsum(self.g[sub], axis=1)
            gl = gs[:, :-1]
            gtot = gs[:, -1:]
            score = gl * gl / nl + (gtot - gl) ** 2 / nr
            parent = float(gs[0, -1]) ** 2 / n
        score[~valid] = -np.inf
        flat = int(np.argmax(score))  # feature-major: lowest column, then lowest threshold
        f_loc, pos = divmod(flat, n - 1)
        best = score[f_loc, pos]
        if not np.isfinite(best) or best - parent <= 0.0:
            return None
        thr = 0.5 * (xs[f_loc, pos] + xs[f_loc, pos + 1])
        return float(best - parent), int(cand[f_loc]), float(thr)

    def _random_split(self, rows: np.ndarray, cand: np.ndarray):
        xsub = self.x[np.ix_(rows, cand)]
        n, m = xsub.shape
        lo = xsub.min(axis=0)
        hi = xsub.max(axis=0)
        span = hi > lo
        draws = self.rng.random(m)
        if not span.any():
            return None
        t = lo + draws * (hi - lo)
        mask = (xsub <= t).astype(np.float64)
        nl = mask.sum(axis=0)
        nr = float(n) - nl
        valid = span & (nl >= self.min_leaf) & (nr >= self.min_leaf)
        if not valid.any():
            return None
        nl_safe = np.maximum(nl, 1.0)
        nr_safe = np.maximum(nr, 1.0)
        if self.y is not None:
            yn = self.y[rows]
            score = np.zeros(m)
            parent = 0.0
            for k in range(self.k):
                ind = (yn == k).astype(np.float64)
                clk = ind @ mask
                tot = float(ind.sum())
                crk = tot - clk
                score += clk * clk / nl_safe + crk * crk / nr_safe
                parent += tot * tot
            parent /= n
        else:
            gn = self.g[rows]
            gl = gn @ mask
            gtot = float(gn.sum())
            score = gl * gl / nl_safe + (gtot - gl) ** 2 / nr_safe
            parent = gtot * gtot / n
        score = np.where(valid, score, -np.inf)
        f_loc = int(np.argmax(score))
        best = score[f_loc]
        if not np.isfinite(best) or best - parent <= 0.0:
            return None
        return float(best - parent), int(cand[f_loc]), float(t[f_loc])

    # -- partitioning --

    def _split_node(self, node, feat: int, thr: float):
        if self.splitter != "exact":
            rows = node
            go_left = self.x[rows, feat] <= thr
            return rows[go_left], rows[~go_left]
        rows = node[0]
        go_left = self.x[rows, feat] <= thr
        n_left = int(go_left.sum())
        p = node.shape[0]
        self._lookup[rows] = go_left
        mask = self._lookup[node]  # (p, n), True where the row goes left
        left_block = node[mask].reshape(p, n_left)
        right_block = node[~mask].reshape(p, rows.size - n_left)
        self._lookup[rows] = False
        return left_block, right_block

    def _apply_split(self, nid: int, node, split):
        _, feat, thr = split
        left_node, right_node = self._split_node(node, feat, thr)
        lid = self._new_node(self._node_rows(left_node))
        rid = self._new_node(self._node_rows(right_node))
        self.feature[nid] = feat
        self.threshold[nid] = thr
        self.left[nid] = lid
        self.right[nid] = rid
        return lid, rid, left_node, right_node

    # -- growth drivers --

    def _root_node(self, rows: np.ndarray):
        if self.splitter != "exact":
            return rows
        self._lookup = np.zeros(self.x.shape[0], dtype=bool)
        if self.presorted is not None and rows.size == self.x.shape[0]:
            return self.presorted
        # bootstrap samples carry duplicate row ids; duplicates of a row share
        # its feature values, so membership masks stay consistent
        order = np.argsort(self.x[rows], axis=0, kind="stable")
        return np.ascontiguousarray(rows[order].T.astype(np.int32))

    def grow_level_wise(self, rows: np.ndarray, max_depth: Optional[int]) -> "TreeModel":
        limit = math.inf if max_depth is None else max_depth
        node = self._root_node(rows)
        root = self._new_node(self._node_rows(node))
        stack = [(root, node, 0)]
        while stack:
            nid, nd, depth = stack.pop()
            if depth >= limit:
                continue
            split = self.find_split(nd)
            if split is None:
                continue
            lid, rid, ln, rn = self._apply_split(nid, nd, split)
            stack.append((rid, rn, depth + 1))
            stack.append((lid, ln, depth + 1))
        return self._finish()

    def grow_leaf_wise(self, rows: np.ndarray, max_leaves: int) -> "TreeModel":
        node = self._root_node(rows)
        root = self._new_node(self._node_rows(node))
        leaves = 1
        counter = 0
        heap: list = []
        split = self.find_split(node)
        if split is not None:
            heap.append((-split[0], counter, root, node, split))
            counter += 1
        heapq.heapify(heap)
        while heap and leaves < max_leaves:
            _, _, nid, nd, split = heapq.heappop(heap)
            lid, rid, ln, rn = self._apply_split(nid, nd, split)
            leaves += 1
            for cid, cnd in ((lid, ln), (rid, rn)):
                s = self.find_split(cnd)
                if s is not None:
                    heapq.heappush(heap, (-s[0], counter, cid, cnd, s))
                    counter += 1
        return self._finish()

    def _finish(self) -> "TreeModel":
        return TreeModel(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            n_samples=np.array(self.n_samples, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64),
            task="classification" if self.y is not None else "regression",
            n_classes=self.k,
        )


def _apply_tree(tree: TreeModel, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(tree.feature[node] >= 0)
    while active.size:
        nd = node[active]
        f = tree.feature[nd]
        xv = x[active, f]
        go_left = xv <= tree.threshold[nd]
        node[active] = np.where(go_left, tree.left[nd], tree.right[nd])
        active = active[tree.feature[node[active]] >= 0]
    return tree.value[node]


def _resolve_task(task: str, y: np.ndarray):
    if task == "classification":
        yi = np.asarray(y).astype(np.int64)
        if yi.min() < 0:
            raise TreeFitError("class labels must be non-negative integers")
        return yi, int(yi.max()) + 1
    return np.asarray(y, dtype=np.float64), 0


def cart_fit(matrix, y=None, config: Optional[ForestConfig] = None, task: str = "classification") -> TreeModel:
    """Fit a single decision tree by exact greedy splitting.

    Gini impurity for classification, squared error for regression. A
    constant target yields a single-leaf tree.
    """
    config = config or ForestConfig(n_estimators=1)
    x, names, y = _unpack(matrix, y)
    if y is None:
        raise TreeFitError("cart_fit needs a target")
    yv, k = _resolve_task(task, y)
    if task == "classification":
        grower = _Grower(x, y=yv, n_classes=k, min_samples_leaf=config.min_samples_leaf)
    else:
        grower = _Grower(x, g=yv, min_samples_leaf=config.min_samples_leaf)
    tree = grower.grow_level_wise(np.arange(x.shape[0]), config.max_depth)
    tree.feature_names = names
    return tree


def forest_fit(matrix, y=None, config: Optional[ForestConfig] = None, mode: str = "rf", task: str = "classification") -> ForestModel:
    """Fit a bagged forest (``rf``) or extremely randomized trees (``extra_trees``).

    rf draws a bootstrap sample per tree and a random feature subset per
    split, with exact thresholds; extra trees skip the bootstrap by default
    and draw one uniformly random threshold per candidate feature. Tree i
    uses a random stream keyed by (seed, i), so serial and parallel fits
    agree and dropping the last tree reproduces the smaller forest.
    """
    if mode not in ("rf", "extra_trees"):
        raise TreeFitError(f"unknown forest mode {mode!r}")
    config = config or ForestConfig()
    x, names, y = _unpack(matrix, y)
    if y is None:
        raise TreeFitError("forest_fit needs a target")
    yv, k = _resolve_task(task, y)
    bootstrap = config.bootstrap if config.bootstrap is not None else (mode == "rf")
    splitter = "exact" if mode == "rf" else "random"
    n = x.shape[0]
    shared_presort = None
    if splitter == "exact" and not bootstrap:
        shared_presort = _presort_features(x)
    trees = []
    for i in range(config.n_estimators):
        rng = _tree_rng(config.seed, i)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        kwargs = dict(
            min_samples_leaf=config.min_samples_leaf,
            max_features=config.max_features,
            splitter=splitter,
            rng=rng,
            presorted=shared_presort,
        )
        if task == "classification":
            grower = _Grower(x, y=yv, n_classes=k, **kwargs)
        else:
            grower = _Grower(x, g=yv, **kwargs)
        trees.append(grower.grow_level_wise(idx, config.max_depth))
    return ForestModel(trees=trees, mode=mode, task=task, config=config, n_classes=k, feature_names=names)


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index])))


def _presort_features(x: np.ndarray) -> np.ndarray:
    # (p, n) row ids, each feature's rows in ascending value order
    return np.argsort(x.T, axis=1, kind="stable").astype(np.int32)


def gbm_fit(matrix, y=None, config: Optional[GbmConfig] = None, task: str = "regression") -> GbmModel:
    """Stagewise gradient boosting of regression trees.

    Squared loss boosts residuals from the target mean; logistic loss boosts
    Newton steps from the base-rate log odds, wrapping multiclass targets
    one-vs-rest. With ``target_statistic`` categorical encoding every one-hot
    group collapses to a smoothed leave-one-out category mean before
    boosting (the encoding refits per one-vs-rest output).
    """
    config = config or GbmConfig()
    x, names, y = _unpack(matrix, y)
    if y is None:
        raise TreeFitError("gbm_fit needs a target")
    columns = matrix.columns if isinstance(matrix, FeatureMatrix) else None
    if task == "classification":
        yi, k = _resolve_task(task, y)
        outputs = [(yi == c).astype(np.float64) for c in range(k)]
        losses = ["logistic"] * k
        if config.loss != "logistic":
            raise TreeFitError("classification boosting requires logistic loss")
    else:
        outputs = [np.asarray(y, dtype=np.float64)]
        losses = [config.loss]
        k = 0
        if config.loss == "logistic":
            u = set(np.unique(outputs[0]))
            if u - {0.0, 1.0}:
                raise TreeFitError("logistic loss requires 0/1 targets (or classification task)")
    initial = []
    all_trees = []
    encoders = []
    plain_presort = None
    for target, loss in zip(outputs, losses):
        enc_state = None
        xe = x
        if config.categorical_encoding == "target_statistic":
            if columns is None:
                raise TreeFitError("target_statistic encoding needs FeatureMatrix column metadata")
            enc_state = _fit_target_stats(columns, x, target)
            xe = _apply_target_stats_train(enc_state, columns, x, target)
            presort = _presort_features(xe)
        else:
            if plain_presort is None:
                plain_presort = _presort_features(xe)
            presort = plain_presort
        if loss == "squared":
            f0 = float(target.mean())
        else:
            pbar = min(max(float(target.mean()), 1e-6), 1.0 - 1e-6)
            f0 = math.log(pbar / (1.0 - pbar))
        score = np.full(x.shape[0], f0)
        trees = []
        for rnd in range(config.n_rounds):
            if loss == "squared":
                # non-finite targets surface through the explicit check below
                with np.errstate(invalid="ignore"):
                    g = target - score
                h = None
            else:
                prob = 1.0 / (1.0 + np.exp(-np.clip(score, -500, 500)))
                g = target - prob
                h = np.maximum(prob * (1.0 - prob), 1e-12)
            if not np.all(np.isfinite(g)):
                raise TreeFitError(f"non-finite gradient at boosting round {rnd}")
            grower = _Grower(
                x=xe, g=g, h=h, min_samples_leaf=config.min_samples_leaf, presorted=presort
            )
            if config.growth == "leaf_wise":
                tree = grower.grow_leaf_wise(np.arange(x.shape[0]), config.max_leaves)
            else:
                tree = grower.grow_level_wise(np.arange(x.shape[0]), config.max_depth)
            score = score + config.learning_rate * _apply_tree(tree, xe)
            trees.append(tree)
        initial.append(f0)
        all_trees.append(trees)
        encoders.append(enc_state)
    return GbmModel(
        task=task,
        config=config,
        initial=initial,
        trees=all_trees,
        ts_encoders=encoders,
        n_classes=k,
        feature_names=names,
    )


# --- target-statistic categorical encoding ----------------------------------


def _onehot_groups(columns) -> list:
    groups: dict[str, list[int]] = {}
    for j, c in enumerate(columns):
        if c.kind == "onehot":
            groups.setdefault(c.source, []).append(j)
    return sorted(groups.items())


_TS_PRIOR = 10.0


def _fit_target_stats(columns, x: np.ndarray, y: np.ndarray) -> dict:
    groups = _onehot_groups(columns)
    state = {"prior": _TS_PRIOR, "global_mean": float(y.mean()), "groups": []}
    for src, idxs in groups:
        cats = np.argmax(x[:, idxs], axis=1)
        sums = np.zeros(len(idxs))
        counts = np.zeros(len(idxs))
        np.add.at(sums, cats, y)
        np.add.at(counts, cats, 1.0)
        state["groups"].append({"source": src, "cols": list(idxs), "sums": sums.tolist(), "counts": counts.tolist()})
    return state


def _ts_passthrough_cols(columns, state) -> list:
    grouped = set()
    for grp in state["groups"]:
        grouped.update(grp["cols"])
    return [j for j in range(len(columns)) if j not in grouped]


def _apply_target_stats_train(state, columns, x, y) -> np.ndarray:
    keep = _ts_passthrough_cols(columns, state)
    parts = [x[:, keep]]
    gm = state["global_mean"]
    pw = state["prior"]
    for grp in state["groups"]:
        cols = grp["cols"]
        cats = np.argmax(x[:, cols], axis=1)
        sums = np.asarray(grp["sums"])
        counts = np.asarray(grp["counts"])
        # leave-one-out keeps a row's own target out of its category mean
        val = (sums[cats] - y + pw * gm) / np.maximum(counts[cats] - 1.0 + pw, 1e-12)
        parts.append(val[:, None])
    return np.hstack(parts)


def _apply_target_stats(state, columns, x) -> np.ndarray:
    keep = _ts_passthrough_cols(columns, state)
    parts = [x[:, keep]]
    gm = state["global_mean"]
    pw = state["prior"]
    for grp in state["groups"]:
        cols = grp["cols"]
        cats = np.argmax(x[:, cols], axis=1)
        sums = np.asarray(grp["sums"])
        counts = np.asarray(grp["counts"])
        val = (sums[cats] + pw * gm) / (counts[cats] + pw)
        parts.append(val[:, None])
    return np.hstack(parts)


# --- prediction ---------------------------------------------------------------


def _unpack(matrix, y):
    if isinstance(matrix, FeatureMatrix):
        target = matrix.target if y is None else y
        return matrix.rows, matrix.names, target
    return np.asarray(matrix, dtype=np.float64), None, y


def _check_schema(model_names, matrix):
    if model_names is None or not isinstance(matrix, FeatureMatrix):
        return
    if tuple(matrix.names) != tuple(model_names):
        raise SchemaMismatchError(model_names, matrix.names)


def predict(model, matrix, n_rounds: Optional[int] = None) -> np.ndarray:
    """Predict with any tree-family model.

    Classification returns (n, K) probability vectors; regression returns a
    flat vector. For boosted models ``n_rounds`` truncates the ensemble to
    the first rounds (staged prediction).
    """
    if isinstance(model, TreeModel):
        _check_schema(model.feature_names, matrix)
        x, _, _ = _unpack(matrix, None)
        return _apply_tree(model, x)
    if isinstance(model, ForestModel):
        _check_schema(model.feature_names, matrix)
        x, _, _ = _unpack(matrix, None)
        acc = _apply_tree(model.trees[0], x).copy()
        for t in model.trees[1:]:
            acc += _apply_tree(t, x)
        return acc / float(len(model.trees))
    if isinstance(model, GbmModel):
        _check_schema(model.feature_names, matrix)
        x, _, _ = _unpack(matrix, None)
        scores = []
        for out in range(len(model.trees)):
            enc = model.ts_encoders[out]
            if enc is not None:
                cols = matrix.columns if isinstance(matrix, FeatureMatrix) else None
                if cols is None:
                    raise TreeFitError("target-statistic model needs FeatureMatrix input")
                xe = _apply_target_stats(enc, cols, x)
            else:
                xe = x
            s = np.full(x.shape[0], model.initial[out])
            rounds = model.trees[out] if n_rounds is None else model.trees[out][:n_rounds]
            for t in rounds:
                s = s + model.config.learning_rate * _apply_tree(t, xe)
            scores.append(s)
        if model.task == "classification":
            probs = np.column_stack([1.0 / (1.0 + np.exp(-np.clip(s, -500, 500))) for s in scores])
            return probs / probs.sum(axis=1, keepdims=True)
        if model.config.loss == "logistic":
            return 1.0 / (1.0 + np.exp(-np.clip(scores[0], -500, 500)))
        return scores[0]
    raise TreeFitError(f"cannot predict with model of type {type(model).__name__}")
