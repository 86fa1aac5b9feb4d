"""Linear model family: OLS, logistic, Huber robust, and censored-normal fits.

All fitters accept either a FeatureMatrix or a plain (n, p) array. Logistic,
Huber, and the censored fit standardize the design internally and report
coefficients on the original scale. The objective/gradient helpers at the
bottom operate on raw parameter vectors so they can be checked against
finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .schema import FeatureMatrix


class LinearFitError(ValueError):
    pass


class HuberConvergenceError(LinearFitError):
    def __init__(self, message: str, last_model: "LinearModel"):
        super().__init__(message)
        self.last_model = last_model


@dataclass(frozen=True)
class TobitLimits:
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise LinearFitError(f"censoring limits must satisfy lower < upper, got {self}")


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    family: str  # ols | logistic | huber | tobit
    scale_sigma: Optional[float] = None  # tobit residual scale
    delta: Optional[float] = None  # huber transition point (last IRLS value)
    limits: Optional[TobitLimits] = None
    feature_names: Optional[tuple] = None
    separable_warning: bool = False
    n_iter: int = 0
    loglik_path: tuple = ()

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)

    def to_state(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "family": self.family,
            "scale_sigma": self.scale_sigma,
            "delta": self.delta,
            "limits": None if self.limits is None else [self.limits.lower, self.limits.upper],
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    @classmethod
    def from_state(cls, state: dict) -> "LinearModel":
        lim = state.get("limits")
        return cls(
            weights=np.array(state["weights"], dtype=np.float64),
            intercept=float(state["intercept"]),
            family=state["family"],
            scale_sigma=state.get("scale_sigma"),
            delta=state.get("delta"),
            limits=None if lim is None else TobitLimits(float(lim[0]), float(lim[1])),
            feature_names=None if state.get("feature_names") is None else tuple(state["feature_names"]),
        )


def _as_array(matrix) -> tuple:
    if isinstance(matrix, FeatureMatrix):
        return matrix.rows, matrix.names
    return np.asarray(matrix, dtype=np.float64), None


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _solve_normal_equations(x: np.ndarray, y: np.ndarray, sample_weight=None, allow_ridge=True):
    """Least squares via normal equations; ridge on the non-intercept block
    when the Gram matrix is near singular."""
    n, p = x.shape
    a = np.hstack([x, np.ones((n, 1))])
    if sample_weight is not None:
        aw = a * sample_weight[:, None]
    else:
        aw = a
    g = aw.T @ a
    c = aw.T @ y
    ridge_used = False
    try:
        cond = np.linalg.cond(g)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e12:
        if not allow_ridge:
            raise LinearFitError("design matrix is rank deficient and ridge fallback is disabled")
        lam = 1e-8 * np.trace(x.T @ x if sample_weight is None else (x * sample_weight[:, None]).T @ x) / max(p, 1)
        g = g + np.diag(np.concatenate([np.full(p, lam), [0.0]]))
        ridge_used = True
    coef = np.linalg.solve(g, c)
    return coef[:p], float(coef[p]), ridge_used


def ols_fit(matrix, y, allow_ridge: bool = True, ridge: Optional[float] = None) -> LinearModel:
    """Ordinary least squares with intercept.

    Requires n > p unless the ridge fallback is enabled (it is by default;
    the fallback only engages on near-singular designs, for instance the
    duplicate-column meta problems produced by blending identical bases).
    An explicit ``ridge`` penalty is always applied to the non-intercept
    block.
    """
    x, names = _as_array(matrix)
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    if n <= p and not allow_ridge and ridge is None:
        raise LinearFitError(f"need more rows than columns for OLS (n={n}, p={p})")
    if ridge is not None:
        a = np.hstack([x, np.ones((n, 1))])
        g = a.T @ a + np.diag(np.concatenate([np.full(p, float(ridge)), [0.0]]))
        coef = np.linalg.solve(g, a.T @ y)
        return LinearModel(weights=coef[:p], intercept=float(coef[p]), family="ols", feature_names=names)
    w, b, _ = _solve_normal_equations(x, y, allow_ridge=allow_ridge)
    return LinearModel(weights=w, intercept=b, family="ols", feature_names=names)


def _standardize(x: np.ndarray):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std_safe = np.where(std > 0, std, 1.0)
    return (x - mean) / std_safe, mean, std_safe


def _destandardize(w_std: np.ndarray, b_std: float, mean: np.ndarray, std: np.ndarray):
    w = w_std / std
    b = b_std - float(w @ mean)
    return w, b


def logistic_fit(matrix, labels, max_iter: int = 100, tol: float = 1e-8) -> LinearModel:
    """Binary logistic regression by damped Newton iterations.

    Converges when the gradient max-norm drops below ``tol``. On perfectly
    separable data the iteration cap is reached and the model is returned
    with ``separable_warning`` set.
    """
    x, names = _as_array(matrix)
    y = np.asarray(labels, dtype=np.float64)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise LinearFitError("logistic_fit expects 0/1 labels")
    if y.min() == y.max():
        raise LinearFitError("logistic_fit requires both classes present")
    xs, mean, std = _standardize(x)
    n, p = xs.shape
    a = np.hstack([xs, np.ones((n, 1))])
    theta = np.zeros(p + 1)

    def nll(t):
        z = a @ t
        return float(np.sum(np.logaddexp(0.0, z) - y * z))

    converged = False
    n_iter = 0
    cur = nll(theta)
    for n_iter in range(1, max_iter + 1):
        z = a @ theta
        prob = _sigmoid(z)
        grad = a.T @ (prob - y)
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        wdiag = np.maximum(prob * (1.0 - prob), 1e-12)
        h = (a * wdiag[:, None]).T @ a
        h[np.diag_indices_from(h)] += 1e-10  # keeps collinear meta-features solvable
        step = np.linalg.solve(h, grad)
        # damping: halve until the objective does not increase
        scale = 1.0
        for _ in range(40):
            cand = theta - scale * step
            val = nll(cand)
            if val <= cur + 1e-12:
                theta = cand
                cur = val
                break
            scale *= 0.5
        else:
            # stalled without meeting the gradient criterion: on clean data
            # this is the signature of (quasi-)separation
            break
    # a finite-weight interior optimum keeps probabilities off 0/1; fully
    # saturated training probabilities mean the data were separated and the
    # optimizer stopped only because the likelihood flattened out
    prob = _sigmoid(a @ theta)
    saturated = bool(np.max(np.abs(prob - y)) < 1e-6)
    w, b = _destandardize(theta[:p], float(theta[p]), mean, std)
    return LinearModel(
        weights=w,
        intercept=b,
        family="logistic",
        feature_names=names,
        separable_warning=(not converged) or saturated,
        n_iter=n_iter,
    )


def huber_loss(residuals, delta: float) -> np.ndarray:
    """Piecewise loss: quadratic inside +-delta, linear beyond."""
    r = np.asarray(residuals, dtype=np.float64)
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))


def _mad_scale(residuals: np.ndarray) -> float:
    med = np.median(residuals)
    mad = np.median(np.abs(residuals - med))
    scale = mad / 0.6745
    if scale <= 0:
        scale = float(np.std(residuals))
    if scale <= 0:
        scale = 1.0
    return float(scale)


def huber_fit(matrix, y, delta: Optional[float] = None, max_iter: int = 200, tol: float = 1e-8) -> LinearModel:
    """Huber robust regression by iteratively reweighted least squares.

    When ``delta`` is omitted it adapts per iteration to 1.35 times the MAD
    residual scale. Raises HuberConvergenceError (carrying the last iterate)
    if the coefficients have not settled after ``max_iter`` sweeps.
    """
    x, names = _as_array(matrix)
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    if n <= p:
        raise LinearFitError(f"need more rows than columns for Huber (n={n}, p={p})")
    xs, mean, std = _standardize(x)
    w = np.zeros(p)
    b = float(y.mean())
    d = delta if delta is not None else 1.0
    for it in range(1, max_iter + 1):
        r = y - (xs @ w + b)
        if delta is None:
            d = 1.35 * _mad_scale(r)
            if d <= 0:
                d = 1.0
        absr = np.abs(r)
        weights = np.where(absr <= d, 1.0, d / np.maximum(absr, 1e-300))
        w_new, b_new, _ = _solve_normal_equations(xs, y, sample_weight=weights)
        change = max(float(np.max(np.abs(w_new - w))), abs(b_new - b))
        w, b = w_new, b_new
        if change < tol:
            wo, bo = _destandardize(w, b, mean, std)
            return LinearModel(weights=wo, intercept=bo, family="huber", delta=float(d), feature_names=names, n_iter=it)
    wo, bo = _destandardize(w, b, mean, std)
    last = LinearModel(weights=wo, intercept=bo, family="huber", delta=float(d), feature_names=names, n_iter=max_iter)
    raise HuberConvergenceError(f"Huber IRLS did not converge in {max_iter} iterations", last)


def tobit_fit(matrix, y, limits: TobitLimits = TobitLimits(), gtol: float = 1e-6, max_iter: int = 500) -> LinearModel:
    """Censored-normal regression by quasi-Newton likelihood maximization.

    Observations at or beyond a finite limit contribute tail probabilities;
    interior observations contribute the normal density. Optimizes weights,
    intercept, and log sigma until the gradient max-norm falls under
    ``gtol``; the per-iteration log likelihood is recorded in
    ``loglik_path``.
    """
    x, names = _as_array(matrix)
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    if n <= p:
        raise LinearFitError(f"need more rows than columns for the censored fit (n={n}, p={p})")
    lo_mask = y <= limits.lower if math.isfinite(limits.lower) else np.zeros(n, dtype=bool)
    hi_mask = y >= limits.upper if math.isfinite(limits.upper) else np.zeros(n, dtype=bool)
    mid_mask = ~(lo_mask | hi_mask)
    if not mid_mask.any():
        raise LinearFitError("censored fit needs at least one uncensored observation")
    if lo_mask.all() or hi_mask.all():
        raise LinearFitError("all observations censored on one side; sigma is unidentifiable")

    xs, mean, std = _standardize(x)
    w0, b0, _ = _solve_normal_equations(xs, y)
    resid = y - (xs @ w0 + b0)
    s0 = math.log(max(float(np.std(resid)), 1e-6))
    theta0 = np.concatenate([w0, [b0, s0]])
    lim_std = limits

    def obj(theta):
        return tobit_nll_grad(theta, xs, y, lim_std)

    path: list[float] = []

    def cb(theta):
        path.append(-obj(theta)[0])

    res = minimize(
        lambda t: obj(t),
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=cb,
        options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-14},
    )
    theta = res.x
    w, b = _destandardize(theta[:p], float(theta[p]), mean, std)
    return LinearModel(
        weights=w,
        intercept=b,
        family="tobit",
        scale_sigma=float(math.exp(theta[p + 1])),
        limits=limits,
        feature_names=names,
        n_iter=int(res.nit),
        loglik_path=tuple(path),
    )


def predict_linear(model: LinearModel, matrix, observed_scale: bool = False) -> np.ndarray:
    """Linear-family prediction.

    OLS/Huber return the fitted mean; the censored family returns the latent
    mean, clamped into the censoring limits when ``observed_scale`` is set;
    logistic returns probabilities.
    """
    x, names = _as_array(matrix)
    if model.feature_names is not None and names is not None and tuple(names) != tuple(model.feature_names):
        missing = sorted(set(model.feature_names) - set(names))
        extra = sorted(set(names) - set(model.feature_names))
        raise LinearFitError(f"schema mismatch: missing columns {missing}, unexpected columns {extra}")
    z = x @ model.weights + model.intercept
    if model.family == "logistic":
        # keep probabilities strictly inside (0,1) even when sigmoid saturates
        return np.clip(_sigmoid(z), 1e-15, 1.0 - 1e-15)
    if model.family == "tobit" and observed_scale and model.limits is not None:
        return np.clip(z, model.limits.lower, model.limits.upper)
    return z


# --- raw objective/gradient helpers (finite-difference checkable) ----------


def logistic_nll_grad(theta, x, y):
    """Negative Bernoulli log likelihood and gradient.

    ``theta`` is [weights..., intercept] on the raw feature scale.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = x.shape[1]
    z = x @ theta[:p] + theta[p]
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    err = _sigmoid(z) - y
    grad = np.concatenate([x.T @ err, [err.sum()]])
    return nll, grad


def huber_objective_grad(theta, x, y, delta: float):
    """Total Huber loss and gradient for fixed delta; theta = [w..., b]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = x.shape[1]
    r = y - (x @ theta[:p] + theta[p])
    loss = float(huber_loss(r, delta).sum())
    psi = np.where(np.abs(r) <= delta, r, delta * np.sign(r))
    grad = np.concatenate([-(x.T @ psi), [-psi.sum()]])
    return loss, grad


def tobit_nll_grad(theta, x, y, limits: TobitLimits):
    """Negative censored-normal log likelihood and gradient.

    ``theta`` is [weights..., intercept, log_sigma]. Censoring follows the
    limits: y at or below the lower limit contributes the lower tail mass,
    y at or above the upper limit the upper tail mass.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    w = theta[:p]
    b = theta[p]
    log_sigma = theta[p + 1]
    sigma = math.exp(log_sigma)
    mu = x @ w + b

    lo_mask = y <= limits.lower if math.isfinite(limits.lower) else np.zeros(n, dtype=bool)
    hi_mask = y >= limits.upper if math.isfinite(limits.upper) else np.zeros(n, dtype=bool)
    mid_mask = ~(lo_mask | hi_mask)

    nll = 0.0
    dmu = np.zeros(n)
    ds = 0.0

    if mid_mask.any():
        z = (y[mid_mask] - mu[mid_mask]) / sigma
        nll -= float(np.sum(norm.logpdf(z) - log_sigma))
        dmu[mid_mask] = -z / sigma
        ds += float(np.sum(1.0 - z * z))
    if lo_mask.any():
        a = (limits.lower - mu[lo_mask]) / sigma
        log_cdf = norm.logcdf(a)
        nll -= float(np.sum(log_cdf))
        ratio = np.exp(norm.logpdf(a) - log_cdf)  # hazard of the lower tail
        dmu[lo_mask] = ratio / sigma
        ds += float(np.sum(ratio * a))
    if hi_mask.any():
        bq = (mu[hi_mask] - limits.upper) / sigma
        log_cdf = norm.logcdf(bq)
        nll -= float(np.sum(log_cdf))
        ratio = np.exp(norm.logpdf(bq) - log_cdf)
        dmu[hi_mask] = -ratio / sigma
        ds += float(np.sum(ratio * bq))

    grad = np.concatenate([x.T @ dmu, [dmu.sum()], [ds]])
    return float(nll), grad
