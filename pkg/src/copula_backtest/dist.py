"""Univariate distributions: Student marginal, empirical cdf with randomized
ties, pseudo-observations and classical dependence measures."""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats
from scipy.special import digamma, gammaln, stdtr, stdtrit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_generator, check_sample

NU_MAX = 1.0e3
NU_MIN = 0.2


class ConvergenceError(RuntimeError):
    """An optimizer stopped without meeting its convergence criterion."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class StudentMarginalParams:
    nu: float
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.nu > 0 and np.isfinite(self.nu)):
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be > 0, got {self.scale}")

    def to_dict(self):
        return {"nu": float(self.nu), "location": float(self.location),
                "scale": float(self.scale)}


def student_logpdf(x, params):
    nu, s = params.nu, params.scale
    z = (np.asarray(x, dtype=np.float64) - params.location) / s
    return (gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * np.log(nu * np.pi)
            - np.log(s) - (nu + 1) / 2 * np.log1p(z * z / nu))


def student_pdf(x, params):
    return np.exp(student_logpdf(x, params))


def student_cdf(x, params):
    z = (np.asarray(x, dtype=np.float64) - params.location) / params.scale
    return stdtr(params.nu, z)


def student_quantile(p, params):
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0) | (p >= 1)) or np.any(np.isnan(p)):
        raise ValueError("probabilities must lie in (0, 1)")
    return params.location + params.scale * stdtrit(params.nu, p)


def _student_nll_and_grad(theta, x):
    """Mean negative log-likelihood in (ln nu, location, ln scale)."""
    lnu, loc, lsc = theta
    nu, s = np.exp(lnu), np.exp(lsc)
    z = (x - loc) / s
    z2 = z * z
    q = np.log1p(z2 / nu)
    ll = (gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * np.log(nu * np.pi)
          - lsc - (nu + 1) / 2 * q)
    d_loc = (nu + 1) * z / (s * (nu + z2))
    d_lsc = -1.0 + (nu + 1) * z2 / (nu + z2)
    d_nu = (0.5 * digamma((nu + 1) / 2) - 0.5 * digamma(nu / 2) - 0.5 / nu
            - 0.5 * q + (nu + 1) / 2 * z2 / (nu * (nu + z2)))
    grad = -np.array([nu * d_nu.mean(), d_loc.mean(), d_lsc.mean()])
    return -ll.mean(), grad


def _projected_gradient(theta, grad, bounds):
    g = grad.copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and theta[i] <= lo + 1e-12 and g[i] > 0:
            g[i] = 0.0
        if hi is not None and theta[i] >= hi - 1e-12 and g[i] < 0:
            g[i] = 0.0
    return g


def fit_student_marginal(sample, gtol=1e-6, maxiter=500):
    """Maximum-likelihood location-scale Student fit.

    The optimizer works on ``(ln nu, location, ln scale)``; ``nu`` is bounded
    to ``[0.2, 1000]``. Convergence requires the (projected) gradient of the
    mean log-likelihood to have norm below ``gtol``.
    """
    x = check_sample(sample, name="sample")
    if len(x) < 50:
        raise ValueError(f"at least 50 observations are required, got {len(x)}")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("all sample values are equal")
    loc0 = float(np.median(x))
    mad = float(np.median(np.abs(x - loc0)))
    # MAD of a t_6 variate is about 0.7176 times its scale
    scale0 = mad / 0.7176 if mad > 0 else float(np.std(x))
    theta0 = np.array([np.log(6.0), float(np.mean(x)), np.log(scale0)])
    bounds = [(np.log(NU_MIN), np.log(NU_MAX)), (None, None), (None, None)]
    res = optimize.minimize(_student_nll_and_grad, theta0, args=(x,), jac=True,
                            method="L-BFGS-B", bounds=bounds,
                            options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": maxiter})
    theta = res.x
    _, grad = _student_nll_and_grad(theta, x)
    gnorm = float(np.linalg.norm(_projected_gradient(theta, grad, bounds)))
    if gnorm >= gtol:
        # polish with a few Newton-free BFGS restarts from the current point
        res = optimize.minimize(_student_nll_and_grad, theta, args=(x,), jac=True,
                                method="L-BFGS-B", bounds=bounds,
                                options={"gtol": 1e-14, "ftol": 0.0, "maxiter": maxiter})
        theta = res.x
        _, grad = _student_nll_and_grad(theta, x)
        gnorm = float(np.linalg.norm(_projected_gradient(theta, grad, bounds)))
    if gnorm >= gtol:
        raise ConvergenceError(
            "Student marginal fit did not converge",
            {"gradient_norm": gnorm, "theta": theta.tolist(), "message": str(res.message),
             "iterations": int(res.nit)})
    return StudentMarginalParams(float(np.exp(theta[0])), float(theta[1]),
                                 float(np.exp(theta[2])))


class StudentMarginal(BaseEstimator):
    """Location-scale Student distribution fitted by maximum likelihood."""

    def __init__(self, gtol=1e-6, maxiter=500):
        self.gtol = gtol
        self.maxiter = maxiter

    def fit(self, X, y=None):
        p = fit_student_marginal(X, gtol=self.gtol, maxiter=self.maxiter)
        self.params_ = p
        self.nu_, self.location_, self.scale_ = p.nu, p.location, p.scale
        return self

    def cdf(self, X):
        check_is_fitted(self, "params_")
        return student_cdf(X, self.params_)

    def pdf(self, X):
        check_is_fitted(self, "params_")
        return student_pdf(X, self.params_)

    def ppf(self, p):
        check_is_fitted(self, "params_")
        return student_quantile(p, self.params_)

    def score(self, X, y=None):
        """Mean log-likelihood of ``X``."""
        check_is_fitted(self, "params_")
        return float(np.mean(student_logpdf(check_sample(X), self.params_)))


@dataclass(frozen=True)
class EmpiricalCdf:
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=np.float64))
        if len(v) < 1:
            raise ValueError("an empirical cdf needs at least one value")
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return len(self.values)

    def __call__(self, x):
        """Right-continuous step cdf ``#{values <= x} / n``."""
        return np.searchsorted(self.values, x, side="right") / self.n


def empirical_cdf_randomized(cdf, x, rng=None):
    """Probtile of ``x`` under an empirical cdf, drawn uniformly in its step.

    With ``k`` values strictly below ``x`` and ``e`` values equal to it the
    result is ``(k + U (e + 1)) / (n + 1)``, always strictly inside (0, 1).
    Vectorised over ``x``.
    """
    rng = check_generator(rng)
    x = np.asarray(x, dtype=np.float64)
    k = np.searchsorted(cdf.values, x, side="left")
    e = np.searchsorted(cdf.values, x, side="right") - k
    u = rng.random(x.shape)
    out = (k + u * (e + 1)) / (cdf.n + 1)
    return out if out.ndim else float(out)


def pseudo_observations(sample, rng=None):
    """Scaled ranks ``rank / (n + 1)``; ties get a random order."""
    x = check_sample(sample, name="sample")
    n = len(x)
    if np.unique(x).size == n:
        order = np.argsort(x, kind="stable")
    else:
        rng = check_generator(rng)
        order = np.lexsort((rng.random(n), x))
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.arange(1, n + 1)
    return ranks / (n + 1)


class PseudoObservations(TransformerMixin, BaseEstimator):
    """Column-wise scaled ranks with random tie-breaking."""

    def __init__(self, random_state=None):
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        self.n_features_in_ = 1 if X.ndim == 1 else X.shape[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        rng = check_generator(self.random_state)
        if X.ndim == 1:
            return pseudo_observations(X, rng)
        return np.column_stack([pseudo_observations(X[:, j], rng)
                                for j in range(X.shape[1])])


def dependence_measures(pair):
    """Pearson, Kendall tau-b and Spearman coefficients of a synchronized pair.

    ``pair`` is a :class:`SyncedPair` or an (n, 2) array.
    """
    X = pair.to_array() if hasattr(pair, "to_array") else np.asarray(pair, dtype=np.float64)
    if len(X) < 2:
        raise ValueError("at least 2 observations are required")
    if np.ptp(X[:, 0]) == 0 or np.ptp(X[:, 1]) == 0:
        raise DegenerateSampleError("each column needs nonzero variance")
    pearson = float(np.corrcoef(X[:, 0], X[:, 1])[0, 1])
    kendall = float(stats.kendalltau(X[:, 0], X[:, 1]).statistic)
    spearman = float(stats.spearmanr(X[:, 0], X[:, 1]).statistic)
    clip = lambda v: float(min(1.0, max(-1.0, v)))  # noqa: E731
    return clip(pearson), clip(kendall), clip(spearman)
