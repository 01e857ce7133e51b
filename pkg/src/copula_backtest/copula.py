"""Bivariate Student copula: density, conditional cdf, sampling and fitting."""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln, stdtr, stdtrit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_generator, check_nu, check_rho, check_unit_square
from .dist import NU_MAX, ConvergenceError

PROVENANCES = ("in-copula", "in-trf-copula", "out-copula", "out-trf-copula")
NU_FIT_MIN = 0.5
_ONE_MINUS = np.nextafter(1.0, 0.0)
_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class StudentCopulaParams:
    rho: float
    nu: float

    def __post_init__(self):
        object.__setattr__(self, "rho", check_rho(self.rho))
        object.__setattr__(self, "nu", check_nu(self.nu))

    @property
    def normal_like(self):
        return self.nu >= NU_MAX

    def to_dict(self):
        return {"rho": self.rho, "nu": self.nu, "normal_like": self.normal_like}


@dataclass(frozen=True)
class CopulaSample:
    """Points of a bivariate copula sample, tagged by how they were built."""
    points: np.ndarray
    provenance: str = "in-copula"
    asset_ids: tuple = ("x1", "x2")
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array")
        if ((pts < 0) | (pts > 1)).any():
            raise ValueError("copula points must lie in the unit square")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))

    def __len__(self):
        return len(self.points)

    def swapped(self):
        return CopulaSample(self.points[:, ::-1].copy(), self.provenance,
                            self.asset_ids[::-1], dict(self.meta))


def _points(sample):
    return sample.points if isinstance(sample, CopulaSample) else np.asarray(sample, dtype=np.float64)


def copula_logpdf(U, params):
    U = check_unit_square(_points(U), name="u")
    nu, rho = params.nu, params.rho
    x = stdtrit(nu, U)
    return _logpdf_from_quantiles(x[:, 0], x[:, 1], rho, nu)


def _logpdf_from_quantiles(x1, x2, rho, nu):
    d = 1.0 - rho * rho
    q = (x1 * x1 + x2 * x2 - 2.0 * rho * (x1 * x2)) / d
    const = gammaln((nu + 2) / 2) + gammaln(nu / 2) - 2.0 * gammaln((nu + 1) / 2)
    return (const - 0.5 * np.log(d) - (nu + 2) / 2 * np.log1p(q / nu)
            + (nu + 1) / 2 * (np.log1p(x1 * x1 / nu) + np.log1p(x2 * x2 / nu)))


def copula_density(U, params):
    """Student copula density at interior points ``U`` of shape (n, 2) or (2,)."""
    U = np.asarray(_points(U), dtype=np.float64)
    single = U.ndim == 1
    out = np.exp(copula_logpdf(U.reshape(-1, 2), params))
    return float(out[0]) if single else out


def _check_open(z, name):
    z = np.asarray(z, dtype=np.float64)
    if np.any(~((z > 0) & (z < 1))):
        raise ValueError(f"{name} must lie strictly inside (0, 1)")
    return z


def conditional_cdf(z2, z1, params):
    """P(Z2 <= z2 | Z1 = z1) under the Student copula."""
    z1 = _check_open(z1, "z1")
    z2 = _check_open(z2, "z2")
    nu, rho = params.nu, params.rho
    x1 = stdtrit(nu, z1)
    x2 = stdtrit(nu, z2)
    scale = np.sqrt((nu + x1 * x1) * (1.0 - rho * rho) / (nu + 1.0))
    out = stdtr(nu + 1.0, (x2 - rho * x1) / scale)
    return out if np.ndim(out) else float(out)


def inverse_conditional_cdf(u2, z1, params):
    """Solve ``conditional_cdf(z2, z1) = u2`` for ``z2``."""
    z1 = _check_open(z1, "z1")
    u2 = _check_open(u2, "u2")
    nu, rho = params.nu, params.rho
    x1 = stdtrit(nu, z1)
    scale = np.sqrt((nu + x1 * x1) * (1.0 - rho * rho) / (nu + 1.0))
    out = stdtr(nu, rho * x1 + scale * stdtrit(nu + 1.0, u2))
    return out if np.ndim(out) else float(out)


def sample_student(params, n, rng=None):
    """Draw ``n`` bivariate Student vectors with unit scale matrix diagonal."""
    rng = check_generator(rng)
    g = rng.standard_normal((n, 2))
    w = rng.chisquare(params.nu, n) / params.nu
    x1 = g[:, 0]
    x2 = params.rho * g[:, 0] + np.sqrt(1.0 - params.rho ** 2) * g[:, 1]
    s = 1.0 / np.sqrt(w)
    return np.column_stack([x1 * s, x2 * s])


def sample_copula(params, n, rng=None, provenance="in-copula"):
    """Draw ``n`` points from the Student copula."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = sample_student(params, n, rng)
    u = np.clip(stdtr(params.nu, x), _TINY, _ONE_MINUS)
    return CopulaSample(u, provenance)


def kendall_init(U):
    """Kendall-tau inversion ``rho0 = sin(pi tau / 2)``."""
    tau = stats.kendalltau(U[:, 0], U[:, 1]).statistic
    return float(np.sin(np.pi * tau / 2.0)), float(tau)


def _rho_objective(theta, a, b, nu):
    # mean negative log-likelihood in atanh(rho), rho-dependent part only
    rho = np.tanh(theta[0])
    d = 1.0 - rho * rho
    q = (a - 2.0 * rho * b) / d
    f = 0.5 * np.log(d) + (nu + 2) / 2 * np.mean(np.log1p(q / nu))
    dq = (-2.0 * b + 2.0 * rho * q) / d
    dfdrho = -rho / d + (nu + 2) / 2 * np.mean(dq / (nu + q))
    return f, np.array([dfdrho * d])


def _profile(U, nu, theta0):
    x = stdtrit(nu, U)
    x1, x2 = x[:, 0], x[:, 1]
    a = x1 * x1 + x2 * x2
    b = x1 * x2
    res = optimize.minimize(_rho_objective, [theta0], args=(a, b, nu), jac=True,
                            method="L-BFGS-B", bounds=[(-5.0, 5.0)],
                            options={"gtol": 1e-11, "ftol": 1e-15})
    rho = float(np.tanh(res.x[0]))
    ll = float(np.sum(_logpdf_from_quantiles(x1, x2, rho, nu)))
    return rho, ll, res


def fit_student_copula(sample, nu_bounds=(NU_FIT_MIN, NU_MAX), xatol=1e-6):
    """Two-step maximum-likelihood fit of a Student copula.

    ``rho`` starts from Kendall-tau inversion; the likelihood is then
    maximised jointly over ``(rho, ln nu)`` as a profile: for each ``nu`` the
    optimal ``rho`` is found by a gradient search and ``ln nu`` is searched
    on a bounded interval. ``nu`` at the upper bound is reported as the cap.

    Returns
    -------
    params : StudentCopulaParams
    loglik : float
        Total log-likelihood at the optimum.
    """
    U = check_unit_square(_points(sample), name="sample")
    if len(U) < 100:
        raise ValueError(f"at least 100 points are required, got {len(U)}")
    rho0, tau = kendall_init(U)
    if abs(rho0) >= 1.0 - 1e-12:
        raise ConvergenceError("comonotone sample: Kendall tau is +-1",
                               {"rho0": rho0, "tau": tau})
    theta0 = float(np.arctanh(np.clip(rho0, -0.999, 0.999)))
    cache = {}

    def negll(lnu):
        rho, ll, _ = _profile(U, float(np.exp(lnu)), theta0)
        cache[lnu] = (rho, ll)
        return -ll

    lo, hi = np.log(nu_bounds[0]), np.log(nu_bounds[1])
    res = optimize.minimize_scalar(negll, bounds=(lo, hi), method="bounded",
                                   options={"xatol": xatol, "maxiter": 200})
    if not res.success:
        raise ConvergenceError("Student copula fit did not converge",
                               {"rho0": rho0, "tau": tau, "message": str(res.message)})
    lnu = float(res.x)
    # the bounded search never evaluates the endpoint itself
    if hi - lnu < 1e-3:
        ll_cap = -negll(hi)
        if ll_cap >= -res.fun:
            lnu = hi
    if lnu not in cache:
        negll(lnu)
    rho, ll = cache[lnu]
    nu = float(np.exp(lnu)) if lnu < hi else float(nu_bounds[1])
    return StudentCopulaParams(rho, nu), ll


class StudentCopula(BaseEstimator):
    """Bivariate Student copula estimator.

    Parameters
    ----------
    rho, nu : float, optional
        Fixed parameters. When both are given ``fit`` keeps them and only
        records the log-likelihood.
    """

    def __init__(self, rho=None, nu=None):
        self.rho = rho
        self.nu = nu

    def fit(self, X, y=None):
        U = check_unit_square(_points(X), name="X")
        if self.rho is not None and self.nu is not None:
            params = StudentCopulaParams(self.rho, self.nu)
            ll = float(np.sum(copula_logpdf(U, params)))
        else:
            params, ll = fit_student_copula(U)
        self.params_ = params
        self.rho_, self.nu_ = params.rho, params.nu
        self.loglik_ = ll
        self.n_features_in_ = 2
        return self

    def score_samples(self, X):
        check_is_fitted(self, "params_")
        return copula_logpdf(X, self.params_)

    def score(self, X, y=None):
        """Mean log-density of ``X``."""
        return float(np.mean(self.score_samples(X)))

    def conditional_cdf(self, X):
        check_is_fitted(self, "params_")
        U = check_unit_square(_points(X), name="X")
        return conditional_cdf(U[:, 1], U[:, 0], self.params_)

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "params_")
        return sample_copula(self.params_, n_samples, random_state).points
