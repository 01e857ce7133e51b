"""Synthetic heteroskedastic price pairs for end-to-end checks."""

import numpy as np

from .copula import StudentCopulaParams, sample_copula
from .dist import StudentMarginalParams, student_quantile
from .volatility import LmArchParams


def simulate_returns(params, n, lmarch=None, marginal_nu=6.0, daily_vol=0.01,
                     reversion=0.05, rng=None):
    """Bivariate returns ``r(t+1) = sigma(t) eps(t+1)``.

    Innovations have a Student copula ``params`` and unit-variance Student
    marginals. Each asset's variance follows the long-memory EWMA mixture
    pulled toward ``daily_vol**2`` with weight ``reversion`` to keep the
    process stationary.

    Returns
    -------
    returns, sigmas, innovations : (n, 2) arrays
    """
    lmarch = lmarch or LmArchParams()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    U = sample_copula(params, n, rng).points
    marg = StudentMarginalParams(marginal_nu)
    eps = student_quantile(U, marg)
    if marginal_nu > 2:
        eps = eps / np.sqrt(marginal_nu / (marginal_nu - 2.0))
    mu = lmarch.decays
    w = lmarch.weights
    v_inf = daily_vol ** 2
    comp = np.full((2, len(mu)), v_inf)
    r = np.empty((n, 2))
    sig = np.empty((n, 2))
    for t in range(n):
        var = (1.0 - reversion) * (comp @ w) + reversion * v_inf
        s = np.sqrt(var)
        sig[t] = s
        r[t] = s * eps[t]
        comp = mu * comp + (1.0 - mu) * (r[t] ** 2)[:, None]
    return r, sig, eps


def business_days(n, start="2000-01-03"):
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return [str(d) for d in days]


def simulate_prices(params, n_days, rng=None, start="2000-01-03", price0=100.0, **kw):
    """Dates and two price paths of length ``n_days``."""
    r, _, _ = simulate_returns(params, n_days - 1, rng=rng, **kw)
    logp = np.vstack([np.zeros(2), np.cumsum(r, axis=0)])
    return business_days(n_days, start), price0 * np.exp(logp)


__all__ = ["simulate_returns", "simulate_prices", "business_days", "StudentCopulaParams"]
