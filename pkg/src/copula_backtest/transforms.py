"""Rosenblatt transforms.

The analytic transform uses the conditional cdf of a fitted Student copula.
The empirical transform estimates the conditional cdf from a window of
copula points with kernel weights along the conditioning axis.
"""

from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_generator, check_pair_array, check_unit_square
from .copula import CopulaSample, StudentCopulaParams, conditional_cdf, fit_student_copula
from .dist import pseudo_observations

KERNEL_SHAPES = ("gaussian", "rectangular")


class ZeroWeightError(ArithmeticError):
    """No window point receives a positive kernel weight."""


@dataclass(frozen=True)
class KernelSpec:
    shape: str = "gaussian"
    half_width: float = 0.03

    def __post_init__(self):
        if self.shape not in KERNEL_SHAPES:
            raise ValueError(f"kernel shape must be one of {KERNEL_SHAPES}")
        if not 0.0 < self.half_width < 0.5:
            raise ValueError("kernel half_width must lie in (0, 0.5)")

    def weights(self, r):
        r = np.asarray(r, dtype=np.float64)
        d = self.half_width
        if self.shape == "gaussian":
            return np.exp(-(r * r) / (2.0 * d * d))
        return (np.abs(r) <= d).astype(np.float64)

    def to_dict(self):
        return {"shape": self.shape, "half_width": self.half_width}


def _check_orientation(orientation):
    if orientation not in (0, 1):
        raise ValueError("orientation must be 0 (condition on the first "
                         "coordinate) or 1 (condition on the second)")
    return orientation


def rosenblatt_analytic(sample, params, orientation=0):
    """Map a copula sample with the Student conditional cdf.

    With ``orientation=0`` the output is ``(z1, P(z2 | z1))``; with
    ``orientation=1`` it is ``(P(z1 | z2), z2)``.
    """
    _check_orientation(orientation)
    pts = sample.points if isinstance(sample, CopulaSample) else sample
    Z = check_unit_square(pts, name="sample")
    U = Z.copy()
    c, t = (0, 1) if orientation == 0 else (1, 0)
    U[:, t] = conditional_cdf(Z[:, t], Z[:, c], params)
    if isinstance(sample, CopulaSample):
        meta = dict(sample.meta, orientation=orientation)
        return CopulaSample(U, "in-trf-copula", sample.asset_ids, meta)
    return U


def rosenblatt_empirical(window, target, kernel=KernelSpec()):
    """Kernel-weighted conditional cdf of one target point.

    Parameters
    ----------
    window : (m, 2) array or CopulaSample
        Copula points spanning the forecast.
    target : (z1, z2)
    kernel : KernelSpec

    Returns
    -------
    (u1, u2) with ``u1 = z1`` and ``u2`` the weighted fraction of window
    points whose second coordinate is ``<= z2``.
    """
    W = window.points if isinstance(window, CopulaSample) else np.asarray(window, dtype=np.float64)
    W = check_unit_square(W, name="window", min_samples=2)
    z1, z2 = float(target[0]), float(target[1])
    w = kernel.weights(W[:, 0] - z1)
    # cumulative sum in z2 order keeps u2 exactly monotone in z2
    order = np.argsort(W[:, 1], kind="stable")
    cum = np.cumsum(w[order])
    total = cum[-1]
    if not total > 0:
        raise ZeroWeightError(f"no window point within the kernel support around z1={z1}")
    k = np.searchsorted(W[order, 1], z2, side="right")
    return z1, (float(cum[k - 1] / total) if k else 0.0)


def nudge_interior(u, m):
    """Move exact 0 and 1 values to ``1/(2(m+1))`` and ``1 - 1/(2(m+1))``."""
    u = np.array(u, dtype=np.float64, copy=True)
    eps = 1.0 / (2.0 * (m + 1))
    u[u <= 0.0] = eps
    u[u >= 1.0] = 1.0 - eps
    return u


def rolling_probtiles_reference(x, m, kernel=KernelSpec(), jitter=None, rng=None,
                                orientation=0):
    """Out-of-sample probtiles and their empirical Rosenblatt transform.

    For each step ``t`` the trailing ``m`` observations ``x[t:t+m]`` form the
    forecast sample and ``x[t+m]`` is the realisation. The realisation is
    mapped with the randomized empirical cdf of each window marginal and the
    window itself is mapped to pseudo-observations; the empirical Rosenblatt
    transform of the realised point is then taken against the window.

    Parameters
    ----------
    x : (m + n, 2) array
    m : int
        Window length.
    jitter : (n, 2) array of uniforms, optional
        Position of each realised probtile inside its cdf step; drawn from
        ``rng`` when omitted.

    Returns
    -------
    z : (n, 2) out-copula points
    u : (n, 2) raw out-trf-copula points (may touch 0 or 1)
    """
    x = check_pair_array(x, name="x")
    rng = check_generator(rng)
    n = len(x) - m
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and at least one point after the window")
    if jitter is None:
        jitter = rng.random((n, 2))
    c, s = (0, 1) if orientation == 0 else (1, 0)
    z = np.empty((n, 2))
    u = np.empty((n, 2))
    for t in range(n):
        win = x[t:t + m]
        new = x[t + m]
        for j in range(2):
            srt = np.sort(win[:, j])
            k = np.searchsorted(srt, new[j], side="left")
            e = np.searchsorted(srt, new[j], side="right") - k
            z[t, j] = (k + jitter[t, j] * (e + 1)) / (m + 1)
        pc = pseudo_observations(win[:, c], rng)
        ps = pseudo_observations(win[:, s], rng)
        w = kernel.weights(pc - z[t, c])
        total = w.sum()
        if not total > 0:
            raise ZeroWeightError(f"empty kernel support at step {t}")
        u[t, c] = z[t, c]
        u[t, s] = w[ps <= z[t, s]].sum() / total
    return z, u


@numba.njit(cache=True)
def _rolling_walk(x1, x2, m, jitter, gaussian, delta):
    n = x1.shape[0] - m
    w1 = x1[:m].copy()
    w2 = x2[:m].copy()
    r1 = np.empty(m)
    r2 = np.empty(m)
    o = np.argsort(w1)
    for i in range(m):
        r1[o[i]] = i + 1.0
    o = np.argsort(w2)
    for i in range(m):
        r2[o[i]] = i + 1.0
    z = np.empty((n, 2))
    u = np.empty((n, 2))
    denom = m + 1.0
    two_d2 = 2.0 * delta * delta
    oldest = 0
    for t in range(n):
        v1 = x1[m + t]
        v2 = x2[m + t]
        k1 = 0
        k2 = 0
        for j in range(m):
            if w1[j] < v1:
                k1 += 1
            if w2[j] < v2:
                k2 += 1
        a = (k1 + jitter[t, 0]) / denom
        b = (k2 + jitter[t, 1]) / denom
        z[t, 0] = a
        z[t, 1] = b
        num = 0.0
        tot = 0.0
        for j in range(m):
            d = r1[j] / denom - a
            if gaussian:
                wt = np.exp(-(d * d) / two_d2)
            else:
                wt = 1.0 if abs(d) <= delta else 0.0
            tot += wt
            if r2[j] / denom <= b:
                num += wt
        u[t, 0] = a
        u[t, 1] = num / tot if tot > 0 else np.nan
        o1 = w1[oldest]
        o2 = w2[oldest]
        for j in range(m):
            if j == oldest:
                continue
            if w1[j] > o1:
                r1[j] -= 1.0
            if w1[j] > v1:
                r1[j] += 1.0
            if w2[j] > o2:
                r2[j] -= 1.0
            if w2[j] > v2:
                r2[j] += 1.0
        r1[oldest] = k1 - (1 if o1 < v1 else 0) + 1.0
        r2[oldest] = k2 - (1 if o2 < v2 else 0) + 1.0
        w1[oldest] = v1
        w2[oldest] = v2
        oldest = (oldest + 1) % m
    return z, u


def rolling_probtiles(x, m, kernel=KernelSpec(), jitter=None, rng=None, orientation=0):
    """Same contract as :func:`rolling_probtiles_reference`.

    Tie-free inputs go through a compiled walk that updates window ranks
    incrementally (O(m) per step); inputs with tied values use the
    reference loop, which breaks ties at random.
    """
    x = check_pair_array(x, name="x")
    n = len(x) - m
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and at least one point after the window")
    rng = check_generator(rng)
    if jitter is None:
        jitter = rng.random((n, 2))
    if np.unique(x[:, 0]).size < len(x) or np.unique(x[:, 1]).size < len(x):
        return rolling_probtiles_reference(x, m, kernel, jitter, rng, orientation)
    c, s = (0, 1) if orientation == 0 else (1, 0)
    z, u = _rolling_walk(np.ascontiguousarray(x[:, c]), np.ascontiguousarray(x[:, s]), m,
                         np.ascontiguousarray(jitter[:, [c, s]]),
                         kernel.shape == "gaussian", kernel.half_width)
    if np.isnan(u[:, 1]).any():
        raise ZeroWeightError("empty kernel support in the rolling walk")
    if orientation == 1:
        z, u = z[:, ::-1].copy(), u[:, ::-1].copy()
    return z, u


class RosenblattTransformer(TransformerMixin, BaseEstimator):
    """Analytic Rosenblatt transform with a Student copula.

    ``fit`` estimates the copula on in-sample probtiles unless ``rho`` and
    ``nu`` are both given; ``transform`` maps probtiles to the in-trf-copula.
    """

    def __init__(self, rho=None, nu=None, orientation=0):
        self.rho = rho
        self.nu = nu
        self.orientation = orientation

    def fit(self, X, y=None):
        Z = check_unit_square(X, name="X")
        if self.rho is not None and self.nu is not None:
            self.params_ = StudentCopulaParams(self.rho, self.nu)
        else:
            self.params_, self.loglik_ = fit_student_copula(Z)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return rosenblatt_analytic(check_unit_square(X, name="X"), self.params_,
                                   _check_orientation(self.orientation))


class EmpiricalRosenblattTransformer(TransformerMixin, BaseEstimator):
    """Empirical Rosenblatt transform against a fixed window of copula points."""

    def __init__(self, kernel="gaussian", half_width=0.03, orientation=0):
        self.kernel = kernel
        self.half_width = half_width
        self.orientation = orientation

    def fit(self, X, y=None):
        self.window_ = check_unit_square(X, name="X", min_samples=2)
        self.kernel_ = KernelSpec(self.kernel, self.half_width)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "window_")
        Z = check_unit_square(X, name="X")
        c, s = (0, 1) if _check_orientation(self.orientation) == 0 else (1, 0)
        W = self.window_[:, [c, s]]
        U = Z.copy()
        for i, z in enumerate(Z):
            U[i, s] = rosenblatt_empirical(W, (z[c], z[s]), self.kernel_)[1]
        return U
