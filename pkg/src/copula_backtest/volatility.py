"""Long-memory ARCH volatility forecast and volatility-discounted innovations.

The variance forecast is a weighted sum of exponential moving averages of
squared returns with characteristic times on a geometric grid. Weights
decay logarithmically with the characteristic time.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_sample
from .market_data import DataError, ReturnSeries


@dataclass(frozen=True)
class LmArchParams:
    tau_min: float = 4.0
    tau_max: float = 512.0
    geometric_factor: float = math.sqrt(2.0)
    tau_0: float = 1560.0
    burn_in: int = 250
    component_count: int = field(init=False)

    def __post_init__(self):
        if self.tau_min < 1:
            raise ValueError("tau_min must be >= 1")
        if self.geometric_factor <= 1:
            raise ValueError("geometric_factor must be > 1")
        if self.tau_max < self.tau_min:
            raise ValueError("tau_max must be >= tau_min")
        if self.tau_0 <= self.tau_max:
            raise ValueError("tau_0 must be > tau_max")
        if self.burn_in < self.tau_min:
            raise ValueError("burn_in must be >= tau_min")
        ratio = math.log(self.tau_max / self.tau_min) / math.log(self.geometric_factor)
        # guard against ratio = 14.000000000000002 for exact grids
        k = int(math.ceil(ratio - 1e-9)) + 1
        object.__setattr__(self, "component_count", k)

    @property
    def taus(self):
        k = np.arange(self.component_count)
        return self.tau_min * self.geometric_factor ** k

    @property
    def decays(self):
        return np.exp(-1.0 / self.taus)

    @property
    def weights(self):
        w = 1.0 - np.log(self.taus) / math.log(self.tau_0)
        return w / w.sum()

    def to_dict(self):
        return {"tau_min": self.tau_min, "tau_max": self.tau_max,
                "geometric_factor": self.geometric_factor, "tau_0": self.tau_0,
                "burn_in": self.burn_in}


@dataclass(frozen=True)
class VolatilitySeries:
    """``sigmas[i]`` is the forecast made at ``dates[i]`` for the next day."""
    asset_id: str
    dates: tuple
    sigmas: np.ndarray


@dataclass(frozen=True)
class InnovationSeries:
    asset_id: str
    dates: tuple
    values: np.ndarray


def component_variances(r, params):
    """EWMA variances, one column per component, after each return.

    All components start from the mean square of the first ``burn_in``
    returns.
    """
    r = np.asarray(r, dtype=np.float64)
    if len(r) <= params.burn_in:
        raise DataError(
            f"series of length {len(r)} is too short for burn_in={params.burn_in}")
    v0 = float(np.mean(r[:params.burn_in] ** 2))
    if v0 == 0.0:
        raise DataError("returns in the initialization window are all zero")
    r2 = r * r
    out = np.empty((len(r), params.component_count))
    for k, mu in enumerate(params.decays):
        out[:, k], _ = lfilter([1.0 - mu], [1.0, -mu], r2, zi=[mu * v0])
    return out


def lmarch_variance(r, params):
    """Variance forecast after each return (full length, burn-in included)."""
    return component_variances(r, params) @ params.weights


def lmarch_forecast(returns, params=None):
    """One-step volatility forecasts from the end of the burn-in onward.

    The first forecast is made on the last day of the initialization window,
    so that every return after the window gets an innovation.
    """
    params = params or LmArchParams()
    sigma = np.sqrt(lmarch_variance(returns.values, params))
    start = params.burn_in - 1
    return VolatilitySeries(returns.asset_id, tuple(returns.dates[start:]), sigma[start:])


def compute_innovations(returns, vol):
    """``eps(t+1) = r(t+1) / sigma(t)`` for every return with a prior forecast."""
    dates = returns.dates
    if len(vol.dates) == 0:
        raise DataError("empty volatility series")
    try:
        start = dates.index(vol.dates[0])
    except ValueError:
        raise DataError("volatility dates are not aligned with return dates") from None
    if tuple(dates[start:start + len(vol.dates)]) != tuple(vol.dates):
        raise DataError("volatility dates are not aligned with return dates")
    sig = np.asarray(vol.sigmas, dtype=np.float64)
    if np.any(~(sig > 0)):
        raise DataError("volatility must be strictly positive")
    stop = min(start + len(sig) + 1, len(dates))
    n = stop - start - 1
    eps = returns.values[start + 1:stop] / sig[:n]
    return InnovationSeries(returns.asset_id, tuple(dates[start + 1:stop]), eps)


class LMArchFilter(TransformerMixin, BaseEstimator):
    """Volatility discounting as a transformer.

    ``transform`` maps a 1-d return array to innovations; the output is
    shorter than the input by ``burn_in`` observations.

    Parameters
    ----------
    tau_min, tau_max, geometric_factor, tau_0 : float
        Geometric grid of EWMA characteristic times (in days) and the
        horizon of the logarithmic weight decay.
    burn_in : int
        Number of initial returns used to initialise the EWMAs and dropped
        from the output.
    """

    def __init__(self, tau_min=4.0, tau_max=512.0, geometric_factor=math.sqrt(2.0),
                 tau_0=1560.0, burn_in=250):
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.geometric_factor = geometric_factor
        self.tau_0 = tau_0
        self.burn_in = burn_in

    def _params(self):
        return LmArchParams(self.tau_min, self.tau_max, self.geometric_factor,
                            self.tau_0, self.burn_in)

    def fit(self, X, y=None):
        r = check_sample(X, name="returns", min_samples=2)
        self.params_ = self._params()
        self.weights_ = self.params_.weights
        self.taus_ = self.params_.taus
        self.sigma_ = np.sqrt(lmarch_variance(r, self.params_))
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        r = check_sample(X, name="returns", min_samples=2)
        sigma = np.sqrt(lmarch_variance(r, self.params_))
        b = self.params_.burn_in
        return r[b:] / sigma[b - 1:-1]

    def forecast(self, X):
        """Volatility forecast after the last return of ``X``."""
        check_is_fitted(self, "params_")
        r = check_sample(X, name="returns", min_samples=2)
        return float(np.sqrt(lmarch_variance(r, self.params_)[-1]))


def returns_from_array(values, asset_id="asset", dates=None):
    """Wrap a bare array as a :class:`ReturnSeries` with integer-string dates."""
    values = np.asarray(values, dtype=np.float64)
    if dates is None:
        dates = [f"{i:08d}" for i in range(len(values))]
    return ReturnSeries(asset_id, dates, values)
