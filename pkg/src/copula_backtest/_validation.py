"""Input validation helpers shared by the estimators and functions."""

import numpy as np
from sklearn.utils import check_array


def check_pair_array(X, name="X", min_samples=1):
    """Return ``X`` as a float (n, 2) array of finite values."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples,
                    input_name=name)
    if X.shape[1] != 2:
        raise ValueError(f"{name} must have exactly 2 columns, got {X.shape[1]}")
    return X


def check_unit_square(X, name="X", open_interval=True, min_samples=1):
    """Validate points of a bivariate copula sample.

    With ``open_interval`` every coordinate must lie strictly inside (0, 1),
    otherwise the closed square is accepted.
    """
    X = check_pair_array(X, name=name, min_samples=min_samples)
    if open_interval:
        bad = (X <= 0.0) | (X >= 1.0)
        if bad.any():
            i = int(np.argwhere(bad.any(axis=1))[0, 0])
            raise ValueError(
                f"{name} must lie strictly inside the unit square; "
                f"row {i} is {X[i].tolist()}")
    else:
        if ((X < 0.0) | (X > 1.0)).any():
            raise ValueError(f"{name} must lie inside the closed unit square")
    return X


def check_probability(p, name="p"):
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")
    return p


def check_sample(x, name="sample", min_samples=1):
    """Return a finite 1-d float array."""
    x = check_array(np.asarray(x, dtype=np.float64).reshape(-1, 1),
                    dtype=np.float64, ensure_min_samples=min_samples,
                    input_name=name)
    return x[:, 0]


def check_rho(rho):
    rho = float(rho)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    return rho


def check_nu(nu):
    nu = float(nu)
    if not nu > 0.0 or not np.isfinite(nu):
        raise ValueError(f"nu must be a positive finite number, got {nu}")
    return nu


def check_generator(rng):
    """Turn ``None``, an int seed or a Generator into a ``numpy.random.Generator``."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer, np.random.SeedSequence)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
