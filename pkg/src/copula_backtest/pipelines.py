"""End-to-end backtests: in-sample copula validation, out-of-sample
forecast validation, cross-sectional studies and risk scenarios."""

import hashlib
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from ._validation import check_generator, check_pair_array, check_probability, check_sample
from .copula import CopulaSample, StudentCopulaParams, fit_student_copula, kendall_init
from .dist import (ConvergenceError, DegenerateSampleError, dependence_measures,
                   fit_student_marginal, pseudo_observations)
from .market_data import SyncedPair, synchronize_pair
from .stat_tests import (CalibrationStore, calibrate_insample, calibrate_outofsample,
                         cvm_uniformity, gr_statistic, ks_uniformity, p_value,
                         shift_scale_p_value, tile_statistic)
from .transforms import KernelSpec, nudge_interior, rolling_probtiles, rosenblatt_analytic

logger = logging.getLogger(__name__)

REFERENCE_COPULA = StudentCopulaParams(0.4, 6.0)
FALLBACK_NU = 6.0
GR_CAVEAT = ("GR statistic not calibrated out-of-sample: its null distribution "
             "depends on the copula correlation")


@dataclass
class BacktestConfig:
    tile_N: int = 10
    window: int = 500
    kernel: KernelSpec = field(default_factory=KernelSpec)
    orientation: int = 0
    n_sim_in: int = 2000
    n_sim_out: int = 1000
    calibration_seed: int = 12345
    reference_copula: StudentCopulaParams = REFERENCE_COPULA
    fit_copula: bool = True
    store_dir: str = None
    workers: int = 1

    def to_dict(self):
        """Snapshot for reports; ``workers`` is left out since it never changes results."""
        d = asdict(self)
        d.pop("workers")
        d["kernel"] = self.kernel.to_dict()
        d["reference_copula"] = {"rho": self.reference_copula.rho,
                                 "nu": self.reference_copula.nu}
        return d


@dataclass
class BacktestReport:
    asset_ids: tuple
    setting: str
    n: int
    orientation: int
    seed: object
    config: dict
    marginal_fits: list = field(default_factory=list)
    marginal_tests: list = field(default_factory=list)
    dependence: dict = None
    copula_fit: dict = None
    tests: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    plot_data: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def p_value(self, kind="tile"):
        t = self.tests.get(kind)
        return None if t is None else t.get("p_value")

    def to_dict(self, include_samples=False):
        d = {"asset_ids": list(self.asset_ids), "setting": self.setting, "n": self.n,
             "orientation": self.orientation,
             "conditioning_asset": self.asset_ids[self.orientation],
             "seed": self.seed, "config": self.config,
             "marginal_fits": self.marginal_fits, "marginal_tests": self.marginal_tests,
             "dependence": self.dependence, "copula_fit": self.copula_fit,
             "tests": self.tests, "flags": list(self.flags)}
        if include_samples:
            d["samples"] = {k: v.points.tolist() for k, v in self.samples.items()}
        return d


@dataclass
class CrossSectionReport:
    asset_ids: list
    setting: str
    order: list
    order_objective: float
    rho: np.ndarray
    log_nu: np.ndarray
    p_values: dict
    rejections: dict
    n_ordered_pairs: int
    lengths: np.ndarray
    errors: dict = field(default_factory=dict)
    seed: object = None
    config: dict = None

    def rejection_rate(self, kind="tile"):
        return self.rejections[kind] / self.n_ordered_pairs

    def to_dict(self):
        clean = lambda a: [[None if not np.isfinite(v) else float(v) for v in row] for row in a]  # noqa: E731
        return {"asset_ids": self.asset_ids, "setting": self.setting,
                "order": [int(i) for i in self.order],
                "order_objective": float(self.order_objective),
                "rho": clean(self.rho), "log_nu": clean(self.log_nu),
                "p_values": {k: clean(v) for k, v in self.p_values.items()},
                "rejections_at_5pct": self.rejections,
                "n_ordered_pairs": self.n_ordered_pairs,
                "lengths": clean(self.lengths), "errors": self.errors,
                "seed": self.seed, "config": self.config}


def pair_rng(seed, asset_ids):
    """Generator seeded from the global seed and the (unordered) pair ids."""
    tag = "\x1f".join(sorted(str(a) for a in asset_ids))
    digest = hashlib.sha256(tag.encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + words))


def _as_pair(pair):
    if isinstance(pair, SyncedPair):
        return pair
    X = check_pair_array(pair, name="pair")
    return SyncedPair(("x1", "x2"), [f"{i:08d}" for i in range(len(X))], X[:, 0], X[:, 1])


def folded_cdf(sample):
    """Folded empirical cdf ``min(#{<= x}, #{>= x}) / n`` at the sorted values.

    Values are capped at 1/2, reached at the median; counting both sides
    keeps the curve symmetric for symmetric samples.
    """
    x = np.sort(check_sample(sample, name="sample", min_samples=2))
    n = len(x)
    le = np.searchsorted(x, x, side="right")
    ge = n - np.searchsorted(x, x, side="left")
    return x, np.minimum(np.minimum(le, ge) / n, 0.5)


def _marginals(X):
    fits = []
    for j in range(2):
        try:
            fits.append(fit_student_marginal(X[:, j]).to_dict())
        except (ConvergenceError, DegenerateSampleError, ValueError) as exc:
            fits.append({"error": f"{type(exc).__name__}: {exc}"})
    return fits


def _dependence(X):
    try:
        p, k, s = dependence_measures(X)
        return {"pearson": p, "kendall": k, "spearman": s}
    except (DegenerateSampleError, ValueError) as exc:
        return {"error": str(exc)}


def _uniformity(Z):
    out = []
    for j in range(2):
        out.append({"ks": ks_uniformity(Z[:, j]).to_dict(),
                    "cvm": cvm_uniformity(Z[:, j]).to_dict()})
    return out


def _fit_copula(Z):
    """Fit with fallback; returns (params or None, info dict, flags)."""
    flags = []
    try:
        params, ll = fit_student_copula(Z)
        info = {"rho": params.rho, "nu": params.nu, "log_nu": math.log(params.nu),
                "loglik": ll, "normal_like": params.normal_like, "fallback": False}
        return params, info, flags
    except ConvergenceError as exc:
        rho0, tau = kendall_init(Z)
        if abs(rho0) >= 1.0 - 1e-9:
            flags.append("degenerate: comonotone or countermonotone pair")
            return None, {"rho0": rho0, "tau": tau, "error": str(exc)}, flags
        flags.append("copula fit failed; using Kendall-tau rho and nu=6")
        params = StudentCopulaParams(rho0, FALLBACK_NU)
        return params, {"rho": rho0, "nu": FALLBACK_NU, "log_nu": math.log(FALLBACK_NU),
                        "loglik": None, "normal_like": False, "fallback": True,
                        "error": str(exc), "diagnostics": exc.diagnostics}, flags


def _list(tables):
    if tables is None:
        return None
    return [tables] if not isinstance(tables, (list, tuple)) else list(tables)


def insample_tables(config, lengths, kinds=("tile", "gr")):
    """In-sample tables at each length, from the store when configured."""
    out = {k: [] for k in kinds}
    store = CalibrationStore(config.store_dir) if config.store_dir else None
    for n in sorted(set(int(v) for v in lengths)):
        if store is not None:
            tabs, _ = store.insample(kinds, n, config.tile_N, config.n_sim_in,
                                     config.calibration_seed, config.workers)
        else:
            tabs = calibrate_insample(tuple(kinds), n, config.tile_N, config.n_sim_in,
                                      config.calibration_seed, config.workers)
        for k in kinds:
            out[k].append(tabs[k])
    return out


def outsample_tables(config, lengths):
    """Out-of-sample tile tables for the reference copula at each length."""
    out = []
    store = CalibrationStore(config.store_dir) if config.store_dir else None
    for n in sorted(set(int(v) for v in lengths)):
        if store is not None:
            tabs, _ = store.outofsample(("tile",), config.reference_copula, n, config.window,
                                        config.kernel, config.tile_N, config.n_sim_out,
                                        config.calibration_seed + 1, config.workers)
            out.append(tabs["tile"])
        else:
            out.append(calibrate_outofsample("tile", config.reference_copula, n, config.window,
                                             config.kernel, config.tile_N, config.n_sim_out,
                                             config.calibration_seed + 1, config.workers))
    return out


def _insample_core(pair, config, tables, rng, orientations):
    X = pair.to_array()
    n = len(X)
    base = dict(asset_ids=pair.asset_ids, setting="in-sample", n=n,
                seed=None, config=config.to_dict())
    marg = _marginals(X)
    dep = _dependence(X)
    Z = np.column_stack([pseudo_observations(X[:, 0], rng), pseudo_observations(X[:, 1], rng)])
    utests = _uniformity(Z)
    params, info, flags = _fit_copula(Z)
    in_cop = CopulaSample(Z, "in-copula", pair.asset_ids)
    plots = {"folded_innovations": [folded_cdf(X[:, j]) for j in range(2)],
             "folded_probtiles": [folded_cdf(Z[:, j]) for j in range(2)]}
    reports = []
    for o in orientations:
        rep = BacktestReport(orientation=o, marginal_fits=marg, marginal_tests=utests,
                             dependence=dep, copula_fit=info, plot_data=plots,
                             flags=list(flags), **base)
        rep.samples["in-copula"] = in_cop
        if params is not None:
            U = rosenblatt_analytic(Z, params, o)
            rep.samples["in-trf-copula"] = CopulaSample(U, "in-trf-copula", pair.asset_ids,
                                                        {"orientation": o})
            s_tile = tile_statistic(U, config.tile_N)
            s_gr = gr_statistic(U)
            rep.tests["tile"] = p_value(s_tile, tables["tile"], n).to_dict()
            rep.tests["gr"] = p_value(s_gr, tables["gr"], n).to_dict()
        reports.append(rep)
    return reports


def insample_backtest(pair, config=None, tables=None, seed=0, orientation=None):
    """In-sample chain: innovations to pseudo-observations, Student copula
    fit, analytic Rosenblatt transform, tile and GR tests.

    Parameters
    ----------
    pair : SyncedPair or (n, 2) array of innovations
    config : BacktestConfig
    tables : dict ``{"tile": [...], "gr": [...]}`` of in-sample tables.
        Calibrated at the pair length when omitted.
    seed : int or Generator
        Stream for random tie-breaking.
    """
    config = config or BacktestConfig()
    pair = _as_pair(pair)
    if len(pair) < 1000:
        raise ValueError(f"in-sample backtest needs >= 1000 observations, got {len(pair)}")
    if tables is None:
        tables = insample_tables(config, [len(pair)])
    tables = {k: _list(v) for k, v in tables.items()}
    rng = check_generator(seed)
    o = config.orientation if orientation is None else orientation
    rep = _insample_core(pair, config, tables, rng, [o])[0]
    rep.seed = seed if isinstance(seed, (int, type(None))) else "generator"
    return rep


def _outsample_core(pair, config, in_tables, out_tables, rng, orientations):
    X = pair.to_array()
    m = config.window
    n = len(X) - m
    jitter = rng.random((n, 2))
    reports = []
    z = None
    fit = None
    for o in orientations:
        z, u = rolling_probtiles(X, m, config.kernel, jitter=jitter, rng=rng, orientation=o)
        U = nudge_interior(u, m)
        if fit is None:
            if config.fit_copula:
                _, info, flags = _fit_copula(z)
            else:
                info, flags = None, []
            fit = (info, flags, _uniformity(z),
                   {"folded_probtiles": [folded_cdf(z[:, j]) for j in range(2)]})
        info, flags, utests, plots = fit
        rep = BacktestReport(pair.asset_ids, "out-of-sample", n, o, None, config.to_dict(),
                             marginal_tests=utests, dependence=_dependence(X[m:]),
                             copula_fit=info, plot_data=plots, flags=list(flags))
        rep.samples["out-copula"] = CopulaSample(z, "out-copula", pair.asset_ids)
        rep.samples["out-trf-copula"] = CopulaSample(U, "out-trf-copula", pair.asset_ids,
                                                     {"orientation": o})
        rep.plot_data["out_trf_raw"] = u
        s_tile = tile_statistic(U, config.tile_N)
        rep.tests["tile"] = shift_scale_p_value(s_tile, in_tables, out_tables, n).to_dict()
        rep.tests["gr"] = {"statistic": gr_statistic(U), "p_value": None,
                           "calibrated": False, "caveat": GR_CAVEAT}
        reports.append(rep)
    return reports


def outofsample_backtest(pair, config=None, in_tables=None, out_tables=None, seed=0,
                         orientation=None):
    """Out-of-sample chain with a trailing window of historical innovations.

    For each day after the first ``window`` days the realised innovations
    are mapped with the window's empirical cdfs, the window is mapped to
    pseudo-observations and the realised point goes through the empirical
    Rosenblatt transform. The tile statistic of the transformed points gets
    its p-value from the in-sample null through the shift-and-scale map.
    """
    config = config or BacktestConfig()
    pair = _as_pair(pair)
    m = config.window
    if len(pair) < m + 500:
        raise ValueError(f"out-of-sample backtest needs >= {m + 500} observations")
    n = len(pair) - m
    if in_tables is None:
        in_tables = insample_tables(config, [n], kinds=("tile",))["tile"]
    if out_tables is None:
        out_tables = outsample_tables(config, [n])
    rng = check_generator(seed)
    o = config.orientation if orientation is None else orientation
    rep = _outsample_core(pair, config, _list(in_tables), _list(out_tables), rng, [o])[0]
    rep.seed = seed if isinstance(seed, (int, type(None))) else "generator"
    return rep


class InSampleBacktest(BaseEstimator):
    """Estimator wrapper around :func:`insample_backtest`; ``fit`` stores ``report_``."""

    def __init__(self, tile_N=10, orientation=0, n_sim=2000, calibration_seed=12345,
                 random_state=0):
        self.tile_N = tile_N
        self.orientation = orientation
        self.n_sim = n_sim
        self.calibration_seed = calibration_seed
        self.random_state = random_state

    def fit(self, X, y=None, tables=None):
        cfg = BacktestConfig(tile_N=self.tile_N, orientation=self.orientation,
                             n_sim_in=self.n_sim, calibration_seed=self.calibration_seed)
        self.report_ = insample_backtest(X, cfg, tables, seed=self.random_state)
        self.copula_ = self.report_.copula_fit
        return self


class OutOfSampleBacktest(BaseEstimator):
    """Estimator wrapper around :func:`outofsample_backtest`."""

    def __init__(self, window=500, kernel="gaussian", half_width=0.03, tile_N=10,
                 orientation=0, n_sim_in=2000, n_sim_out=1000, calibration_seed=12345,
                 fit_copula=True, random_state=0):
        self.window = window
        self.kernel = kernel
        self.half_width = half_width
        self.tile_N = tile_N
        self.orientation = orientation
        self.n_sim_in = n_sim_in
        self.n_sim_out = n_sim_out
        self.calibration_seed = calibration_seed
        self.fit_copula = fit_copula
        self.random_state = random_state

    def fit(self, X, y=None, in_tables=None, out_tables=None):
        cfg = BacktestConfig(tile_N=self.tile_N, window=self.window,
                             kernel=KernelSpec(self.kernel, self.half_width),
                             orientation=self.orientation, n_sim_in=self.n_sim_in,
                             n_sim_out=self.n_sim_out, calibration_seed=self.calibration_seed,
                             fit_copula=self.fit_copula)
        self.report_ = outofsample_backtest(X, cfg, in_tables, out_tables,
                                            seed=self.random_state)
        return self


# ----------------------------------------------------------------------------
# scenarios and risk measures

@dataclass(frozen=True)
class ScenarioSet:
    origin: object
    scenarios: np.ndarray
    asset_ids: tuple = ()
    horizon: str = "1d"


def generate_scenarios(windows, sigmas, origin=None, asset_ids=(), m=500):
    """Return scenarios ``sigma_j * eps_j(t - i)`` for lags ``0 <= i < m``.

    ``windows`` holds one innovation array per asset, ordered oldest to
    newest and synchronized across assets; row ``i`` of the result uses the
    innovation at lag ``i``.
    """
    W = np.column_stack([np.asarray(w, dtype=np.float64) for w in windows])
    if len(W) < m:
        raise ValueError(f"innovation windows must hold at least {m} values")
    sig = np.asarray(sigmas, dtype=np.float64).reshape(-1)
    if sig.size != W.shape[1]:
        raise ValueError("one volatility per asset is required")
    if np.any(sig <= 0):
        raise ValueError("volatilities must be positive")
    lagged = W[::-1][:m]
    return ScenarioSet(origin, lagged * sig, tuple(asset_ids))


def risk_measures(scenarios, alpha=0.99, weights=None):
    """Historical VaR and expected shortfall of the scenario losses.

    ``scenarios`` holds returns (a ScenarioSet, a 1-d array or one column
    per asset); losses are their negatives. With ``weights`` the portfolio
    return ``r @ weights`` is used. VaR is the linearly interpolated
    ``alpha`` quantile of the losses and ES the mean of the losses strictly
    beyond it.
    """
    alpha = check_probability(alpha, "alpha")
    R = scenarios.scenarios if isinstance(scenarios, ScenarioSet) else np.asarray(scenarios, dtype=np.float64)
    if weights is not None:
        R = R @ np.asarray(weights, dtype=np.float64)
    return var_es(-R, alpha)


def var_es(losses, alpha):
    """VaR and ES of a loss sample (columns treated separately)."""
    L = np.asarray(losses, dtype=np.float64)
    if L.shape[0] < 2:
        raise ValueError("at least 2 scenarios are required")
    var = np.quantile(L, alpha, axis=0)
    if L.ndim == 1:
        tail = L[L > var]
        es = tail.mean() if tail.size else var
        return float(var), float(es)
    es = np.array([L[L[:, j] > var[j], j].mean() if np.any(L[:, j] > var[j]) else var[j]
                   for j in range(L.shape[1])])
    return var, es


# ----------------------------------------------------------------------------
# asset ordering

def _distance_weights(n):
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    d = np.minimum(d, n - d)
    W = np.zeros((n, n))
    off = d > 0
    W[off] = 1.0 + np.log(d[off])
    return W


def ordering_objective(rho, perm):
    A = np.abs(np.asarray(rho, dtype=np.float64))
    p = np.asarray(perm)
    return float(np.sum(_distance_weights(len(p)) * A[np.ix_(p, p)]))


def order_assets(rho_matrix, n_iter=50000, seed=0, t_final_ratio=1e-4):
    """Permutation approximately minimising ``sum (1 + ln d_ij) |rho|``.

    ``d_ij`` is the periodic distance between positions. Simulated annealing
    over pairwise swaps with geometric cooling; returns the best permutation
    visited and its objective.
    """
    A = np.abs(np.asarray(rho_matrix, dtype=np.float64))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("rho_matrix must be square")
    n = A.shape[0]
    if n < 3:
        perm = np.arange(n)
        return perm, ordering_objective(A, perm)
    W = _distance_weights(n)
    rng = np.random.default_rng(seed)
    perm = np.arange(n)
    cur = float(np.sum(W * A[np.ix_(perm, perm)]))
    best, best_perm = cur, perm.copy()
    pairs = rng.integers(0, n, size=(n_iter, 2))
    accept = rng.random(n_iter)
    # initial temperature from the typical size of a swap move
    probe = []
    for i, j in pairs[:min(200, n_iter)]:
        if i != j:
            q = perm.copy()
            q[i], q[j] = q[j], q[i]
            probe.append(abs(float(np.sum(W * A[np.ix_(q, q)])) - cur))
    t0 = max(np.mean(probe) if probe else 1.0, 1e-12)
    cool = t_final_ratio ** (1.0 / max(n_iter - 1, 1))
    T = t0
    for it in range(n_iter):
        i, j = pairs[it]
        if i != j:
            perm[i], perm[j] = perm[j], perm[i]
            new = float(np.sum(W * A[np.ix_(perm, perm)]))
            delta = new - cur
            if delta <= 0 or accept[it] < math.exp(-delta / T):
                cur = new
                if cur < best - 1e-12:
                    best, best_perm = cur, perm.copy()
            else:
                perm[i], perm[j] = perm[j], perm[i]
        T *= cool
    return best_perm, best


# ----------------------------------------------------------------------------
# cross-section

def _pair_job(a, b, setting, config, seed, in_tables, out_tables):
    pair = synchronize_pair(a, b)
    rng = pair_rng(seed, pair.asset_ids)
    if setting == "in-sample":
        return _insample_core(pair, config, in_tables, rng, [0, 1])
    return _outsample_core(pair, config, in_tables["tile"], out_tables, rng, [0, 1])


def cross_section(assets, setting="in-sample", config=None, seed=0, workers=1,
                  order_iterations=50000):
    """Run the chosen backtest on every ordered pair of assets.

    ``assets`` are innovation series (objects with ``asset_id``, ``dates``
    and ``values``). Each unordered pair is synchronized once; both
    Rosenblatt orientations give the two ordered pairs. Entry ``[i, j]`` of a
    p-value matrix conditions on asset ``i``.
    """
    config = config or BacktestConfig()
    if setting not in ("in-sample", "out-of-sample"):
        raise ValueError(f"unknown setting {setting!r}")
    k = len(assets)
    if k < 3:
        raise ValueError("cross_section needs at least 3 assets")
    ids = [a.asset_id for a in assets]
    pairs = list(itertools.combinations(range(k), 2))
    lengths = np.full((k, k), np.nan)
    test_len = {}
    errors = {}
    for i, j in pairs:
        try:
            n = len(synchronize_pair(assets[i], assets[j]))
        except ValueError as exc:
            errors[f"{ids[i]}|{ids[j]}"] = str(exc)
            continue
        lengths[i, j] = lengths[j, i] = n
        test_len[(i, j)] = n if setting == "in-sample" else n - config.window
    valid = [p for p in pairs if p in test_len and
             test_len[p] >= (1000 if setting == "in-sample" else 500)]
    for p in pairs:
        if p in test_len and p not in valid:
            errors[f"{ids[p[0]]}|{ids[p[1]]}"] = "series too short after synchronization"
    if not valid:
        raise ValueError("no pair long enough for the backtest")
    span = [min(test_len[p] for p in valid), max(test_len[p] for p in valid)]
    kinds = ("tile", "gr") if setting == "in-sample" else ("tile",)
    in_tables = insample_tables(config, span, kinds)
    out_tables = outsample_tables(config, span) if setting == "out-of-sample" else None

    jobs = [delayed(_pair_job)(assets[i], assets[j], setting, config, seed,
                               in_tables, out_tables) for i, j in valid]
    if workers > 1:
        results = Parallel(n_jobs=workers)(jobs)
    else:
        results = [fn(*a, **kw) for fn, a, kw in jobs]

    rho = np.full((k, k), np.nan)
    log_nu = np.full((k, k), np.nan)
    np.fill_diagonal(rho, 1.0)
    pmats = {kd: np.full((k, k), np.nan) for kd in kinds}
    reports = {}
    for (i, j), reps in zip(valid, results):
        fit = reps[0].copula_fit
        if fit and fit.get("rho") is not None:
            rho[i, j] = rho[j, i] = fit["rho"]
            log_nu[i, j] = log_nu[j, i] = fit["log_nu"]
        for rep in reps:
            a, b = (i, j) if rep.orientation == 0 else (j, i)
            reports[(a, b)] = rep
            for kd in kinds:
                p = rep.p_value(kd)
                if p is not None:
                    pmats[kd][a, b] = p
            if rep.flags:
                errors[f"{ids[a]}|{ids[b]}"] = "; ".join(rep.flags)
    rej = {kd: int(np.sum(pmats[kd][np.isfinite(pmats[kd])] < 0.05)) for kd in kinds}
    rho_for_order = np.nan_to_num(rho, nan=0.0)
    order, obj = order_assets(rho_for_order, n_iter=order_iterations, seed=seed)
    report = CrossSectionReport(ids, setting, list(order), obj, rho, log_nu, pmats, rej,
                                2 * len(valid), lengths, errors, seed, config.to_dict())
    report.pair_reports = reports
    return report
