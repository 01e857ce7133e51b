"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 computation
error.
"""

import argparse
import itertools
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, check_files, config_from_dict, load_config
from .copula import StudentCopulaParams
from .dist import ConvergenceError
from .io import write_csv, write_json, write_matrix
from .market_data import DataError, compute_returns, load_prices, synchronize_pair
from .pipelines import (cross_section, insample_backtest, outofsample_backtest, pair_rng,
                        insample_tables, outsample_tables)
from .simulation import simulate_prices
from .stat_tests import CalibrationError, CalibrationStore
from .volatility import compute_innovations, lmarch_forecast

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_COMPUTE = 4

logger = logging.getLogger("copula_backtest")


def _meta(cfg, command):
    return {"command": command, "config_sha256": cfg.hash, "seed": cfg.seed}


def _innovation_data(cfg):
    out = []
    for a in cfg.assets:
        prices = load_prices(a.path, a.id)
        rets = compute_returns(prices)
        vol = lmarch_forecast(rets, cfg.lmarch)
        out.append((rets, vol, compute_innovations(rets, vol)))
    return out


def cmd_innovations(cfg):
    check_files(cfg)
    outdir = Path(cfg.output_dir) / "innovations"
    meta = _meta(cfg, "innovations")
    manifest = {"files": [], "lmarch": cfg.lmarch.to_dict()}
    for rets, vol, inn in _innovation_data(cfg):
        start = rets.dates.index(inn.dates[0])
        n = len(inn.values)
        rows = zip(inn.dates, rets.values[start:start + n], vol.sigmas[:n], inn.values)
        path = write_csv(outdir / f"{inn.asset_id}.csv", ["date", "return", "sigma", "epsilon"],
                         rows, meta)
        manifest["files"].append({"asset_id": inn.asset_id, "path": path.name, "rows": n})
    write_json(outdir / "manifest.json", manifest, meta)
    return [outdir / f["path"] for f in manifest["files"]]


def _pair_lengths(inns):
    out = []
    for a, b in itertools.combinations(inns, 2):
        try:
            out.append(len(synchronize_pair(a, b)))
        except DataError:
            pass
    return out


def _lengths(cfg, inns, setting):
    if cfg.calibration.lengths:
        return sorted(int(v) for v in cfg.calibration.lengths)
    lens = _pair_lengths(inns)
    if not lens:
        raise DataError("no synchronized pair available")
    if setting == "out-of-sample":
        lens = [v - cfg.window for v in lens]
    return sorted({min(lens), max(lens)})


def cmd_calibrate(cfg):
    """Build every table the analyses need; returns the number created."""
    check_files(cfg)
    inns = [x[2] for x in _innovation_data(cfg)]
    store = CalibrationStore(cfg.store)
    before = set(store.keys())
    bt = cfg.backtest_config()
    insample_tables(bt, _lengths(cfg, inns, "in-sample"), ("tile", "gr"))
    out_lens = _lengths(cfg, inns, "out-of-sample")
    insample_tables(bt, out_lens, ("tile",))
    outsample_tables(bt, out_lens)
    keys = store.keys()
    created = len(set(keys) - before)
    write_json(Path(cfg.output_dir) / "calibration.json",
               {"store": str(cfg.store), "tables": keys}, _meta(cfg, "calibrate"))
    logger.info("created %d calibration tables", created)
    return created


def _pair_innovations(cfg):
    a, b = cfg.selected_pair()
    by_id = {x[2].asset_id: x[2] for x in _innovation_data(cfg)}
    return synchronize_pair(by_id[a.id], by_id[b.id])


def _write_samples(outdir, report, meta):
    for tag, s in report.samples.items():
        write_csv(outdir / f"{tag}.csv", ["u1", "u2"], s.points.tolist(), meta)
    for key in ("folded_innovations", "folded_probtiles"):
        for asset, (x, f) in zip(report.asset_ids, report.plot_data.get(key, [])):
            write_csv(outdir / f"{key}_{asset}.csv", ["x", "folded_cdf"], zip(x, f), meta)
    if "out_trf_raw" in report.plot_data:
        write_csv(outdir / "out-trf-copula-raw.csv", ["u1", "u2"],
                  report.plot_data["out_trf_raw"].tolist(), meta)


def cmd_insample(cfg):
    check_files(cfg)
    pair = _pair_innovations(cfg)
    bt = cfg.backtest_config()
    lens = cfg.calibration.lengths or [len(pair)]
    tables = insample_tables(bt, lens)
    rep = insample_backtest(pair, bt, tables, seed=pair_rng(cfg.seed, pair.asset_ids))
    rep.seed = cfg.seed
    outdir = Path(cfg.output_dir) / f"insample_{pair.asset_ids[0]}_{pair.asset_ids[1]}"
    meta = _meta(cfg, "insample")
    write_json(outdir / "report.json", {"report": rep.to_dict(), "config": cfg.to_dict()}, meta)
    _write_samples(outdir, rep, meta)
    return rep


def cmd_outsample(cfg):
    check_files(cfg)
    pair = _pair_innovations(cfg)
    bt = cfg.backtest_config()
    n = len(pair) - cfg.window
    lens = cfg.calibration.lengths or [n]
    in_t = insample_tables(bt, lens, ("tile",))["tile"]
    out_t = outsample_tables(bt, lens)
    rep = outofsample_backtest(pair, bt, in_t, out_t, seed=pair_rng(cfg.seed, pair.asset_ids))
    rep.seed = cfg.seed
    outdir = Path(cfg.output_dir) / f"outsample_{pair.asset_ids[0]}_{pair.asset_ids[1]}"
    meta = _meta(cfg, "outsample")
    write_json(outdir / "report.json", {"report": rep.to_dict(), "config": cfg.to_dict()}, meta)
    _write_samples(outdir, rep, meta)
    return rep


def cmd_crosssection(cfg, setting="in-sample"):
    check_files(cfg)
    inns = [x[2] for x in _innovation_data(cfg)]
    rep = cross_section(inns, setting, cfg.backtest_config(), seed=cfg.seed,
                        workers=cfg.workers)
    outdir = Path(cfg.output_dir) / f"crosssection_{setting}"
    meta = _meta(cfg, f"crosssection {setting}")
    write_json(outdir / "report.json", {"report": rep.to_dict(), "config": cfg.to_dict()}, meta)
    ids = rep.asset_ids
    write_matrix(outdir / "rho.csv", ids, rep.rho, meta)
    write_matrix(outdir / "log_nu.csv", ids, rep.log_nu, meta)
    for kind, mat in rep.p_values.items():
        write_matrix(outdir / f"p_{kind}.csv", ids, mat, meta)
    order = rep.order
    write_matrix(outdir / "rho_ordered.csv", [ids[i] for i in order],
                 rep.rho[np.ix_(order, order)], meta)
    return rep


def cmd_simulate(cfg):
    s = cfg.simulation
    try:
        params = StudentCopulaParams(s.rho, s.nu)
    except ValueError as exc:
        raise ConfigError(f"simulation: {exc}") from None
    if len(s.asset_ids) != 2:
        raise ConfigError("simulation.asset_ids must name two assets")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    dates, prices = simulate_prices(params, s.n_days, rng=rng, start=s.start,
                                    lmarch=cfg.lmarch, marginal_nu=s.marginal_nu,
                                    daily_vol=s.daily_vol)
    outdir = Path(cfg.output_dir) / "simulated"
    meta = _meta(cfg, "simulate")
    paths = []
    for j, aid in enumerate(s.asset_ids):
        paths.append(write_csv(outdir / f"{aid}.csv", ["date", "price"],
                               zip(dates, prices[:, j]), meta))
    write_json(outdir / "manifest.json",
               {"assets": [{"id": a, "path": p.name} for a, p in zip(s.asset_ids, paths)],
                "copula": {"rho": s.rho, "nu": s.nu}, "n_days": s.n_days}, meta)
    return paths


COMMANDS = ("innovations", "calibrate", "insample", "outsample", "crosssection", "simulate")


def build_parser():
    p = argparse.ArgumentParser(prog="copula-backtest", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="JSON configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--output-dir")
        sp.add_argument("--store", help="calibration store directory")
        sp.add_argument("--pair", nargs=2, metavar=("ASSET1", "ASSET2"))
        sp.add_argument("--orientation", type=int, choices=(0, 1))
        sp.add_argument("--n-sim-in", type=int)
        sp.add_argument("--n-sim-out", type=int)
        sp.add_argument("--lengths", type=int, nargs="+", help="calibration lengths")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "crosssection":
            sp.add_argument("--setting", choices=("in-sample", "out-of-sample"),
                            default="in-sample")
    return p


def _apply_overrides(cfg, args):
    for attr, key in (("seed", "seed"), ("workers", "workers"), ("output_dir", "output_dir"),
                      ("store", "store_dir"), ("pair", "pair"), ("orientation", "orientation")):
        v = getattr(args, attr)
        if v is not None:
            setattr(cfg, key, v)
    if args.n_sim_in is not None:
        cfg.calibration.n_sim_in = args.n_sim_in
    if args.n_sim_out is not None:
        cfg.calibration.n_sim_out = args.n_sim_out
    if args.lengths:
        cfg.calibration.lengths = args.lengths
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        cfg = _apply_overrides(cfg, args)
        if args.command == "crosssection":
            cmd_crosssection(cfg, args.setting)
        elif args.command == "calibrate":
            n = cmd_calibrate(cfg)
            print(f"created {n} calibration tables in {cfg.store}")
        else:
            globals()[f"cmd_{args.command}"](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CalibrationError, ConvergenceError, ArithmeticError, ValueError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
