"""Run configuration: a versioned JSON document plus command-line overrides."""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .copula import StudentCopulaParams
from .pipelines import BacktestConfig
from .transforms import KernelSpec
from .volatility import LmArchParams

CONFIG_VERSION = 1
STORE_ENV = "COPULA_BACKTEST_STORE"


class ConfigError(ValueError):
    pass


@dataclass
class AssetSpec:
    id: str
    path: str


@dataclass
class CalibrationSettings:
    n_sim_in: int = 2000
    n_sim_out: int = 1000
    seed: int = 12345
    lengths: list = None


@dataclass
class SimulationSettings:
    n_days: int = 4000
    rho: float = 0.6
    nu: float = 6.0
    marginal_nu: float = 6.0
    daily_vol: float = 0.01
    asset_ids: list = field(default_factory=lambda: ["SIM1", "SIM2"])
    start: str = "2000-01-03"


@dataclass
class RunConfig:
    assets: list = field(default_factory=list)
    lmarch: LmArchParams = field(default_factory=LmArchParams)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tile_N: int = 10
    window: int = 500
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    orientation: int = 0
    seed: int = 0
    output_dir: str = "output"
    store_dir: str = None
    workers: int = 1
    pair: list = None
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    fit_copula: bool = True

    def to_dict(self):
        d = asdict(self)
        d["lmarch"] = self.lmarch.to_dict()
        d["kernel"] = self.kernel.to_dict()
        d["version"] = CONFIG_VERSION
        # worker count never changes results, keep it out of the snapshot
        d.pop("workers")
        return d

    @property
    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def store(self):
        if self.store_dir:
            return self.store_dir
        return os.environ.get(STORE_ENV) or str(Path(self.output_dir) / "calibration")

    def backtest_config(self):
        return BacktestConfig(tile_N=self.tile_N, window=self.window, kernel=self.kernel,
                              orientation=self.orientation,
                              n_sim_in=self.calibration.n_sim_in,
                              n_sim_out=self.calibration.n_sim_out,
                              calibration_seed=self.calibration.seed,
                              reference_copula=StudentCopulaParams(0.4, 6.0),
                              fit_copula=self.fit_copula, store_dir=self.store,
                              workers=self.workers)

    def asset(self, asset_id):
        for a in self.assets:
            if a.id == asset_id:
                return a
        raise ConfigError(f"unknown asset {asset_id!r}")

    def selected_pair(self):
        if self.pair:
            if len(self.pair) != 2:
                raise ConfigError("pair must name exactly two assets")
            return [self.asset(a) for a in self.pair]
        if len(self.assets) < 2:
            raise ConfigError("at least two assets are required")
        return self.assets[:2]


def _build(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data, base_dir=None):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    data = dict(data)
    version = data.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    base = Path(base_dir) if base_dir else Path(".")
    assets = []
    for i, a in enumerate(data.pop("assets", []) or []):
        if isinstance(a, str):
            a = {"id": Path(a).stem, "path": a}
        if not isinstance(a, dict) or "path" not in a:
            raise ConfigError(f"assets[{i}] needs a path")
        p = Path(a["path"])
        assets.append(AssetSpec(str(a.get("id") or p.stem), str(p if p.is_absolute() else base / p)))
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kw = {"assets": assets}
    kw["lmarch"] = _build(LmArchParams, data.pop("lmarch", None), "lmarch")
    kw["kernel"] = _build(KernelSpec, data.pop("kernel", None), "kernel")
    kw["calibration"] = _build(CalibrationSettings, data.pop("calibration", None), "calibration")
    kw["simulation"] = _build(SimulationSettings, data.pop("simulation", None), "simulation")
    for key in ("output_dir", "store_dir"):
        if data.get(key) is not None and not Path(data[key]).is_absolute():
            data[key] = str(base / data[key])
    kw.update(data)
    cfg = RunConfig(**kw)
    if cfg.orientation not in (0, 1):
        raise ConfigError("orientation must be 0 or 1")
    if cfg.tile_N < 2:
        raise ConfigError("tile_N must be >= 2")
    if cfg.window < 2:
        raise ConfigError("window must be >= 2")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such configuration file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data, base_dir=path.parent)


def check_files(cfg):
    missing = [a.path for a in cfg.assets if not Path(a.path).is_file()]
    if missing:
        raise ConfigError(f"missing asset files: {missing}")
