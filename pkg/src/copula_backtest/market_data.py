"""Loading daily price files, log returns and pair synchronization."""

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class PriceSeries:
    asset_id: str
    dates: tuple
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != len(prices):
            raise DataError("dates and prices differ in length")
        if len(prices) < 2:
            raise DataError(f"{self.asset_id}: at least 2 prices are required")
        if not (np.all(np.isfinite(prices)) and np.all(prices > 0)):
            raise DataError(f"{self.asset_id}: prices must be positive")
        _check_increasing(self.asset_id, self.dates)

    def __len__(self):
        return len(self.prices)


@dataclass(frozen=True)
class ReturnSeries:
    asset_id: str
    dates: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != len(self.values):
            raise DataError("dates and values differ in length")
        _check_increasing(self.asset_id, self.dates)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SyncedPair:
    asset_ids: tuple
    dates: tuple
    values_1: np.ndarray
    values_2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values_1", np.asarray(self.values_1, dtype=np.float64))
        object.__setattr__(self, "values_2", np.asarray(self.values_2, dtype=np.float64))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        if not len(self.dates) == len(self.values_1) == len(self.values_2):
            raise DataError("synchronized columns differ in length")

    def __len__(self):
        return len(self.dates)

    def to_array(self):
        return np.column_stack([self.values_1, self.values_2])

    def swapped(self):
        return SyncedPair(self.asset_ids[::-1], self.dates, self.values_2, self.values_1)


def _check_increasing(asset_id, dates):
    for i in range(1, len(dates)):
        if dates[i] == dates[i - 1]:
            raise DataError(f"{asset_id}: duplicate date {dates[i]}")
        if dates[i] < dates[i - 1]:
            raise DataError(f"{asset_id}: dates not increasing at {dates[i]}")


def load_prices(path, asset_id=None):
    """Read a ``date,price`` CSV file into a :class:`PriceSeries`.

    Leading lines starting with ``#`` are skipped. Errors carry the file
    name and the 1-based line number of the offending row.
    """
    path = Path(path)
    if asset_id is None:
        asset_id = path.stem
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    dates, prices = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        # leading "# key=value" lines are a metadata block, not data
        lines = list(fh)
        skip = 0
        while skip < len(lines) and lines[skip].startswith("#"):
            skip += 1
        reader = csv.reader(lines[skip:])
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "price"]:
            raise DataError(f"{path}:1: expected header 'date,price'")
        seen = set()
        for row in reader:
            line = reader.line_num + skip
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            raw_date, raw_price = row[0].strip(), row[1].strip()
            try:
                date.fromisoformat(raw_date)
            except ValueError:
                raise DataError(f"{path}:{line}: invalid ISO date {raw_date!r}") from None
            try:
                price = float(raw_price)
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric price {raw_price!r}") from None
            if not math.isfinite(price) or price <= 0:
                raise DataError(f"{path}:{line}: price must be positive, got {raw_price}")
            if raw_date in seen:
                raise DataError(f"{path}:{line}: duplicate date {raw_date}")
            if dates and raw_date < dates[-1]:
                raise DataError(f"{path}:{line}: dates not increasing ({raw_date} after {dates[-1]})")
            seen.add(raw_date)
            dates.append(raw_date)
            prices.append(price)
    if len(prices) < 2:
        raise DataError(f"{path}: at least 2 price rows are required")
    return PriceSeries(asset_id, dates, np.array(prices))


def compute_returns(p):
    """Daily log returns ``ln(p_t / p_{t-1})``, dated at the later day."""
    if len(p.prices) < 2:
        raise DataError("at least 2 prices are required")
    return ReturnSeries(p.asset_id, p.dates[1:], np.diff(np.log(p.prices)))


def synchronize_pair(a, b):
    """Restrict two dated series to their common dates.

    ``a`` and ``b`` may be any series with ``asset_id``, ``dates`` and
    ``values`` attributes (returns or innovations).
    """
    if len(a.dates) == 0 or len(b.dates) == 0:
        raise DataError("cannot synchronize an empty series")
    index_b = {d: i for i, d in enumerate(b.dates)}
    ia, ib = [], []
    for i, d in enumerate(a.dates):
        j = index_b.get(d)
        if j is not None:
            ia.append(i)
            ib.append(j)
    if not ia:
        raise DataError(f"{a.asset_id} and {b.asset_id} share no dates")
    return SyncedPair((a.asset_id, b.asset_id), [a.dates[i] for i in ia],
                      a.values[ia], b.values[ib])
