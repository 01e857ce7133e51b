"""CSV and JSON emission with a metadata header block."""

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .market_data import DataError
from .volatility import InnovationSeries


def header_lines(meta):
    lines = [f"# tool=copula-backtest {__version__}"]
    for k in sorted(meta):
        lines.append(f"# {k}={meta[k]}")
    return lines


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, meta):
    """Write rows under a ``# key=value`` header; floats use round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def write_matrix(path, labels, matrix, meta):
    rows = [[labels[i]] + ["" if not np.isfinite(v) else float(v) for v in matrix[i]]
            for i in range(len(labels))]
    return write_csv(path, ["asset"] + list(labels), rows, meta)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj, meta):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"metadata": dict(meta, tool=f"copula-backtest {__version__}"), **obj}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, default=_default,
                               allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_innovations(path, asset_id=None):
    """Read an innovation CSV written by the ``innovations`` command."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines()
             if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["date", "return", "sigma", "epsilon"]:
        raise DataError(f"{path}: expected header 'date,return,sigma,epsilon'")
    dates, eps = [], []
    for i, row in enumerate(reader, start=2):
        try:
            dates.append(row[0])
            eps.append(float(row[3]))
        except (IndexError, ValueError):
            raise DataError(f"{path}: malformed data row {i}") from None
    return InnovationSeries(asset_id or path.stem, tuple(dates), np.array(eps))
