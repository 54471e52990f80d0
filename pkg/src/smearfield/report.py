"""Result tables with provenance, deterministic CSV/JSON writers and optional figures."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np


def _fmt(v: Any) -> str:
    # repr of a float is the shortest round-tripping form, hence byte-stable
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        v = float(v)  # numpy scalars repr as np.float64(...)
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, complex):
        raise TypeError("split complex values into real and imaginary columns")
    return str(v)


def versions() -> dict:
    import numpy
    import scipy

    from . import __version__

    return {
        "smearfield": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }


@dataclass
class ResultTable:
    """Named columns, rows and a provenance block.

    The provenance timestamp only goes to JSON, so CSV output is a pure
    function of the configuration.
    """

    name: str
    columns: Sequence[str]
    rows: list = field(default_factory=list)
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for r in self.rows:
            self._check(r)

    def _check(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"{self.name}: row of length {len(row)} for {len(self.columns)} columns")

    def append(self, row) -> None:
        row = tuple(row)
        self._check(row)
        self.rows.append(row)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def provenance(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "versions": versions(),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "columns": list(self.columns),
            "rows": [[_jsonable(v) for v in r] for r in self.rows],
            "meta": self.meta,
            "provenance": self.provenance(),
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.name}.csv"
        csv_path.write_text(self.to_csv())
        (out / f"{self.name}.json").write_text(json.dumps(self.to_json(), indent=1, default=_json_default))
        return csv_path


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, float):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialise {type(v).__name__}")


# --------------------------------------------------------------------------
# Figures
# --------------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"figure.figsize": (5.0, 3.6), "font.size": 10, "axes.grid": True, "grid.alpha": 0.3})
    return plt


def plot_table(table: ResultTable, x: str, ys: Sequence[str], path, logx=False, logy=False, title=None) -> Path:
    """Line plot of ``ys`` against ``x``, saved to ``path``."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    xs = table.column(x)
    for y in ys:
        ax.plot(xs, table.column(y), marker="o", ms=3, label=y)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    if len(ys) > 1:
        ax.legend()
    else:
        ax.set_ylabel(ys[0])
    ax.set_title(title or table.name)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_matrix(values, path, title: str = "") -> Path:
    """``|M_ij|`` heat map, e.g. a Gram or Fock matrix."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    im = ax.imshow(np.abs(np.asarray(values)), cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.grid(False)
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
