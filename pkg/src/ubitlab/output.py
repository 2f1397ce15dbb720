"""CSV, summary and manifest writers."""
from __future__ import annotations

import csv
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__

TRAJECTORY_HEADER = ("time", "b_x", "b_y", "b_z", "|b|", "residual_X", "residual_Z")


@dataclass
class Table:
    header: tuple
    rows: list

    @classmethod
    def from_columns(cls, **cols) -> "Table":
        names = tuple(cols)
        arrays = [np.asarray(c) for c in cols.values()]
        n = len(arrays[0])
        if any(len(a) != n for a in arrays):
            raise ValueError("columns have different lengths")
        return cls(names, [tuple(a[k] for a in arrays) for k in range(n)])


@dataclass
class RunResult:
    experiment: str
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def trajectory_table(traj, frame: str | None = None) -> Table:
    rows = list(traj.rows())
    if frame is None:
        return Table(TRAJECTORY_HEADER, rows)
    return Table(("frame",) + TRAJECTORY_HEADER, [(frame, *r) for r in rows])


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for r in table.rows:
            w.writerow([_fmt(x) for x in r])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a numeric CSV written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def versions() -> dict:
    return {"ubitlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": sys.version.split()[0], "platform": platform.platform()}


def write_result(out_dir: Path, result: RunResult, manifest: dict, prefix: str = "") -> list[str]:
    """Write every table, ``summary.json`` and ``manifest.json``; return the file names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for name, table in result.tables.items():
        fname = f"{prefix}{name}.csv"
        write_csv(out_dir / fname, table)
        names.append(fname)
    write_json(out_dir / f"{prefix}summary.json", result.summary)
    names.append(f"{prefix}summary.json")
    manifest = dict(manifest, outputs=names + [f"{prefix}manifest.json"])
    write_json(out_dir / f"{prefix}manifest.json", manifest)
    return names


def make_manifest(config_hash: str, seed: int, experiment: str, wall_time: float, **extra) -> dict:
    return {"config_sha256": config_hash, "seed": int(seed), "experiment": experiment,
            "versions": versions(), "wall_time_s": float(wall_time),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"), **extra}
