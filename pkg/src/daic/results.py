"""CSV and manifest output for experiment records."""

from __future__ import annotations

import csv
import json
import platform
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .cycle import CycleRecord

RECORD_FIELDS = [
    "cycle",
    "repetition",
    "verification_acc",
    "actual_acc",
    "predicted_acc",
    "estimated_acc",
    "triggered",
    "n_labeled",
    "policy_applied",
]
ACCURACIES = ("verification_acc", "actual_acc", "predicted_acc", "estimated_acc")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_records(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow([_fmt(getattr(r, name)) for name in RECORD_FIELDS])


def read_records(path) -> list[CycleRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                CycleRecord(
                    cycle=int(row["cycle"]),
                    repetition=int(row["repetition"]),
                    verification_acc=float(row["verification_acc"]),
                    actual_acc=float(row["actual_acc"]),
                    predicted_acc=float(row["predicted_acc"]),
                    estimated_acc=float(row["estimated_acc"]) if row["estimated_acc"] else None,
                    triggered=row["triggered"] == "true",
                    n_labeled=int(row["n_labeled"]),
                    policy_applied=row["policy_applied"],
                )
            )
    return out


def summarize(records):
    """Per-cycle mean/min/max over repetitions; the estimate is averaged over triggered repetitions only."""
    by_cycle = defaultdict(list)
    for r in records:
        by_cycle[r.cycle].append(r)
    rows = []
    for cycle in sorted(by_cycle):
        group = by_cycle[cycle]
        row = {"cycle": cycle, "repetitions": len(group)}
        for name in ACCURACIES:
            values = [getattr(r, name) for r in group if getattr(r, name) is not None]
            for stat, fn in (("mean", np.mean), ("min", np.min), ("max", np.max)):
                row[f"{name}_{stat}"] = float(fn(values)) if values else None
        row["triggered"] = sum(r.triggered for r in group)
        row["n_labeled"] = sum(r.n_labeled for r in group)
        rows.append(row)
    return rows


def write_summary(rows, path):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def emit_results(records, out_dir, config=None, wall_time=None):
    """Write ``records.csv``, ``summary.csv``, ``manifest.json`` and, given a config, ``config.toml``."""
    from .config import config_hash, dump_config

    if not records:
        raise ValueError("no records to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"records": out / "records.csv", "summary": out / "summary.csv", "manifest": out / "manifest.json"}
    write_records(records, paths["records"])
    write_summary(summarize(records), paths["summary"])
    manifest = {
        "version": __version__,
        "python": platform.python_version(),
        "n_records": len(records),
        "wall_time_s": None if wall_time is None else round(wall_time, 3),
        "files": {k: v.name for k, v in paths.items()},
    }
    if config is not None:
        paths["config"] = out / "config.toml"
        paths["config"].write_text(dump_config(config))
        manifest["files"]["config"] = "config.toml"
        manifest["master_seed"] = config.master_seed
        manifest["config_hash"] = config_hash(config)
    paths["manifest"].write_text(json.dumps(manifest, indent=2) + "\n")
    return paths
