"""Experiment specs, reports, and their JSON / CSV serialization."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_from_values, load_config_file
from .experiments import EXPERIMENTS

EXIT_OK, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2


@dataclass
class ExperimentSpec:
    command: str
    config: dict = field(default_factory=dict)
    config_file: str | None = None
    params: dict = field(default_factory=dict)
    out_json: str | None = None
    out_csv: str | None = None
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Report:
    spec: dict
    version: str
    results: dict
    verdicts: dict
    series: tuple | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.success else EXIT_VERDICT

    def payload(self, include_metadata: bool = True) -> dict:
        out = {"spec": self.spec, "version": self.version, "results": self.results,
               "verdicts": self.verdicts, "success": self.success}
        if include_metadata:
            out["metadata"] = self.metadata
        return out

    def to_json(self, include_metadata: bool = True) -> str:
        return json.dumps(_plain(self.payload(include_metadata)), sort_keys=True, indent=2,
                          allow_nan=True)


def _plain(obj):
    """numpy scalars and arrays to builtin types, recursively."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def resolve_config(spec: ExperimentSpec):
    """File values first, then explicit ones on top."""
    if spec.config_file:
        return load_config_file(spec.config_file, spec.config)
    return config_from_values(spec.config)


def run(spec: ExperimentSpec) -> Report:
    if spec.command not in EXPERIMENTS:
        raise KeyError(f"unknown subcommand {spec.command!r}")
    cfg = resolve_config(spec)
    rng = np.random.default_rng(spec.seed)
    t0 = time.perf_counter()
    params = dict(spec.params)
    if spec.command in ("shafrir",):
        params.setdefault("seed", spec.seed)
    results, verdicts, series = EXPERIMENTS[spec.command](cfg, rng, workers=spec.workers, **params)
    wall = time.perf_counter() - t0
    echo = spec.to_dict()
    echo["resolved_config"] = cfg.as_dict()
    meta = {"wall_clock_s": wall, "started": datetime.now(timezone.utc).isoformat()}
    report = Report(_plain(echo), __version__, _plain(results), _plain(verdicts), series, meta)
    if spec.out_json:
        Path(spec.out_json).write_text(report.to_json() + "\n")
    if spec.out_csv:
        emit_plotdata(report, spec.out_csv)
    return report


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def emit_plotdata(report: Report, path) -> None:
    """CSV with a header row, the report's column order and round-trip floats."""
    if report.series is None:
        raise ValueError(f"{report.spec.get('command')} produces no tabular series")
    cols, rows = report.series
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
