"""Experiment orchestration: condition grids, artifacts and roll-up tables.

A run evaluates every (demographic x condition x gallery policy) cell
against the demographic's baseline cell (original probes, untouched
gallery, which is always computed) and writes, per cell: the rank-one
results CSV, a metrics JSON, a histogram CSV of the (mated - nonmated)
diffs and the partition JSON used. Roll-up tables mirror the usual
report layouts (rows: condition x policy, columns: demographics).
Artifacts contain no timestamps and are written in a fixed order, so a
rerun with the same config and inputs produces a byte-identical tree.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .embedstore import read_embeddings
from .errors import CellError, ConfigError
from .manifest import CONDITION_BASES, load_manifest
from .metrics import MetricReport, build_report, histogram
from .protocol import (
    GALLERY_POLICIES,
    apply_gallery_variants,
    bind_condition,
    build_partition,
)
from .search import rank_one, write_results_csv

HISTOGRAM_BINS = 80
HISTOGRAM_RANGE = (-2.0, 2.0)
BASELINE_CELL = ("original", "none")


@dataclass
class ExperimentConfig:
    manifest_path: str
    embeddings_path: str
    output_dir: str
    demographics: list
    conditions: list
    gallery_policies: list = field(default_factory=lambda: ["none"])
    matcher_name: str = "default"
    balance_to: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.demographics:
            raise ConfigError("demographics must be non-empty")
        if not self.conditions:
            raise ConfigError("conditions must be non-empty")
        for cond in self.conditions:
            if cond not in CONDITION_BASES:
                raise ConfigError(f"unknown condition {cond!r}")
        for policy in self.gallery_policies:
            if policy not in GALLERY_POLICIES:
                raise ConfigError(f"unknown gallery policy {policy!r}")

    @classmethod
    def from_json_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from None

    def to_json_dict(self) -> dict:
        # output_dir excluded: artifacts must not depend on where they land
        return {
            "manifest_path": self.manifest_path,
            "embeddings_path": self.embeddings_path,
            "demographics": list(self.demographics),
            "conditions": list(self.conditions),
            "gallery_policies": list(self.gallery_policies),
            "matcher_name": self.matcher_name,
            "balance_to": self.balance_to,
            "seed": self.seed,
        }


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = ExperimentConfig.from_json_dict(raw)
    for attr in ("manifest_path", "embeddings_path"):
        if not Path(getattr(cfg, attr)).is_file():
            raise ConfigError(f"{attr} does not exist: {getattr(cfg, attr)}")
    return cfg


@dataclass
class ExperimentOutput:
    output_dir: str
    reports: dict  # (demographic, condition, policy) -> MetricReport

    def cell_keys(self):
        return sorted(self.reports)


def _cell_grid(cfg: ExperimentConfig):
    cells = []
    for cond in cfg.conditions:
        # policy=none first so mitigation cells can reference its shift
        for policy in sorted(cfg.gallery_policies, key=lambda p: p != "none"):
            cell = (cond, policy)
            if cell not in cells and cell != BASELINE_CELL:
                cells.append(cell)
    # the baseline cell is always computed, and computed first
    return [BASELINE_CELL] + cells


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_histogram_csv(diffs, path):
    hist = histogram(diffs, HISTOGRAM_BINS, HISTOGRAM_RANGE)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, count in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            writer.writerow([f"{lo:.6f}", f"{hi:.6f}", int(count)])
        writer.writerow(["below_range", "", hist.below])
        writer.writerow(["above_range", "", hist.above])


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    """Execute the configured cell grid and write all artifacts."""
    manifest = load_manifest(cfg.manifest_path)
    embeddings = read_embeddings(cfg.embeddings_path)
    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    cells = _cell_grid(cfg)
    reports: dict = {}
    artifacts = []

    for demographic in cfg.demographics:
        base_partition = build_partition(
            manifest, demographic, cfg.seed, cfg.balance_to
        )
        baseline_results = None
        shifts_by_condition: dict = {}
        for cond, policy in cells:
            key = (demographic, cond, policy)
            try:
                partition = bind_condition(base_partition, manifest, cond)
                partition = apply_gallery_variants(
                    partition, manifest, policy, cfg.seed
                )
                results = rank_one(embeddings, embeddings, partition)
                if (cond, policy) == BASELINE_CELL:
                    baseline_results = results
                unmitigated = None
                if policy != "none":
                    unmitigated = shifts_by_condition.get(cond)
                report = build_report(
                    baseline_results,
                    results,
                    condition=cond,
                    demographic=demographic,
                    policy=policy,
                    matcher_name=cfg.matcher_name,
                    unmitigated_shift=unmitigated,
                )
                if policy == "none":
                    shifts_by_condition[cond] = report.wasserstein_shift
            except Exception as exc:
                raise CellError(
                    f"cell {demographic}/{cond}/{policy}: {exc}"
                ) from exc
            reports[key] = report

            cell_dir = out_root / "cells" / demographic / cond / policy
            cell_dir.mkdir(parents=True, exist_ok=True)
            write_results_csv(results, cell_dir / "results.csv")
            (cell_dir / "metrics.json").write_text(
                report.to_json() + "\n", encoding="utf-8"
            )
            _write_histogram_csv(
                [r.diff for r in results], cell_dir / "histogram.csv"
            )
            (cell_dir / "partition.json").write_text(
                partition.to_json() + "\n", encoding="utf-8"
            )
            artifacts.extend(
                str((cell_dir / name).relative_to(out_root))
                for name in (
                    "results.csv",
                    "metrics.json",
                    "histogram.csv",
                    "partition.json",
                )
            )

    tables_dir = out_root / "tables"
    tables_dir.mkdir(exist_ok=True)
    artifacts.extend(
        _write_tables(tables_dir, out_root, cfg, cells, reports)
    )

    run_manifest = {
        "config": cfg.to_json_dict(),
        "inputs": {
            "manifest": _sha256(cfg.manifest_path),
            "embeddings": _sha256(cfg.embeddings_path),
        },
        "cells": ["/".join(k) for k in sorted(reports)],
        "artifacts": {
            rel: _sha256(out_root / rel) for rel in sorted(artifacts)
        },
    }
    (out_root / "run_manifest.json").write_text(
        json.dumps(run_manifest, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return ExperimentOutput(output_dir=str(out_root), reports=reports)


def _write_tables(tables_dir, out_root, cfg, cells, reports):
    def fmt(value, digits=4):
        return "" if value is None else f"{value:.{digits}f}"

    written = []

    def table(name, columns, row_for):
        path = tables_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["condition", "policy"] + columns)
            for cond, policy in cells:
                writer.writerow([cond, policy] + row_for(cond, policy))
        written.append(str(path.relative_to(out_root)))

    demos = list(cfg.demographics)
    table(
        "dprime_table",
        [f"{d}_{label}" for d in demos for label in ("mated", "nonmated")],
        lambda c, p: [
            fmt(getattr(reports[(d, c, p)], f"dprime_{label}"))
            for d in demos
            for label in ("mated", "nonmated")
        ],
    )
    table(
        "wasserstein_table",
        demos,
        lambda c, p: [fmt(reports[(d, c, p)].wasserstein_shift) for d in demos],
    )
    table(
        "fpir_table",
        [f"{d}_pct" for d in demos],
        lambda c, p: [fmt(reports[(d, c, p)].fpir_pct, 3) for d in demos],
    )
    table(
        "recovery_table",
        demos,
        lambda c, p: [
            fmt(reports[(d, c, p)].recovery_pct, 2) for d in demos
        ],
    )
    return written


DIFF_METRICS = ("dprime_mated", "dprime_nonmated", "wasserstein_shift", "fpir")


def load_run_reports(run_dir) -> dict:
    """Per-cell metrics of a finished run, keyed like ExperimentOutput."""
    root = Path(run_dir)
    if not (root / "run_manifest.json").is_file():
        raise ConfigError(f"{run_dir}: not a run directory")
    reports = {}
    for path in sorted(root.glob("cells/*/*/*/metrics.json")):
        raw = json.loads(path.read_text(encoding="utf-8"))
        key = (raw["demographic"], raw["condition"], raw["policy"])
        reports[key] = raw
    return reports


def diff_runs(run_a, run_b) -> dict:
    """Cell-wise metric deltas (a - b) between two finished runs."""
    a, b = load_run_reports(run_a), load_run_reports(run_b)
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))
        only_b = sorted(set(b) - set(a))
        raise ConfigError(
            f"grid mismatch: only in A {only_a[:3]}, only in B {only_b[:3]}"
        )
    deltas = {}
    for key in sorted(a):
        deltas[key] = {
            m: a[key][m] - b[key][m] for m in DIFF_METRICS
        }
    return deltas
