"""Per-horizon forecast accuracy: MAE curves, model comparison, file emission.

The MAE at horizon step t averages absolute error over the entities that have
an observed truth value at that step, so entities leaving the panel mid-horizon
only contribute while they are present.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import PanelDataset
from .exceptions import DataError
from .models import ForecastResult


@dataclass
class HorizonReport:
    label: str
    entity_ids: list[str]
    abs_errors: np.ndarray  # (n_entities, horizon), NaN where truth missing
    mae_curve: np.ndarray  # (horizon,)
    n_per_step: np.ndarray  # (horizon,) int
    overall_mae: float
    horizon: int
    units: str = "original"


def horizon_mae(
    forecasts: list[ForecastResult], truth: PanelDataset, label: str = "model"
) -> HorizonReport:
    """Score forecasts against the truth panel, matching rows by (entity, time)."""
    if not forecasts:
        raise DataError("no forecasts to evaluate")
    horizon = forecasts[0].horizon
    if any(f.horizon != horizon for f in forecasts):
        raise DataError("all forecasts must share the same horizon")
    truth_ids = {e.entity_id for e in truth.entities}
    used = [f for f in forecasts if f.entity_id in truth_ids]
    if not used:
        raise DataError("no forecast entity appears in the truth panel")
    ti = truth.target_index
    errors = np.full((len(used), horizon), np.nan)
    for i, f in enumerate(used):
        entity = truth.entity(f.entity_id)
        time_to_row = {int(t): k for k, t in enumerate(entity.times)}
        for s in range(horizon):
            row = time_to_row.get(int(f.times[s]))
            if row is None or entity.missing[row, ti]:
                continue
            errors[i, s] = abs(float(f.values[s]) - float(entity.rows[row, ti]))
    n_per_step = np.sum(~np.isnan(errors), axis=0)
    with np.errstate(invalid="ignore"):
        curve = np.where(n_per_step > 0, np.nansum(errors, axis=0) / np.maximum(n_per_step, 1), np.nan)
    total_n = int(n_per_step.sum())
    overall = float(np.nansum(errors) / total_n) if total_n else float("nan")
    return HorizonReport(
        label=label,
        entity_ids=[f.entity_id for f in used],
        abs_errors=errors,
        mae_curve=curve,
        n_per_step=n_per_step,
        overall_mae=overall,
        horizon=horizon,
    )


@dataclass
class ComparisonTable:
    labels: list[str]
    overall: dict[str, float]
    ratio_to_first: dict[str, float]
    per_step_winner: list[str | None] = field(default_factory=list)

    def format(self) -> str:
        width = max(len(x) for x in self.labels + ["model"])
        lines = [f"{'model'.ljust(width)}  overall_mae  ratio_to_{self.labels[0]}"]
        for label in self.labels:
            lines.append(
                f"{label.ljust(width)}  {self.overall[label]:<11.6g}  {self.ratio_to_first[label]:.4f}"
            )
        return "\n".join(lines)


def compare_reports(reports: list[HorizonReport]) -> ComparisonTable:
    """Overall MAEs, per-step winners, and ratios against the first (baseline) report."""
    if not reports:
        raise DataError("no reports to compare")
    horizon = reports[0].horizon
    if any(r.horizon != horizon for r in reports):
        raise DataError("reports do not share a horizon")
    labels = [r.label for r in reports]
    if len(set(labels)) != len(labels):
        raise DataError("report labels must be unique")
    overall = {r.label: r.overall_mae for r in reports}
    base = reports[0].overall_mae
    ratios = {
        r.label: (
            r.overall_mae / base
            if base > 0
            else (1.0 if r.overall_mae == base else float("nan"))
        )
        for r in reports
    }
    winners: list[str | None] = []
    for s in range(horizon):
        step_vals = [r.mae_curve[s] for r in reports]
        finite = [v for v in step_vals if np.isfinite(v)]
        if not finite:
            winners.append(None)
            continue
        best = min(finite)
        holders = [labels[i] for i, v in enumerate(step_vals) if np.isfinite(v) and v == best]
        winners.append(holders[0] if len(holders) == 1 else None)
    return ComparisonTable(labels=labels, overall=overall, ratio_to_first=ratios, per_step_winner=winners)


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", label)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_outputs(
    reports: list[HorizonReport], out_dir, comparison: ComparisonTable | None = None
) -> list[Path]:
    """Write figure-ready CSVs plus summary.json; byte-stable for equal inputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for report in reports:
        slug = _slug(report.label)
        curve_path = out / f"mae_curve_{slug}.csv"
        with open(curve_path, "w", newline="") as fh:
            fh.write("horizon_step,mae,n_entities\n")
            for s in range(report.horizon):
                fh.write(f"{s + 1},{_fmt(report.mae_curve[s])},{int(report.n_per_step[s])}\n")
        written.append(curve_path)
        per_entity_path = out / f"per_entity_{slug}.csv"
        with open(per_entity_path, "w", newline="") as fh:
            fh.write("entity_id,horizon_step,abs_error\n")
            for i, entity_id in enumerate(report.entity_ids):
                for s in range(report.horizon):
                    err = report.abs_errors[i, s]
                    if np.isfinite(err):
                        fh.write(f"{entity_id},{s + 1},{_fmt(err)}\n")
        written.append(per_entity_path)
    if comparison is None and reports:
        comparison = compare_reports(reports)
    summary = {
        "labels": comparison.labels,
        "overall_mae": comparison.overall,
        "ratio_to_first": comparison.ratio_to_first,
        "horizon": reports[0].horizon if reports else 0,
        "units": reports[0].units if reports else "original",
    }
    summary_path = out / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(summary_path)
    return written
