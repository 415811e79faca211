"""Train/test period split by cutoff month and robustness summary statistics.

The training period covers months up to and including the cutoff, the
testing period everything after.  Means over months are unweighted (stated
in the report metadata), the robustness gap is the test minus train mean,
and the future estimate extrapolates the gap once past the test mean.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import parse_year_month

__all__ = [
    "TemporalError",
    "MonthlySeries",
    "TemporalSummary",
    "split_by_cutoff",
    "summarize",
    "series_from_rows",
    "emit_report",
    "read_summaries_csv",
    "format_gap_signed",
    "format_gap_arrow",
]


class TemporalError(ValueError):
    pass


@dataclass(frozen=True)
class MonthlySeries:
    model: str
    dataset: str
    points: tuple[tuple[str, float], ...]  # (YYYY-MM, mean rate), months increasing

    def __post_init__(self):
        months = [m for m, _ in self.points]
        for m in months:
            parse_year_month(m)
        if months != sorted(months):
            object.__setattr__(
                self, "points", tuple(sorted(self.points, key=lambda p: p[0]))
            )
            months = sorted(months)
        if len(set(months)) != len(months):
            raise TemporalError(f"{self.model}/{self.dataset}: duplicate months")
        if any(rate <= 0 for _, rate in self.points):
            raise TemporalError(f"{self.model}/{self.dataset}: rates must be positive")

    @property
    def months(self) -> list[str]:
        return [m for m, _ in self.points]


@dataclass(frozen=True)
class TemporalSummary:
    model: str
    dataset: str
    cutoff: str
    months_train: int
    months_test: int
    rate_train: float
    rate_test: float
    rate_avg: float
    gap: float
    rate_future_estimate: float


def split_by_cutoff(series: MonthlySeries, cutoff: str) -> tuple[MonthlySeries, MonthlySeries]:
    """Partition a series into months <= cutoff and months > cutoff."""
    parse_year_month(cutoff)
    train = tuple(p for p in series.points if p[0] <= cutoff)
    test = tuple(p for p in series.points if p[0] > cutoff)
    if not train:
        raise TemporalError(
            f"cutoff {cutoff} precedes the series ({series.months[0]}..); training period empty"
        )
    if not test:
        raise TemporalError(
            f"cutoff {cutoff} is at or past the series end ({series.months[-1]}); "
            "testing period empty"
        )
    make = lambda pts: MonthlySeries(series.model, series.dataset, pts)
    return make(train), make(test)


def _mean(values) -> float:
    values = list(values)
    if min(values) == max(values):
        return values[0]  # a mean of identical rates is that rate, exactly
    return math.fsum(values) / len(values)


def summarize(series: MonthlySeries, cutoff: str) -> TemporalSummary:
    train, test = split_by_cutoff(series, cutoff)
    rate_train = _mean(r for _, r in train.points)
    rate_test = _mean(r for _, r in test.points)
    gap = rate_test - rate_train
    return TemporalSummary(
        model=series.model,
        dataset=series.dataset,
        cutoff=cutoff,
        months_train=len(train.points),
        months_test=len(test.points),
        rate_train=rate_train,
        rate_test=rate_test,
        rate_avg=_mean(r for _, r in series.points),
        gap=gap,
        rate_future_estimate=rate_test + gap,
    )


def format_gap_signed(gap: float) -> str:
    """Signed three-decimal gap with the leading zero stripped: +.219 / -1.730."""
    text = f"{gap:+.3f}"
    return text.replace("+0.", "+.").replace("-0.", "-.")


def format_gap_arrow(gap: float) -> str:
    """Arrow rendering: up means a higher (worse) rate on the testing period."""
    arrow = "↑" if gap > 0 else ("↓" if gap < 0 else "=")
    magnitude = f"{abs(gap):.3f}".lstrip("0") or "0.000"
    return f"{arrow} {magnitude}"


def series_from_rows(rows) -> list[MonthlySeries]:
    """Group per-month report rows into one series per model and dataset."""
    groups: dict[tuple[str, str], list[tuple[str, float]]] = {}
    for row in rows:
        if getattr(row, "scope", None) != "month" or getattr(row, "status", "ok") != "ok":
            continue
        groups.setdefault((row.model, row.dataset), []).append((row.year_month, row.rate))
    out = []
    for (model, dataset) in sorted(groups):
        points = sorted(groups[(model, dataset)])
        out.append(MonthlySeries(model=model, dataset=dataset, points=tuple(points)))
    return out


SUMMARY_COLUMNS = [
    "model", "dataset", "cutoff", "months_train", "months_test", "rate_train",
    "rate_test", "rate_avg", "gap", "rate_future_estimate", "gap_display",
]


def emit_report(summaries: list[TemporalSummary], out_dir,
                series: list[MonthlySeries] | None = None) -> list[Path]:
    """Write summary CSV/JSON plus per-month series for external plotting."""
    if not summaries:
        raise TemporalError("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(summaries, key=lambda s: (s.model, s.dataset))
    written = []

    csv_path = out_dir / "summary.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for s in ordered:
            record = {k: getattr(s, k) for k in SUMMARY_COLUMNS if k != "gap_display"}
            for key in ("rate_train", "rate_test", "rate_avg", "gap", "rate_future_estimate"):
                record[key] = repr(getattr(s, key))
            record["gap_display"] = format_gap_arrow(s.gap)
            writer.writerow(record)
    written.append(csv_path)

    json_path = out_dir / "summary.json"
    payload = {
        "metadata": {
            "month_mean_weighting": "unweighted",
            "gap_definition": "rate_test - rate_train",
            "future_estimate": "rate_test + gap",
        },
        "summaries": [vars(s) | {"gap_display": format_gap_arrow(s.gap)} for s in ordered],
    }
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    written.append(json_path)

    if series:
        series_path = out_dir / "series.json"
        series_payload = [
            {"model": s.model, "dataset": s.dataset,
             "points": [{"year_month": m, "rate": r} for m, r in s.points]}
            for s in sorted(series, key=lambda s: (s.model, s.dataset))
        ]
        series_path.write_text(json.dumps(series_payload, indent=2, sort_keys=True) + "\n")
        written.append(series_path)
    return written


def read_summaries_csv(path) -> list[TemporalSummary]:
    out = []
    with open(path, newline="") as fh:
        for record in csv.DictReader(fh):
            out.append(TemporalSummary(
                model=record["model"],
                dataset=record["dataset"],
                cutoff=record["cutoff"],
                months_train=int(record["months_train"]),
                months_test=int(record["months_test"]),
                rate_train=float(record["rate_train"]),
                rate_test=float(record["rate_test"]),
                rate_avg=float(record["rate_avg"]),
                gap=float(record["gap"]),
                rate_future_estimate=float(record["rate_future_estimate"]),
            ))
    return out
