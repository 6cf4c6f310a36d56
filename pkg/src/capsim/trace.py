"""Renewable power-capacity traces: ingestion, normalization, statistics.

A trace is an hourly (or any fixed-step) sequence of power-capacity samples
in watts.  Traces arrive as CSV files with header ``timestamp,capacity_w``,
one row per step, ISO-8601 UTC timestamps on a uniform grid.
"""

from __future__ import annotations

import math
import statistics
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .errors import ParseError, ValidationError

TRACE_HEADER = "timestamp,capacity_w"

# CSV precision for capacity values (decimal digits).
CSV_DECIMALS = 6


@dataclass(frozen=True)
class PowerTrace:
    """Immutable, uniformly sampled power-capacity series.

    Attributes:
        source_label: free-form origin tag, e.g. ``"solar"``.
        step_seconds: duration of one cap interval.
        start_time: UTC timestamp of the first sample.
        values: capacity samples in watts, all finite and >= 0.
    """

    source_label: str
    step_seconds: int
    start_time: datetime
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.step_seconds <= 0:
            raise ValidationError(f"step_seconds must be positive, got {self.step_seconds}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValidationError("trace has no samples")
        for i, v in enumerate(values):
            if not math.isfinite(v):
                raise ValidationError(f"non-finite capacity at index {i}: {v}")
            if v < 0:
                raise ValidationError(f"negative capacity at index {i}: {v}")
        object.__setattr__(self, "values", values)
        start = self.start_time
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        object.__setattr__(self, "start_time", start.astimezone(timezone.utc))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TraceStats:
    """Mean / population STD / variation of a trace.

    ``variation_pct`` is (std / mean) * 100; NaN when the mean is zero.
    """

    mean_w: float
    std_w: float
    variation_pct: float


def _parse_timestamp(text: str) -> datetime:
    # Python 3.10 fromisoformat rejects the trailing 'Z'; normalize it first.
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    if ts.utcoffset().total_seconds() != 0:
        raise ValueError(f"timestamp not in UTC: {text!r}")
    return ts.astimezone(timezone.utc)


def load_trace(
    path: str | Path,
    step_seconds: int = 3600,
    *,
    gap_fill: bool = False,
    source_label: str | None = None,
) -> PowerTrace:
    """Read a trace CSV into a PowerTrace.

    Timestamps must advance by exactly ``step_seconds`` per row.  A gap that
    is a whole number of steps is a hard error unless ``gap_fill`` is set, in
    which case the previous row's value is repeated across the missing slots.
    Non-monotonic or misaligned timestamps are always errors.
    """
    path = Path(path)
    if step_seconds <= 0:
        raise ValueError(f"step_seconds must be positive, got {step_seconds}")
    label = source_label if source_label is not None else path.stem

    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()

    if not lines:
        raise ValidationError("empty trace file", path=str(path))
    if lines[0].strip() != TRACE_HEADER:
        raise ParseError(
            f"expected header {TRACE_HEADER!r}, got {lines[0]!r}", path=str(path), line=1
        )

    values: list[float] = []
    start: datetime | None = None
    prev_ts: datetime | None = None
    for lineno, row in enumerate(lines[1:], start=2):
        if not row.strip():
            continue
        parts = row.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", path=str(path), line=lineno)
        try:
            ts = _parse_timestamp(parts[0])
        except ValueError as exc:
            raise ParseError(f"bad timestamp: {exc}", path=str(path), line=lineno) from exc
        try:
            capacity = float(parts[1])
        except ValueError as exc:
            raise ParseError(f"bad capacity {parts[1]!r}", path=str(path), line=lineno) from exc
        if not math.isfinite(capacity):
            raise ValidationError(f"non-finite capacity {parts[1]!r}", path=str(path), line=lineno)
        if capacity < 0:
            raise ValidationError(f"negative capacity {capacity}", path=str(path), line=lineno)

        if prev_ts is None:
            start = ts
        else:
            delta = (ts - prev_ts).total_seconds()
            if delta <= 0:
                raise ValidationError(
                    f"non-monotonic timestamp {parts[0]!r}", path=str(path), line=lineno
                )
            if delta % step_seconds != 0:
                raise ValidationError(
                    f"timestamp {parts[0]!r} off the {step_seconds}s grid",
                    path=str(path),
                    line=lineno,
                )
            missing = int(delta // step_seconds) - 1
            if missing > 0:
                if not gap_fill:
                    raise ValidationError(
                        f"gap of {missing} step(s) before {parts[0]!r} (use gap_fill to forward-fill)",
                        path=str(path),
                        line=lineno,
                    )
                values.extend([values[-1]] * missing)
        values.append(capacity)
        prev_ts = ts

    if not values:
        raise ValidationError("trace file has no data rows", path=str(path))
    assert start is not None
    return PowerTrace(
        source_label=label, step_seconds=step_seconds, start_time=start, values=tuple(values)
    )


def trace_csv_text(trace: PowerTrace) -> str:
    """Canonical CSV text for a trace (LF, 6-decimal capacities)."""
    out = [TRACE_HEADER]
    for i, v in enumerate(trace.values):
        ts = trace.start_time + timedelta(seconds=i * trace.step_seconds)
        out.append(f"{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{v:.{CSV_DECIMALS}f}")
    return "\n".join(out) + "\n"


def save_trace(trace: PowerTrace, path: str | Path) -> None:
    """Write a trace to canonical CSV (UTF-8, LF)."""
    Path(path).write_text(trace_csv_text(trace), encoding="utf-8", newline="\n")


def normalize_trace(trace: PowerTrace, target_max: float) -> PowerTrace:
    """Rescale a trace so its maximum equals ``target_max`` watts.

    Pairwise ratios and ordering are preserved; the scale reference is the
    trace's own maximum.
    """
    if target_max <= 0:
        raise ValueError(f"target_max must be positive, got {target_max}")
    peak = max(trace.values)
    if peak <= 0:
        raise ValidationError("cannot normalize an all-zero trace (no scale reference)")
    scale = target_max / peak
    return PowerTrace(
        source_label=trace.source_label,
        step_seconds=trace.step_seconds,
        start_time=trace.start_time,
        values=tuple(v * scale for v in trace.values),
    )


def normalize_display(trace: PowerTrace) -> PowerTrace:
    """Rescale to the 0-100 range used for figure emission."""
    return normalize_trace(trace, 100.0)


def trace_stats(trace: PowerTrace) -> TraceStats:
    """Mean, population standard deviation, and variation of a trace.

    The STD divides by N (the trace is treated as the complete population,
    not a sample).  A zero-mean trace has undefined variation, reported as
    NaN with a warning.
    """
    mean = statistics.fmean(trace.values)
    std = statistics.pstdev(trace.values)
    if mean > 0:
        variation = std / mean * 100.0
    else:
        warnings.warn("zero-mean trace: variation undefined, reporting NaN", stacklevel=2)
        variation = math.nan
    return TraceStats(mean_w=mean, std_w=std, variation_pct=variation)
