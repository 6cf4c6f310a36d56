"""Step-by-step policy simulation over a power trace, plus report plumbing.

One trace value = one cap interval = one selection.  Aggregates use
compensated summation so year-length traces accumulate exactly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema

from .errors import ValidationError
from .policy import (
    Config,
    PolicyIndex,
    PolicyKind,
    PolicyTag,
    Selection,
    improvement_pct,
    select_sampling,
)
from .profile import ProfileGrid
from .trace import PowerTrace

REPORT_SCHEMA_VERSION = 1

# Stride between per-step sampling seeds; keeps step draws independent while
# remaining a pure function of (run seed, step index).
_SEED_STRIDE = 1_000_003


@dataclass(frozen=True)
class StepRecord:
    """Decision taken for one trace step."""

    step_index: int
    cap_w: float
    selection: Selection
    idle: bool

    def __post_init__(self) -> None:
        if self.idle != self.selection.idle:
            raise ValidationError("idle flag must match the selection")
        if not self.idle and self.selection.power_w > self.cap_w:
            raise ValidationError(
                f"step {self.step_index}: selected power {self.selection.power_w} W "
                f"exceeds cap {self.cap_w} W"
            )


@dataclass(frozen=True)
class SimReport:
    """Per-step decisions plus aggregates for one (model, policy, trace) run.

    ``steps`` is None only for reports loaded from summary-only JSON.
    ``idle_power_w`` is the wattage charged to idle steps in the energy
    proxy (0 when the grid lacks idle-power metadata).
    """

    model_name: str
    policy: PolicyKind
    trace_label: str
    step_seconds: int
    idle_power_w: float
    num_steps: int
    avg_throughput_ips: float
    idle_steps: int
    energy_proxy_wh: float
    steps: tuple[StepRecord, ...] | None

    def __post_init__(self) -> None:
        if self.num_steps < 1:
            raise ValidationError(f"report must cover >= 1 step, got {self.num_steps}")
        if self.steps is not None and len(self.steps) != self.num_steps:
            raise ValidationError(
                f"num_steps {self.num_steps} does not match {len(self.steps)} records"
            )


@dataclass(frozen=True)
class ComparisonRow:
    policy_a: str
    policy_b: str
    improvement_pct: float  # NaN when the baseline averaged zero throughput


@dataclass(frozen=True)
class ComparisonTable:
    """All pairwise policy improvements for one model on one trace."""

    model_name: str
    trace_label: str
    avg_by_policy: Mapping[str, float]
    rows: tuple[ComparisonRow, ...]
    best_policy: str


def _aggregate(
    records: Sequence[StepRecord],
    step_seconds: int,
    idle_power_w: float,
    switch_penalty_s: float,
) -> tuple[float, int, float]:
    """avg throughput, idle count, energy proxy (Wh) over the records."""
    penalty_frac = min(switch_penalty_s, step_seconds) / step_seconds
    throughputs: list[float] = []
    energies: list[float] = []
    idle_count = 0
    prev_config: Config | None = None
    for i, record in enumerate(records):
        sel = record.selection
        ips = sel.throughput_ips
        if i > 0 and penalty_frac > 0 and sel.config != prev_config:
            ips *= 1.0 - penalty_frac
        throughputs.append(ips)
        energies.append((sel.power_w if not record.idle else idle_power_w) * step_seconds / 3600.0)
        if record.idle:
            idle_count += 1
        prev_config = sel.config
    avg = math.fsum(throughputs) / len(records)
    return avg, idle_count, math.fsum(energies)


def simulate(
    grid: ProfileGrid,
    trace: PowerTrace,
    kind: PolicyKind,
    *,
    seed: int = 0,
    switch_penalty_s: float = 0.0,
) -> SimReport:
    """Run one policy over every cap of the trace.

    Each step's cap is fed to the policy's selector; idle steps (no feasible
    config) contribute zero throughput.  ``switch_penalty_s`` models
    reconfiguration cost as seconds of lost throughput whenever the chosen
    config differs from the previous step's (default 0: instantaneous free
    switches, as in the upper-bound comparison).  Deterministic given inputs
    and seed.
    """
    if len(trace.values) == 0:
        raise ValidationError("cannot simulate an empty trace")
    if switch_penalty_s < 0:
        raise ValueError(f"switch_penalty_s must be >= 0, got {switch_penalty_s}")
    peak = max(trace.values)
    if peak > grid.gpu_max_power_w:
        warnings.warn(
            f"trace peak {peak:.1f} W exceeds GPU max {grid.gpu_max_power_w:.1f} W; "
            "did you forget to normalize the trace?",
            stacklevel=2,
        )

    if kind.tag is PolicyTag.SAMPLING:
        def pick(cap: float, step: int) -> Selection:
            return select_sampling(
                grid, kind.budget_m, kind.rounds_r, cap, seed=seed * _SEED_STRIDE + step
            )
    else:
        index = PolicyIndex(grid, kind)

        def pick(cap: float, step: int) -> Selection:
            return index.select(cap)

    records = []
    for i, cap in enumerate(trace.values):
        sel = pick(cap, i)
        records.append(StepRecord(step_index=i, cap_w=cap, selection=sel, idle=sel.idle))
    records = tuple(records)
    idle_power = grid.gpu_idle_power_w if grid.gpu_idle_power_w is not None else 0.0
    avg, idle_count, energy = _aggregate(records, trace.step_seconds, idle_power, switch_penalty_s)
    return SimReport(
        model_name=grid.model_name,
        policy=kind,
        trace_label=trace.source_label,
        step_seconds=trace.step_seconds,
        idle_power_w=idle_power,
        num_steps=len(records),
        avg_throughput_ips=avg,
        idle_steps=idle_count,
        energy_proxy_wh=energy,
        steps=records,
    )


def compare(reports: Sequence[SimReport]) -> ComparisonTable:
    """Pairwise average-throughput improvements between policies.

    All reports must cover the same model and trace and carry distinct
    policies.  Pairs whose baseline averaged zero throughput get NaN.
    """
    if len(reports) < 2:
        raise ValidationError(f"need at least 2 reports to compare, got {len(reports)}")
    model = reports[0].model_name
    trace_label = reports[0].trace_label
    for r in reports[1:]:
        if r.model_name != model or r.trace_label != trace_label:
            raise ValidationError(
                f"reports mix runs: ({r.model_name}, {r.trace_label}) vs ({model}, {trace_label})"
            )
    labels = [r.policy.label for r in reports]
    if len(set(labels)) != len(labels):
        raise ValidationError(f"reports must differ in policy, got {labels}")

    avg_by_policy = {r.policy.label: r.avg_throughput_ips for r in reports}
    rows = []
    for a in reports:
        for b in reports:
            if a is b:
                continue
            base = b.avg_throughput_ips
            pct = improvement_pct(a.avg_throughput_ips, base) if base > 0 else math.nan
            rows.append(ComparisonRow(a.policy.label, b.policy.label, pct))
    best = max(reports, key=lambda r: r.avg_throughput_ips).policy.label
    return ComparisonTable(
        model_name=model,
        trace_label=trace_label,
        avg_by_policy=avg_by_policy,
        rows=tuple(rows),
        best_policy=best,
    )


def slice_report(report: SimReport, from_step: int, to_step: int) -> SimReport:
    """Sub-report over records [from_step, to_step) with recomputed
    aggregates.  Requires step records (not available on summary-only
    reports); original step indices are preserved."""
    if report.steps is None:
        raise ValidationError("cannot slice a summary-only report: step records elided")
    if not 0 <= from_step < to_step <= len(report.steps):
        raise ValueError(
            f"invalid window [{from_step}, {to_step}) for {len(report.steps)} steps"
        )
    window = report.steps[from_step:to_step]
    avg, idle_count, energy = _aggregate(window, report.step_seconds, report.idle_power_w, 0.0)
    return SimReport(
        model_name=report.model_name,
        policy=report.policy,
        trace_label=report.trace_label,
        step_seconds=report.step_seconds,
        idle_power_w=report.idle_power_w,
        num_steps=len(window),
        avg_throughput_ips=avg,
        idle_steps=idle_count,
        energy_proxy_wh=energy,
        steps=window,
    )


# ---------------------------------------------------------------------------
# Report JSON (schema_version 1)

_CONFIG_SCHEMA = {
    "type": "object",
    "required": ["mtl", "bs"],
    "properties": {
        "mtl": {"type": "integer", "minimum": 1},
        "bs": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_STEP_SCHEMA = {
    "type": "object",
    "required": [
        "step_index",
        "cap_w",
        "idle",
        "config",
        "throughput_ips",
        "power_w",
        "feasible_count",
    ],
    "properties": {
        "step_index": {"type": "integer", "minimum": 0},
        "cap_w": {"type": "number", "minimum": 0},
        "idle": {"type": "boolean"},
        "config": {"oneOf": [{"type": "null"}, _CONFIG_SCHEMA]},
        "throughput_ips": {"type": "number", "minimum": 0},
        "power_w": {"type": "number", "minimum": 0},
        "feasible_count": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "schema_version",
        "model_name",
        "trace_label",
        "policy",
        "step_seconds",
        "idle_power_w",
        "num_steps",
        "avg_throughput_ips",
        "idle_steps",
        "energy_proxy_wh",
    ],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "model_name": {"type": "string"},
        "trace_label": {"type": "string"},
        "policy": {
            "type": "object",
            "required": ["tag", "budget_m", "rounds_r"],
            "properties": {
                "tag": {"enum": [t.value for t in PolicyTag]},
                "budget_m": {"type": "integer", "minimum": 0},
                "rounds_r": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "step_seconds": {"type": "integer", "exclusiveMinimum": 0},
        "idle_power_w": {"type": "number", "minimum": 0},
        "num_steps": {"type": "integer", "minimum": 1},
        "avg_throughput_ips": {"type": "number", "minimum": 0},
        "idle_steps": {"type": "integer", "minimum": 0},
        "energy_proxy_wh": {"type": "number", "minimum": 0},
        "steps": {"type": "array", "items": _STEP_SCHEMA},
    },
    "additionalProperties": False,
}


def report_to_dict(report: SimReport, *, summary_only: bool = False) -> dict:
    doc: dict = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "model_name": report.model_name,
        "trace_label": report.trace_label,
        "policy": {
            "tag": report.policy.tag.value,
            "budget_m": report.policy.budget_m,
            "rounds_r": report.policy.rounds_r,
        },
        "step_seconds": report.step_seconds,
        "idle_power_w": report.idle_power_w,
        "num_steps": report.num_steps,
        "avg_throughput_ips": report.avg_throughput_ips,
        "idle_steps": report.idle_steps,
        "energy_proxy_wh": report.energy_proxy_wh,
    }
    if not summary_only and report.steps is not None:
        doc["steps"] = [
            {
                "step_index": s.step_index,
                "cap_w": s.cap_w,
                "idle": s.idle,
                "config": None
                if s.selection.config is None
                else {"mtl": s.selection.config.mtl, "bs": s.selection.config.bs},
                "throughput_ips": s.selection.throughput_ips,
                "power_w": s.selection.power_w,
                "feasible_count": s.selection.feasible_count,
            }
            for s in report.steps
        ]
    return doc


def report_from_dict(doc: dict) -> SimReport:
    try:
        jsonschema.validate(doc, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"report does not match schema v{REPORT_SCHEMA_VERSION}: "
                              f"{exc.message}") from exc
    pol = doc["policy"]
    policy = PolicyKind(PolicyTag(pol["tag"]), budget_m=pol["budget_m"], rounds_r=pol["rounds_r"])
    steps = None
    if "steps" in doc:
        steps = tuple(
            StepRecord(
                step_index=s["step_index"],
                cap_w=s["cap_w"],
                selection=Selection(
                    config=None
                    if s["config"] is None
                    else Config(mtl=s["config"]["mtl"], bs=s["config"]["bs"]),
                    throughput_ips=s["throughput_ips"],
                    power_w=s["power_w"],
                    feasible_count=s["feasible_count"],
                ),
                idle=s["idle"],
            )
            for s in doc["steps"]
        )
    return SimReport(
        model_name=doc["model_name"],
        policy=policy,
        trace_label=doc["trace_label"],
        step_seconds=doc["step_seconds"],
        idle_power_w=doc["idle_power_w"],
        num_steps=doc["num_steps"],
        avg_throughput_ips=doc["avg_throughput_ips"],
        idle_steps=doc["idle_steps"],
        energy_proxy_wh=doc["energy_proxy_wh"],
        steps=steps,
    )


def report_json_text(report: SimReport, *, summary_only: bool = False) -> str:
    doc = report_to_dict(report, summary_only=summary_only)
    jsonschema.validate(doc, REPORT_SCHEMA)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_report(report: SimReport, path: str | Path, *, summary_only: bool = False) -> None:
    Path(path).write_text(report_json_text(report, summary_only=summary_only), encoding="utf-8")


def load_report(path: str | Path) -> SimReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return report_from_dict(doc)


def comparison_csv_text(table: ComparisonTable) -> str:
    """Comparison table as CSV; improvements rounded to integer percent for
    display (blank cell when the baseline was zero)."""
    lines = ["model,trace,policy_a,policy_b,improvement_pct"]
    for row in table.rows:
        pct = "" if math.isnan(row.improvement_pct) else str(round(row.improvement_pct))
        lines.append(
            f"{table.model_name},{table.trace_label},{row.policy_a},{row.policy_b},{pct}"
        )
    return "\n".join(lines) + "\n"
