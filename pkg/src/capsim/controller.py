"""Online handling of power-cap violations against a live cap stream.

A monitoring step compares measured power with the current cap; reactive
control reconfigures after a detected violation, proactive control
additionally reselects ahead of a predicted cap drop (k-point moving
average of recent caps).
"""

from __future__ import annotations

import math
import random
import statistics
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import ValidationError
from .policy import COMBINATION, IDLE_SELECTION, Selection, select_config
from .profile import Config, ProfileGrid
from .trace import PowerTrace


class ModeTag(str, Enum):
    REACTIVE = "reactive"
    PROACTIVE = "proactive"


@dataclass(frozen=True)
class ControlMode:
    """Reactive, or proactive with a k-point cap-history window."""

    tag: ModeTag
    window_k: int = 3

    def __post_init__(self) -> None:
        if self.window_k < 1:
            raise ValidationError(f"window_k must be >= 1, got {self.window_k}")


REACTIVE = ControlMode(ModeTag.REACTIVE)


def proactive(window_k: int = 3) -> ControlMode:
    return ControlMode(ModeTag.PROACTIVE, window_k=window_k)


class EventKind(str, Enum):
    VIOLATION_DETECTED = "violation_detected"
    RECONFIGURED = "reconfigured"
    PREEMPTIVE_RECONFIGURED = "preemptive_reconfigured"
    NO_ACTION = "no_action"


@dataclass(frozen=True)
class ControlEvent:
    kind: EventKind
    step_index: int
    cap_w: float
    power_w: float

    def __post_init__(self) -> None:
        if self.kind is EventKind.VIOLATION_DETECTED and not self.power_w > self.cap_w:
            raise ValidationError(
                f"violation event requires power > cap, got {self.power_w} <= {self.cap_w}"
            )


@dataclass
class ControllerState:
    """Single-owner mutable controller state; advanced only by the step
    functions."""

    current: Selection
    mode: ControlMode
    cap_history: deque[float] = field(default_factory=deque)
    violations: int = 0
    reconfigs: int = 0
    step_index: int = 0

    @classmethod
    def initial(cls, mode: ControlMode, selection: Selection = IDLE_SELECTION) -> ControllerState:
        return cls(
            current=selection, mode=mode, cap_history=deque(maxlen=mode.window_k)
        )


def moving_average_prediction(cap_history: Sequence[float]) -> float:
    """Predicted next cap: arithmetic mean of the recorded history."""
    if not cap_history:
        raise ValueError("cannot predict from an empty cap history")
    return statistics.fmean(cap_history)


def _reactive_core(
    state: ControllerState, grid: ProfileGrid, cap_w: float, measured_power_w: float
) -> list[ControlEvent]:
    """Detect-then-reconfigure. Mutates state; does not touch cap history."""
    step = state.step_index
    if measured_power_w > cap_w:
        events = [
            ControlEvent(EventKind.VIOLATION_DETECTED, step, cap_w, measured_power_w)
        ]
        state.violations += 1
        state.current = select_config(grid, COMBINATION, cap_w)
        state.reconfigs += 1
        events.append(ControlEvent(EventKind.RECONFIGURED, step, cap_w, state.current.power_w))
        return events
    return [ControlEvent(EventKind.NO_ACTION, step, cap_w, measured_power_w)]


def step_reactive(
    state: ControllerState, grid: ProfileGrid, cap_w: float, measured_power_w: float
) -> tuple[ControllerState, list[ControlEvent]]:
    """One reactive monitoring step: reconfigure only after a detected
    violation.  Afterwards the current selection satisfies power <= cap_w
    (or is idle)."""
    events = _reactive_core(state, grid, cap_w, measured_power_w)
    state.cap_history.append(cap_w)
    state.step_index += 1
    return state, events


def step_proactive(
    state: ControllerState, grid: ProfileGrid, cap_w: float, measured_power_w: float
) -> tuple[ControllerState, list[ControlEvent]]:
    """Reactive handling first, then preemptive reselection whenever the
    predicted next cap (moving average over the last k caps, including this
    one) falls below the current selection's power."""
    step = state.step_index
    events = _reactive_core(state, grid, cap_w, measured_power_w)
    state.cap_history.append(cap_w)
    predicted = moving_average_prediction(state.cap_history)
    if not state.current.idle and predicted < state.current.power_w:
        state.current = select_config(grid, COMBINATION, predicted)
        state.reconfigs += 1
        events.append(
            ControlEvent(EventKind.PREEMPTIVE_RECONFIGURED, step, cap_w, state.current.power_w)
        )
    state.step_index += 1
    return state, events


@dataclass(frozen=True)
class ControllerReport:
    """Replay outcome: full event log with the selection in effect after
    each event, plus violation and throughput aggregates."""

    mode: ControlMode
    trace_label: str
    events: tuple[ControlEvent, ...]
    selections: tuple[Selection, ...]  # parallel to events
    violations: int
    reconfigs: int
    violation_fraction: float
    avg_throughput_ips: float
    num_steps: int


def replay(
    grid: ProfileGrid,
    trace: PowerTrace,
    mode: ControlMode,
    *,
    initial_config: Config | None = None,
    noise_pct: float = 0.0,
    seed: int = 0,
) -> ControllerReport:
    """Feed the trace's caps through the controller in order.

    Measured power is the current selection's grid power, optionally
    perturbed by seeded multiplicative noise of up to +/-noise_pct percent
    (models sensor/thermal drift).  The initial selection defaults to the
    best combination config for the first cap; pass ``initial_config`` to
    start from a specific grid entry.  Deterministic given inputs and seed.
    """
    if len(trace.values) == 0:
        raise ValidationError("cannot replay an empty trace")
    if noise_pct < 0:
        raise ValueError(f"noise_pct must be >= 0, got {noise_pct}")

    if initial_config is not None:
        entry = grid.entries.get(initial_config)
        if entry is None:
            raise ValidationError(f"initial config {initial_config} not present in grid")
        start = Selection(
            config=entry.config, throughput_ips=entry.throughput_ips, power_w=entry.power_w
        )
    else:
        start = select_config(grid, COMBINATION, trace.values[0])

    state = ControllerState.initial(mode, start)
    rng = random.Random(seed)
    step_fn = step_reactive if mode.tag is ModeTag.REACTIVE else step_proactive

    events: list[ControlEvent] = []
    selections: list[Selection] = []
    throughputs: list[float] = []
    for cap in trace.values:
        measured = state.current.power_w
        if noise_pct > 0 and not state.current.idle:
            measured *= 1.0 + rng.uniform(-noise_pct, noise_pct) / 100.0
        prior = state.current
        _, step_events = step_fn(state, grid, cap, measured)
        # Selection in effect when each event fired: violations and no-ops
        # refer to the pre-step config, reconfigurations to the new one.
        for j, event in enumerate(step_events):
            events.append(event)
            if event.kind in (EventKind.VIOLATION_DETECTED, EventKind.NO_ACTION):
                selections.append(prior)
            elif event.kind is EventKind.RECONFIGURED and j + 1 < len(step_events):
                # a preemptive reselection followed within the step; the
                # reactive result was the best combination config at this cap
                selections.append(select_config(grid, COMBINATION, cap))
            else:
                selections.append(state.current)
        throughputs.append(state.current.throughput_ips)

    num_steps = len(trace.values)
    return ControllerReport(
        mode=mode,
        trace_label=trace.source_label,
        events=tuple(events),
        selections=tuple(selections),
        violations=state.violations,
        reconfigs=state.reconfigs,
        violation_fraction=state.violations / num_steps,
        avg_throughput_ips=math.fsum(throughputs) / num_steps,
        num_steps=num_steps,
    )


def event_log_csv_text(report: ControllerReport) -> str:
    """Event log as CSV: step,kind,cap_w,power_w,mtl,bs,throughput_ips.
    Config columns are blank while idle."""
    lines = ["step,kind,cap_w,power_w,mtl,bs,throughput_ips"]
    for event, sel in zip(report.events, report.selections):
        mtl = "" if sel.config is None else str(sel.config.mtl)
        bs = "" if sel.config is None else str(sel.config.bs)
        lines.append(
            f"{event.step_index},{event.kind.value},{event.cap_w:.6f},{event.power_w:.6f},"
            f"{mtl},{bs},{sel.throughput_ips:.6f}"
        )
    return "\n".join(lines) + "\n"
