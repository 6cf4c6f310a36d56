"""Shared fixtures: reference grids, trace builders, and the independent
brute-force selection oracle used to cross-check the policy module."""

from __future__ import annotations

import random
from datetime import datetime, timezone

import pytest

from capsim.profile import Config, ProfileEntry, ProfileGrid
from capsim.trace import PowerTrace

T0 = datetime(2020, 1, 1, tzinfo=timezone.utc)


def build_grid(points, *, gpu_max_power_w=350.0, gpu_memory_mb=24576.0, **kwargs) -> ProfileGrid:
    """Grid from {(mtl, bs): (throughput, power)} pairs."""
    entries = {}
    for (mtl, bs), (ips, watts) in points.items():
        config = Config(mtl=mtl, bs=bs)
        entries[config] = ProfileEntry(config=config, throughput_ips=ips, power_w=watts)
    return ProfileGrid(
        model_name=kwargs.pop("model_name", "model-a"),
        gpu_name=kwargs.pop("gpu_name", "gpu-x"),
        gpu_max_power_w=gpu_max_power_w,
        gpu_memory_mb=gpu_memory_mb,
        entries=entries,
        **kwargs,
    )


# Four-point reference grid used across policy/sim/controller tests:
# config -> (throughput ips, power W).
G1_POINTS = {
    (1, 1): (100.0, 100.0),
    (1, 2): (180.0, 150.0),
    (2, 1): (190.0, 160.0),
    (2, 2): (300.0, 220.0),
}


@pytest.fixture
def g1():
    return build_grid(G1_POINTS)


def make_trace(values, *, step_seconds=3600, label="fixture", start=T0) -> PowerTrace:
    return PowerTrace(
        source_label=label,
        step_seconds=step_seconds,
        start_time=start,
        values=tuple(float(v) for v in values),
    )


def random_grid(rng: random.Random, *, tie_heavy=False, gpu_max_power_w=350.0) -> ProfileGrid:
    """Ad-hoc random grid, optionally with heavily quantized throughputs so
    tie-breaking gets exercised.  Non-rectangular on purpose."""
    entries = {}
    n_mtl = rng.randint(1, 5)
    for mtl in range(1, n_mtl + 1):
        n_bs = rng.randint(1, 16)
        bss = rng.sample(range(1, 65), n_bs)
        if mtl == 1 and 1 not in bss:
            bss.append(1)  # keep the batching/multi-tenant slices non-trivial
        for bs in bss:
            if tie_heavy:
                ips = float(rng.randint(1, 8)) * 50.0
                watts = float(rng.randint(1, 7)) * 50.0
            else:
                ips = rng.uniform(1.0, 5000.0)
                watts = rng.uniform(1.0, gpu_max_power_w)
            config = Config(mtl=mtl, bs=bs)
            entries[config] = ProfileEntry(config=config, throughput_ips=ips, power_w=watts)
    return ProfileGrid(
        model_name="rand",
        gpu_name="gpu-x",
        gpu_max_power_w=gpu_max_power_w,
        gpu_memory_mb=24576.0,
        entries=entries,
    )


def synthetic_year_values(seed: int, *, hours: int = 8784, peak: float = 350.0) -> list[float]:
    """Seeded year of hourly caps: random-walk base level with a diurnal
    swing, clipped to [0, peak].  8784 hours = the 2020 leap year."""
    import math

    rng = random.Random(seed)
    level = peak / 2
    values = []
    for h in range(hours):
        level = min(max(level + rng.uniform(-0.06, 0.06) * peak, 0.0), peak)
        diurnal = 1.0 + 0.5 * math.sin(2 * math.pi * ((h % 24) - 6) / 24)
        values.append(min(max(level * diurnal + rng.uniform(-10, 10), 0.0), peak))
    return values


def oracle_best(grid: ProfileGrid, regime: str, cap_w: float):
    """Independent brute-force argmax used as the oracle for select_config.

    Deliberately shares no code with capsim.policy: a plain linear scan with
    explicit comparison chains implementing the documented tie-break order
    (throughput desc, then power / mtl / bs asc).  Returns a ProfileEntry or
    None when nothing fits.
    """
    best = None
    for config, entry in grid.entries.items():
        if entry.power_w > cap_w:
            continue
        if regime == "batching" and config.mtl != 1:
            continue
        if regime == "multi-tenant" and config.bs != 1:
            continue
        if best is None:
            best = entry
            continue
        if entry.throughput_ips > best.throughput_ips:
            best = entry
        elif entry.throughput_ips == best.throughput_ips:
            if entry.power_w < best.power_w:
                best = entry
            elif entry.power_w == best.power_w:
                if config.mtl < best.config.mtl:
                    best = entry
                elif config.mtl == best.config.mtl and config.bs < best.config.bs:
                    best = entry
    return best
