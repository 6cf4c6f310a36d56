"""Configuration selection policies under a power cap.

Three exhaustive regimes search different slices of a profiling grid for the
highest-throughput configuration whose power fits under the cap:

* batching      — single instance, any batch size (mtl pinned to 1);
* multi-tenant  — any instance count, batch size pinned to 1;
* combination   — both knobs free (superset of the other two).

A fourth, sampling-based selector trades optimality for a bounded number of
probed configurations.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError
from .profile import Config, ProfileEntry, ProfileGrid


class PolicyTag(str, Enum):
    BATCHING = "batching"
    MULTI_TENANT = "multi-tenant"
    COMBINATION = "combination"
    SAMPLING = "sampling"


@dataclass(frozen=True)
class PolicyKind:
    """A selection regime; sampling additionally carries its search budget."""

    tag: PolicyTag
    budget_m: int = 0
    rounds_r: int = 0

    def __post_init__(self) -> None:
        if self.tag is PolicyTag.SAMPLING:
            if self.budget_m < 1:
                raise ValidationError(f"sampling budget must be >= 1, got {self.budget_m}")
            if self.rounds_r < 0:
                raise ValidationError(f"refinement rounds must be >= 0, got {self.rounds_r}")
        elif self.budget_m or self.rounds_r:
            raise ValidationError(f"{self.tag.value} policy takes no sampling parameters")

    @property
    def label(self) -> str:
        if self.tag is PolicyTag.SAMPLING:
            return f"sampling(m={self.budget_m},r={self.rounds_r})"
        return self.tag.value


BATCHING = PolicyKind(PolicyTag.BATCHING)
MULTI_TENANT = PolicyKind(PolicyTag.MULTI_TENANT)
COMBINATION = PolicyKind(PolicyTag.COMBINATION)


def sampling_policy(budget_m: int, rounds_r: int = 1) -> PolicyKind:
    return PolicyKind(PolicyTag.SAMPLING, budget_m=budget_m, rounds_r=rounds_r)


@dataclass(frozen=True)
class Selection:
    """Outcome of one selection: the chosen config (or none = idle) and its
    operating point, plus how many configs were feasible under the cap."""

    config: Config | None
    throughput_ips: float
    power_w: float
    feasible_count: int = 0

    def __post_init__(self) -> None:
        if self.config is None:
            if self.throughput_ips != 0 or self.power_w != 0:
                raise ValidationError("idle selection must have zero throughput and power")
        elif self.throughput_ips <= 0:
            raise ValidationError(f"selected throughput must be positive, got {self.throughput_ips}")

    @property
    def idle(self) -> bool:
        return self.config is None


IDLE_SELECTION = Selection(config=None, throughput_ips=0.0, power_w=0.0, feasible_count=0)


def _prefer(a: ProfileEntry, b: ProfileEntry) -> ProfileEntry:
    """Pick the better of two entries: higher throughput, then lower power,
    then lower mtl, then lower bs."""
    if a.throughput_ips != b.throughput_ips:
        return a if a.throughput_ips > b.throughput_ips else b
    ka = (a.power_w, a.config.mtl, a.config.bs)
    kb = (b.power_w, b.config.mtl, b.config.bs)
    return a if ka <= kb else b


def _regime_entries(
    grid: ProfileGrid, kind: PolicyKind, *, batching_mtl: int, multi_tenant_bs: int
) -> list[ProfileEntry]:
    if kind.tag is PolicyTag.BATCHING:
        return [e for c, e in grid.entries.items() if c.mtl == batching_mtl]
    if kind.tag is PolicyTag.MULTI_TENANT:
        return [e for c, e in grid.entries.items() if c.bs == multi_tenant_bs]
    return list(grid.entries.values())


class PolicyIndex:
    """Precomputed answer structure for best-config-under-cap queries.

    Entries of the regime are sorted by power; a running best-so-far array
    makes each query a binary search.  Built once per (grid, kind), shared
    across the thousands of caps of a trace.
    """

    def __init__(
        self,
        grid: ProfileGrid,
        kind: PolicyKind,
        *,
        batching_mtl: int = 1,
        multi_tenant_bs: int = 1,
    ):
        entries = _regime_entries(
            grid, kind, batching_mtl=batching_mtl, multi_tenant_bs=multi_tenant_bs
        )
        entries.sort(key=lambda e: (e.power_w, e.config.mtl, e.config.bs))
        self._powers = [e.power_w for e in entries]
        best: list[ProfileEntry] = []
        for entry in entries:
            best.append(entry if not best else _prefer(best[-1], entry))
        self._best = best

    def select(self, cap_w: float) -> Selection:
        if cap_w < 0:
            raise ValueError(f"cap_w must be >= 0, got {cap_w}")
        count = bisect.bisect_right(self._powers, cap_w)
        if count == 0:
            return IDLE_SELECTION
        entry = self._best[count - 1]
        return Selection(
            config=entry.config,
            throughput_ips=entry.throughput_ips,
            power_w=entry.power_w,
            feasible_count=count,
        )


def feasible_set(
    grid: ProfileGrid,
    kind: PolicyKind,
    cap_w: float,
    *,
    batching_mtl: int = 1,
    multi_tenant_bs: int = 1,
) -> set[Config]:
    """Configs of the regime whose power fits under the cap.

    The batching and multi-tenant sets are always subsets of the combination
    set; the sampling regime searches the combination space.
    """
    if cap_w < 0:
        raise ValueError(f"cap_w must be >= 0, got {cap_w}")
    entries = _regime_entries(
        grid, kind, batching_mtl=batching_mtl, multi_tenant_bs=multi_tenant_bs
    )
    return {e.config for e in entries if e.power_w <= cap_w}


def select_config(
    grid: ProfileGrid,
    kind: PolicyKind,
    cap_w: float,
    *,
    batching_mtl: int = 1,
    multi_tenant_bs: int = 1,
) -> Selection:
    """Exhaustive argmax of throughput over the regime's feasible set.

    Ties break toward lower power, then lower mtl, then lower bs.  An empty
    feasible set yields the idle selection (zero throughput).
    """
    if kind.tag is PolicyTag.SAMPLING:
        raise ValueError("sampling is not an exhaustive policy; use select_sampling")
    index = PolicyIndex(grid, kind, batching_mtl=batching_mtl, multi_tenant_bs=multi_tenant_bs)
    return index.select(cap_w)


def _nearest_bs(present: list[int], target: float, exclude: int) -> int | None:
    """Present batch size closest to target, excluding the current one;
    ties prefer the smaller size."""
    candidates = [b for b in present if b != exclude]
    if not candidates:
        return None
    return min(candidates, key=lambda b: (abs(b - target), b))


def _neighbors(grid: ProfileGrid, config: Config) -> list[ProfileEntry]:
    """Present-entry neighborhood: mtl +/- 1 at the same bs, and bs halved /
    doubled to the nearest batch size present at the same mtl."""
    out: list[ProfileEntry] = []
    for mtl in (config.mtl - 1, config.mtl + 1):
        if mtl >= 1:
            entry = grid.entries.get(Config(mtl=mtl, bs=config.bs))
            if entry is not None:
                out.append(entry)
    same_mtl_bs = sorted(c.bs for c in grid.entries if c.mtl == config.mtl)
    for target in (config.bs / 2, config.bs * 2):
        bs = _nearest_bs(same_mtl_bs, target, exclude=config.bs)
        if bs is not None:
            entry = grid.entries.get(Config(mtl=config.mtl, bs=bs))
            if entry is not None and entry not in out:
                out.append(entry)
    return out


def select_sampling(
    grid: ProfileGrid,
    budget_m: int,
    rounds_r: int,
    cap_w: float,
    seed: int,
) -> Selection:
    """Low-overhead selection: probe ``budget_m`` feasible configs uniformly
    at random (seeded), then hill-climb for ``rounds_r`` rounds over present
    neighbors, accepting only feasible strictly-better moves.

    The result is always feasible, hence never better than the exhaustive
    combination selection for the same cap.  A budget covering the whole
    feasible set degenerates to the exhaustive result.
    """
    if budget_m < 1:
        raise ValueError(f"budget_m must be >= 1, got {budget_m}")
    if rounds_r < 0:
        raise ValueError(f"rounds_r must be >= 0, got {rounds_r}")
    if cap_w < 0:
        raise ValueError(f"cap_w must be >= 0, got {cap_w}")

    feasible = [e for e in grid.entries.values() if e.power_w <= cap_w]
    if not feasible:
        return IDLE_SELECTION
    feasible.sort(key=lambda e: (e.power_w, e.config.mtl, e.config.bs))

    rng = random.Random(seed)
    if budget_m >= len(feasible):
        samples = feasible
    else:
        samples = rng.sample(feasible, budget_m)

    best = samples[0]
    for entry in samples[1:]:
        best = _prefer(best, entry)

    for _ in range(rounds_r):
        move = None
        for neighbor in _neighbors(grid, best.config):
            if neighbor.power_w > cap_w:
                continue
            if neighbor.throughput_ips <= best.throughput_ips:
                continue
            move = neighbor if move is None else _prefer(move, neighbor)
        if move is None:
            break
        best = move

    return Selection(
        config=best.config,
        throughput_ips=best.throughput_ips,
        power_w=best.power_w,
        feasible_count=len(feasible),
    )


def improvement_pct(a: float, b: float) -> float:
    """Relative throughput improvement of ``a`` over baseline ``b``, in
    percent.  Displayed values are rounded to the nearest integer percent."""
    if b <= 0:
        raise ValueError(f"baseline must be positive, got {b}")
    return (a - b) / b * 100.0
