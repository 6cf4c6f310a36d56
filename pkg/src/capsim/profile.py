"""Profiling grids: throughput and power per (instance count, batch size).

A grid holds one measured (or synthesized) operating point per configuration
of a model on a GPU.  Grids arrive as CSV files or from the synthetic
generator; running models on hardware is out of scope here.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import ParseError, ValidationError

GRID_HEADER = "model,gpu,mtl,bs,throughput_ips,power_w"

POWER_KINDS = ("avg", "max")

# CSV precision for throughput/power/metadata floats (decimal digits).
CSV_DECIMALS = 6


@dataclass(frozen=True, order=True)
class Config:
    """One deployable configuration: ``mtl`` co-located instances of the
    same model, each processing batches of ``bs`` inputs."""

    mtl: int
    bs: int

    def __post_init__(self) -> None:
        if self.mtl < 1:
            raise ValidationError(f"mtl must be >= 1, got {self.mtl}")
        if self.bs < 1:
            raise ValidationError(f"bs must be >= 1, got {self.bs}")


@dataclass(frozen=True)
class ProfileEntry:
    """Measured operating point of one configuration."""

    config: Config
    throughput_ips: float
    power_w: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.throughput_ips) and self.throughput_ips > 0):
            raise ValidationError(f"throughput must be positive, got {self.throughput_ips}")
        if not (math.isfinite(self.power_w) and self.power_w > 0):
            raise ValidationError(f"power must be positive, got {self.power_w}")


@dataclass(frozen=True)
class ProfileGrid:
    """Immutable map Config -> ProfileEntry for one model on one GPU.

    ``power_kind`` declares which measurement convention the power column
    carries (``"avg"`` or ``"max"``); default is the cap-conservative
    ``"max"``.  Grids need not be rectangular: configurations that failed to
    profile (e.g. OOM) are simply absent.
    """

    model_name: str
    gpu_name: str
    gpu_max_power_w: float
    gpu_memory_mb: float
    entries: Mapping[Config, ProfileEntry]
    power_kind: str = "max"
    gpu_idle_power_w: float | None = None
    model_mem_mb: float | None = None

    def __post_init__(self) -> None:
        if self.gpu_max_power_w <= 0:
            raise ValidationError(f"gpu_max_power_w must be positive, got {self.gpu_max_power_w}")
        if self.gpu_memory_mb <= 0:
            raise ValidationError(f"gpu_memory_mb must be positive, got {self.gpu_memory_mb}")
        if self.power_kind not in POWER_KINDS:
            raise ValidationError(f"power_kind must be one of {POWER_KINDS}, got {self.power_kind!r}")
        if not self.entries:
            raise ValidationError("grid has no entries")
        for config, entry in self.entries.items():
            if config != entry.config:
                raise ValidationError(f"entry keyed by {config} carries config {entry.config}")
            if entry.power_w > self.gpu_max_power_w:
                raise ValidationError(
                    f"config {config}: power {entry.power_w} W exceeds GPU max "
                    f"{self.gpu_max_power_w} W"
                )
        if self.model_mem_mb is not None:
            if self.model_mem_mb <= 0:
                raise ValidationError(f"model_mem_mb must be positive, got {self.model_mem_mb}")
            mtl_limit = int(self.gpu_memory_mb // self.model_mem_mb)
            worst = max(c.mtl for c in self.entries)
            if worst > mtl_limit:
                raise ValidationError(
                    f"max mtl {worst} exceeds memory limit of {mtl_limit} instances "
                    f"({self.gpu_memory_mb} MB / {self.model_mem_mb} MB per instance)"
                )
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SynthParams:
    """Knobs for the synthetic grid generator.

    Throughput follows a saturating curve in total batch work (bs * mtl)
    with a multiplicative contention penalty per extra co-located instance;
    power interpolates idle..TDP as a power law of relative throughput.
    """

    t_max_ips: float = 10000.0
    tau: float = 64.0
    contention: float = 0.92
    p_idle_w: float = 60.0
    p_max_w: float = 350.0
    gamma: float = 0.8
    mem_model_mb: float = 4096.0
    gpu_memory_mb: float = 24576.0
    mtl_cap: int = 4
    bs_cap: int = 128
    seed: int = 0
    noise_pct: float = 0.0
    model_name: str = "synthetic"
    gpu_name: str = "synthetic-gpu"

    def __post_init__(self) -> None:
        positives = {
            "t_max_ips": self.t_max_ips,
            "tau": self.tau,
            "p_idle_w": self.p_idle_w,
            "p_max_w": self.p_max_w,
            "gamma": self.gamma,
            "mem_model_mb": self.mem_model_mb,
            "gpu_memory_mb": self.gpu_memory_mb,
            "mtl_cap": self.mtl_cap,
            "bs_cap": self.bs_cap,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}")
        if not 0 < self.contention <= 1:
            raise ValidationError(f"contention must be in (0, 1], got {self.contention}")
        if self.p_idle_w >= self.p_max_w:
            raise ValidationError(
                f"p_idle_w ({self.p_idle_w}) must be below p_max_w ({self.p_max_w})"
            )
        if not 0 <= self.noise_pct <= 2:
            raise ValidationError(f"noise_pct must be in [0, 2], got {self.noise_pct}")


def compute_throughput(bs: int, mtl: int, mean_latency_s: float) -> float:
    """Inferences per second: (bs * mtl) / mean batch latency."""
    if bs < 1:
        raise ValueError(f"bs must be >= 1, got {bs}")
    if mtl < 1:
        raise ValueError(f"mtl must be >= 1, got {mtl}")
    if not (math.isfinite(mean_latency_s) and mean_latency_s > 0):
        raise ValueError(f"mean_latency_s must be positive, got {mean_latency_s}")
    return (bs * mtl) / mean_latency_s


def synthesize_grid(params: SynthParams) -> ProfileGrid:
    """Generate a plausible profiling grid from SynthParams.

    All configs with mtl in 1..min(mtl_cap, memory limit) and bs in
    1..bs_cap are produced:

        throughput = t_max_ips * (1 - exp(-(bs*mtl)/tau)) * contention**(mtl-1)
        power      = p_idle_w + (p_max_w - p_idle_w) * (throughput/t_max_ips)**gamma

    power is clamped to p_max_w.  Optional multiplicative noise (at most
    +/-noise_pct percent, seeded) perturbs throughput; power is derived from
    the perturbed value so it stays monotone in throughput.  The same params
    (including seed) always yield the same grid.
    """
    mtl_mem_limit = int(params.gpu_memory_mb // params.mem_model_mb)
    if mtl_mem_limit < 1:
        raise ValidationError(
            f"model footprint {params.mem_model_mb} MB exceeds GPU memory "
            f"{params.gpu_memory_mb} MB: zero deployable instances"
        )
    mtl_max = min(params.mtl_cap, mtl_mem_limit)
    rng = random.Random(params.seed)
    entries: dict[Config, ProfileEntry] = {}
    for mtl in range(1, mtl_max + 1):
        for bs in range(1, params.bs_cap + 1):
            throughput = (
                params.t_max_ips
                * (1.0 - math.exp(-(bs * mtl) / params.tau))
                * params.contention ** (mtl - 1)
            )
            if params.noise_pct > 0:
                throughput *= 1.0 + rng.uniform(-params.noise_pct, params.noise_pct) / 100.0
            ratio = min(throughput / params.t_max_ips, 1.0)
            power = params.p_idle_w + (params.p_max_w - params.p_idle_w) * ratio**params.gamma
            power = min(power, params.p_max_w)
            config = Config(mtl=mtl, bs=bs)
            entries[config] = ProfileEntry(config=config, throughput_ips=throughput, power_w=power)
    return ProfileGrid(
        model_name=params.model_name,
        gpu_name=params.gpu_name,
        gpu_max_power_w=params.p_max_w,
        gpu_memory_mb=params.gpu_memory_mb,
        entries=entries,
        power_kind="max",
        gpu_idle_power_w=params.p_idle_w,
        model_mem_mb=params.mem_model_mb,
    )


def profiling_cost(mtl_max: int, bs_max: int, per_config_s: float) -> float:
    """Wall-clock seconds to exhaustively profile an mtl_max x bs_max grid."""
    if mtl_max < 1:
        raise ValueError(f"mtl_max must be >= 1, got {mtl_max}")
    if bs_max < 1:
        raise ValueError(f"bs_max must be >= 1, got {bs_max}")
    if not (math.isfinite(per_config_s) and per_config_s > 0):
        raise ValueError(f"per_config_s must be positive, got {per_config_s}")
    return mtl_max * bs_max * per_config_s


_META_FLOAT_KEYS = ("gpu_max_power_w", "gpu_memory_mb", "gpu_idle_power_w", "model_mem_mb")


def load_grid(path: str | Path) -> ProfileGrid:
    """Read a profile CSV (``# key=value`` metadata lines, then rows).

    Rejects duplicate configs, mixed model/GPU names, and powers above the
    declared GPU maximum.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()

    meta: dict[str, str] = {}
    header_line = None
    data_start = 0
    for lineno, row in enumerate(lines, start=1):
        stripped = row.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if "=" not in body:
                raise ParseError(f"metadata line without '=': {row!r}", path=str(path), line=lineno)
            key, _, value = body.partition("=")
            meta[key.strip()] = value.strip()
            continue
        header_line = lineno
        if stripped != GRID_HEADER:
            raise ParseError(
                f"expected header {GRID_HEADER!r}, got {row!r}", path=str(path), line=lineno
            )
        data_start = lineno
        break
    if header_line is None:
        raise ParseError("missing header row", path=str(path))

    for key in ("gpu_max_power_w", "gpu_memory_mb"):
        if key not in meta:
            raise ParseError(f"missing required metadata line '# {key}=...'", path=str(path))
    floats: dict[str, float] = {}
    for key in _META_FLOAT_KEYS:
        if key in meta:
            try:
                floats[key] = float(meta[key])
            except ValueError as exc:
                raise ParseError(f"bad metadata value {key}={meta[key]!r}", path=str(path)) from exc

    entries: dict[Config, ProfileEntry] = {}
    model_name: str | None = None
    gpu_name: str | None = None
    for lineno, row in enumerate(lines[data_start:], start=data_start + 1):
        if not row.strip():
            continue
        parts = row.split(",")
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", path=str(path), line=lineno)
        model, gpu = parts[0].strip(), parts[1].strip()
        try:
            mtl = int(parts[2])
            bs = int(parts[3])
            throughput = float(parts[4])
            power = float(parts[5])
        except ValueError as exc:
            raise ParseError(f"bad numeric field: {exc}", path=str(path), line=lineno) from exc
        if model_name is None:
            model_name, gpu_name = model, gpu
        elif (model, gpu) != (model_name, gpu_name):
            raise ValidationError(
                f"mixed model/gpu: {model}/{gpu} vs {model_name}/{gpu_name}",
                path=str(path),
                line=lineno,
            )
        config = Config(mtl=mtl, bs=bs)
        if config in entries:
            raise ValidationError(f"duplicate config {config}", path=str(path), line=lineno)
        entries[config] = ProfileEntry(config=config, throughput_ips=throughput, power_w=power)

    if model_name is None:
        raise ValidationError("grid file has no data rows", path=str(path))
    try:
        return ProfileGrid(
            model_name=model_name,
            gpu_name=gpu_name,
            gpu_max_power_w=floats["gpu_max_power_w"],
            gpu_memory_mb=floats["gpu_memory_mb"],
            entries=entries,
            power_kind=meta.get("power_kind", "max"),
            gpu_idle_power_w=floats.get("gpu_idle_power_w"),
            model_mem_mb=floats.get("model_mem_mb"),
        )
    except ValidationError as exc:
        raise ValidationError(str(exc), path=str(path)) from exc


def grid_csv_text(grid: ProfileGrid) -> str:
    """Canonical CSV text for a grid: metadata, header, rows sorted by
    (mtl, bs), floats at 6 decimals."""
    out = [
        f"# gpu_max_power_w={grid.gpu_max_power_w:.{CSV_DECIMALS}f}",
        f"# gpu_memory_mb={grid.gpu_memory_mb:.{CSV_DECIMALS}f}",
        f"# power_kind={grid.power_kind}",
    ]
    if grid.gpu_idle_power_w is not None:
        out.append(f"# gpu_idle_power_w={grid.gpu_idle_power_w:.{CSV_DECIMALS}f}")
    if grid.model_mem_mb is not None:
        out.append(f"# model_mem_mb={grid.model_mem_mb:.{CSV_DECIMALS}f}")
    out.append(GRID_HEADER)
    for config in sorted(grid.entries):
        entry = grid.entries[config]
        out.append(
            f"{grid.model_name},{grid.gpu_name},{config.mtl},{config.bs},"
            f"{entry.throughput_ips:.{CSV_DECIMALS}f},{entry.power_w:.{CSV_DECIMALS}f}"
        )
    return "\n".join(out) + "\n"


def save_grid(grid: ProfileGrid, path: str | Path) -> None:
    """Write a grid to canonical CSV (UTF-8, LF)."""
    Path(path).write_text(grid_csv_text(grid), encoding="utf-8", newline="\n")
