"""Filter-then-profile search over sampled configurations."""
from __future__ import annotations

import hashlib
import math
import random
import threading
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Protocol, Sequence

from rwtc.checker import check_config
from rwtc.ingest import serialize_config
from rwtc.model import Environment, RawConfig, RawEntry, RTipe
from rwtc.schema import ConfigSchema, FieldSpec, SchemaError

DEFAULT_PROFILE_TIME_S = 30.0
VARIANT_FACTORS = (Decimal("0.8"), Decimal("0.9"), Decimal("1"), Decimal("1.1"), Decimal("1.2"))
SMALL_POSITIVES = ("1", "2", "3", "4")


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    candidates: Mapping[str, tuple[str, ...]]
    seed: int = 0
    sample_count: int = 1

    def __post_init__(self):
        if self.sample_count < 1:
            raise GridError(f"sample_count must be >= 1, got {self.sample_count}")
        cands = {k: tuple(v) for k, v in self.candidates.items()}
        for k, v in cands.items():
            if not v:
                raise GridError(f"empty candidate list for {k}")
        object.__setattr__(self, "candidates", MappingProxyType(cands))

    def size(self) -> int:
        return math.prod(len(v) for v in self.candidates.values())


def _fmt_decimal(d: Decimal) -> str:
    text = format(d.normalize(), "f")
    return text


def derive_variants(spec: FieldSpec) -> tuple[str, ...]:
    """Candidate raw values for a field with no explicit variants.

    Integral types take the default scaled by 0.8, 0.9, 1, 1.1 and 1.2 and
    rounded half-up; floats are scaled without rounding. Option-positive
    fields get their sentinels plus 1..4, booleans both values, and strings
    and JVM options just the default.
    """
    t = spec.tipe
    if t is RTipe.BOOL:
        return ("true", "false")
    if t is RTipe.OPTPOS:
        out = list(spec.none_sentinels) + list(SMALL_POSITIVES)
        if spec.default_raw is not None and spec.default_raw not in out:
            out.append(spec.default_raw)
        return tuple(out)
    if spec.default_raw is None:
        raise GridError(f"{spec.name}: no default and no variants to derive a grid from")
    if t in (RTipe.INT, RTipe.POS, RTipe.NONNEG):
        try:
            base = Decimal(int(spec.default_raw))
        except ValueError:
            return (spec.default_raw,)
        vals = {int((base * f).to_integral_value(ROUND_HALF_UP)) for f in VARIANT_FACTORS}
        return tuple(str(v) for v in sorted(vals))
    if t is RTipe.FLOAT:
        base = Decimal(spec.default_raw)
        vals = sorted({base * f for f in VARIANT_FACTORS})
        return tuple(_fmt_decimal(v) for v in vals)
    return (spec.default_raw,)


def build_grid(
    schema: ConfigSchema,
    overrides: Optional[Mapping[str, Sequence[str]]] = None,
    seed: int = 0,
    sample_count: int = 1,
) -> Grid:
    """Per-field candidate lists: overrides, then schema variants, then derived."""
    overrides = dict(overrides or {})
    unknown = [k for k in overrides if k not in schema.fields]
    if unknown:
        raise SchemaError(f"grid override for unknown field(s): {', '.join(unknown)}")
    cands: dict[str, tuple[str, ...]] = {}
    for name, spec in schema.fields.items():
        if name in overrides:
            cands[name] = tuple(overrides[name])
        elif spec.grid_variants:
            cands[name] = spec.grid_variants
        else:
            cands[name] = derive_variants(spec)
    return Grid(cands, seed, sample_count)


def sample_candidates(grid: Grid) -> Iterator[RawConfig]:
    """Yield ``grid.sample_count`` configurations, one uniform draw per field."""
    rng = random.Random(grid.seed)
    items = list(grid.candidates.items())
    for i in range(grid.sample_count):
        source = f"candidate-{i:05d}"
        entries = {}
        for j, (name, values) in enumerate(items):
            entries[name] = RawEntry(values[rng.randrange(len(values))], False, (source, j))
        yield RawConfig(entries)


# ---------------------------------------------------------------------------
# Profilers
# ---------------------------------------------------------------------------


class Profiler(Protocol):
    def measure(self, config: RawConfig) -> float:
        """Runtime of one benchmark run under ``config``, in seconds (> 0)."""
        ...


class ProfilerError(RuntimeError):
    pass


# Field -> value at which the synthetic job runs fastest.
MOCK_SWEET_SPOTS = {
    "io.file.buffer.size": 65536,
    "dfs.blocksize": 268435456,
    "mapreduce.task.io.sort.mb": 200,
    "mapreduce.map.memory.mb": 2048,
    "mapreduce.reduce.memory.mb": 2048,
    "mapreduce.job.reduces": 4,
    "mapreduce.reduce.shuffle.parallelcopies": 10,
}


class MockProfiler:
    """Deterministic synthetic benchmark around a 30 s base runtime.

    ``runtime = base * (1 + weight * sum(log2(v / sweet)**2)) + noise`` where
    the sum runs over the numeric fields in ``sweet_spots`` present in the
    config, and ``noise`` is uniform on ``[-noise_s, noise_s]``, derived from
    a hash of ``(seed, config)`` so repeated calls agree.
    """

    def __init__(
        self,
        seed: int = 0,
        base_s: float = DEFAULT_PROFILE_TIME_S,
        weight: float = 0.005,
        noise_s: float = 0.5,
        sweet_spots: Optional[Mapping[str, float]] = None,
    ):
        if noise_s >= base_s:
            raise ValueError("noise must stay below the base runtime")
        self.seed = seed
        self.base_s = base_s
        self.weight = weight
        self.noise_s = noise_s
        self.sweet_spots = dict(MOCK_SWEET_SPOTS if sweet_spots is None else sweet_spots)
        self.calls = 0
        self._lock = threading.Lock()

    def smooth(self, config: RawConfig) -> float:
        total = 0.0
        for name, sweet in self.sweet_spots.items():
            entry = config.entries.get(name)
            if entry is None:
                continue
            try:
                v = float(entry.raw_value)
            except ValueError:
                continue
            if v > 0:
                total += math.log2(v / sweet) ** 2
        return self.base_s * (1.0 + self.weight * total)

    def noise(self, config: RawConfig) -> float:
        h = hashlib.sha256(str(self.seed).encode())
        for name in sorted(config.entries):
            h.update(f"\0{name}={config.entries[name].raw_value}".encode())
        u = int.from_bytes(h.digest()[:8], "big") / 2**64
        return (2.0 * u - 1.0) * self.noise_s

    def measure(self, config: RawConfig) -> float:
        with self._lock:
            self.calls += 1
        return self.smooth(config) + self.noise(config)


def mock_profiler(seed: int = 0) -> MockProfiler:
    return MockProfiler(seed)


# ---------------------------------------------------------------------------
# Search loop
# ---------------------------------------------------------------------------


def compute_savings(
    total: int,
    invalid: int,
    profile_time_s: float,
    runs: int,
    check_time_total_s: float,
) -> tuple[float, float]:
    """Time saved by checking every candidate instead of profiling the invalid ones.

    ``saved = invalid * profile_time * runs - check_time_total`` and the
    fraction is relative to profiling all ``total`` candidates.
    """
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= invalid <= total:
        raise ValueError("need 0 <= invalid <= total")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if profile_time_s <= 0:
        raise ValueError("profile_time_s must be positive")
    if check_time_total_s < 0:
        raise ValueError("check_time_total_s must be >= 0")
    saved = invalid * profile_time_s * runs - check_time_total_s
    return saved, saved / (total * profile_time_s * runs)


@dataclass(frozen=True)
class SearchStats:
    total: int
    invalid: int
    valid: int
    runs_per_config: int
    profile_time_s: float
    check_time_total_s: float
    best_config: Optional[RawConfig]
    best_runtime_s: Optional[float]
    saved_s: float
    saved_fraction: float
    best_index: Optional[int] = None
    profiler_calls: int = 0
    profile_failures: tuple[tuple[int, str], ...] = field(default=())

    def summary_lines(self, with_timing: bool = True) -> list[str]:
        lines = [
            f"total: {self.total}",
            f"invalid: {self.invalid}",
            f"valid: {self.valid}",
            f"runs_per_config: {self.runs_per_config}",
            f"profiler_calls: {self.profiler_calls}",
            f"profile_failures: {len(self.profile_failures)}",
            f"profile_time_s: {self.profile_time_s:.6f}",
        ]
        if self.best_config is None:
            lines.append("best_index: none")
            lines.append("best_runtime_s: none")
        else:
            lines.append(f"best_index: {self.best_index}")
            lines.append(f"best_runtime_s: {self.best_runtime_s:.6f}")
        if with_timing:
            lines += [
                f"check_time_total_s: {self.check_time_total_s:.6f}",
                f"saved_s: {self.saved_s:.6f}",
                f"saved_fraction: {self.saved_fraction:.6f}",
            ]
        return lines

    def to_text(self, with_timing: bool = True) -> str:
        return "\n".join(self.summary_lines(with_timing)) + "\n"

    def best_site_xml(self) -> Optional[str]:
        return None if self.best_config is None else serialize_config(self.best_config)


def run_search(
    schema: ConfigSchema,
    env: Environment,
    grid: Grid,
    profiler: Profiler,
    runs_per_config: int = 3,
    profile_time_s: Optional[float] = None,
    check_cost_s: Optional[float] = None,
) -> SearchStats:
    """Check every sampled candidate and profile only the ones that pass.

    ``profile_time_s`` defaults to the mean observed profiler runtime (30 s
    if nothing was profiled). ``check_cost_s``, when given, models the check
    time as ``total * check_cost_s`` instead of measuring it.
    """
    if runs_per_config < 1:
        raise ValueError("runs_per_config must be >= 1")
    unknown = [k for k in grid.candidates if k not in schema.fields]
    if unknown:
        raise SchemaError(f"grid references unknown field(s): {', '.join(unknown)}")

    total = invalid = valid = calls = 0
    check_time = 0.0
    runtimes: list[float] = []
    failures: list[tuple[int, str]] = []
    best: Optional[RawConfig] = None
    best_mean = math.inf
    best_index: Optional[int] = None

    for idx, cand in enumerate(sample_candidates(grid)):
        total += 1
        t0 = time.perf_counter()
        report = check_config(schema, cand, env, identity=f"candidate-{idx:05d}")
        check_time += time.perf_counter() - t0
        if not report.passed:
            invalid += 1
            continue
        valid += 1
        samples = []
        try:
            for _ in range(runs_per_config):
                calls += 1
                r = float(profiler.measure(cand))
                if not r > 0:
                    raise ProfilerError(f"non-positive runtime {r!r}")
                samples.append(r)
        except Exception as exc:  # profiler failures skip the candidate
            failures.append((idx, f"{type(exc).__name__}: {exc}"))
            continue
        runtimes.extend(samples)
        mean = math.fsum(samples) / len(samples)
        if mean < best_mean:
            best, best_mean, best_index = cand, mean, idx

    if profile_time_s is None:
        profile_time_s = math.fsum(runtimes) / len(runtimes) if runtimes else DEFAULT_PROFILE_TIME_S
    if check_cost_s is not None:
        check_time = total * check_cost_s
    saved, frac = compute_savings(total, invalid, profile_time_s, runs_per_config, check_time)
    return SearchStats(
        total=total,
        invalid=invalid,
        valid=valid,
        runs_per_config=runs_per_config,
        profile_time_s=profile_time_s,
        check_time_total_s=check_time,
        best_config=best,
        best_runtime_s=None if best is None else best_mean,
        saved_s=saved,
        saved_fraction=frac,
        best_index=best_index,
        profiler_calls=calls,
        profile_failures=tuple(failures),
    )
