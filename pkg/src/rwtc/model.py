"""Base-type vocabulary, lifted values, environment descriptor and diagnostics.

Every type here is immutable; invariants are enforced at construction so a
value that violates its base type cannot exist.
"""
from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from functools import cached_property
from decimal import Decimal
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Union


class RTipe(str, enum.Enum):
    """Base-type tag carried by every field."""

    INT = "int"
    POS = "pos"
    NONNEG = "nonneg"
    STR = "str"
    BOOL = "bool"
    FLOAT = "float"
    JAVAOPTS = "javaopts"
    OPTPOS = "optpos"


class LiftError(ValueError):
    """A raw machine value could not be lifted to the requested base type."""

    def __init__(self, raw: str, tipe: RTipe | str, reason: str):
        self.raw = raw
        self.tipe = RTipe(tipe)
        self.reason = reason
        super().__init__(f"cannot lift {raw!r} to {self.tipe.value}: {reason}")


# ---------------------------------------------------------------------------
# JVM options
# ---------------------------------------------------------------------------

_HEAP_RE = re.compile(r"-Xm([sx])([0-9]+)([A-Za-z]?)$")
_UNIT_FACTOR = {"k": None, "m": 1, "g": 1024}


@dataclass(frozen=True)
class JavaOpts:
    init_heap_mb: int
    max_heap_mb: int
    extra_flags: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("init_heap_mb", "max_heap_mb"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.init_heap_mb > self.max_heap_mb:
            raise ValueError(
                f"initial heap {self.init_heap_mb}m exceeds maximum heap {self.max_heap_mb}m"
            )
        object.__setattr__(self, "extra_flags", tuple(self.extra_flags))
        for tok in self.extra_flags:
            if tok.startswith(("-Xms", "-Xmx")):
                raise ValueError(f"heap flag {tok!r} not allowed in extra_flags")


def _heap_mb(number: str, unit: str) -> int:
    n = int(number)
    u = unit.lower()
    if u == "k":
        return -(-n // 1024)
    if u == "m":
        return n
    if u == "g":
        return n * 1024
    raise ValueError(unit)


def parse_java_opts(raw: str) -> JavaOpts:
    """Parse a JVM option string such as ``-Xms1024m -Xmx4096m``.

    Heap sizes are normalized to megabytes (kilobytes round up). Tokens other
    than ``-Xms``/``-Xmx`` are kept verbatim, in order.

    Raises:
        LiftError: missing or duplicate heap flag, malformed size, unknown
            unit, or initial heap larger than the maximum.
    """
    init: Optional[int] = None
    maxh: Optional[int] = None
    extra = []
    for tok in raw.split():
        if not tok.startswith(("-Xms", "-Xmx")):
            extra.append(tok)
            continue
        m = _HEAP_RE.match(tok)
        if m is None:
            raise LiftError(raw, RTipe.JAVAOPTS, f"malformed heap flag {tok!r}")
        which, number, unit = m.groups()
        if unit == "" or unit.lower() not in _UNIT_FACTOR:
            raise LiftError(raw, RTipe.JAVAOPTS, f"unknown or missing unit in {tok!r}")
        size = _heap_mb(number, unit)
        if size < 1:
            raise LiftError(raw, RTipe.JAVAOPTS, f"heap size must be positive in {tok!r}")
        if which == "s":
            if init is not None:
                raise LiftError(raw, RTipe.JAVAOPTS, "duplicate -Xms")
            init = size
        else:
            if maxh is not None:
                raise LiftError(raw, RTipe.JAVAOPTS, "duplicate -Xmx")
            maxh = size
    if init is None:
        raise LiftError(raw, RTipe.JAVAOPTS, "missing -Xms")
    if maxh is None:
        raise LiftError(raw, RTipe.JAVAOPTS, "missing -Xmx")
    if init > maxh:
        raise LiftError(raw, RTipe.JAVAOPTS, f"initial heap {init}m exceeds maximum {maxh}m")
    return JavaOpts(init, maxh, tuple(extra))


# ---------------------------------------------------------------------------
# Lifted values
# ---------------------------------------------------------------------------

Payload = Union[int, str, bool, Decimal, JavaOpts, None]


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


@dataclass(frozen=True)
class BaseValue:
    """A raw value lifted into one of the eight base types.

    ``payload`` is an ``int`` for INT/POS/NONNEG, ``str``, ``bool``,
    ``Decimal`` for FLOAT, :class:`JavaOpts`, or ``int | None`` for OPTPOS.
    """

    tipe: RTipe
    payload: Payload

    def __post_init__(self):
        t = RTipe(self.tipe)
        object.__setattr__(self, "tipe", t)
        p = self.payload
        if t is RTipe.INT:
            ok = _is_int(p)
        elif t is RTipe.POS:
            ok = _is_int(p) and p >= 1
        elif t is RTipe.NONNEG:
            ok = _is_int(p) and p >= 0
        elif t is RTipe.STR:
            ok = isinstance(p, str)
        elif t is RTipe.BOOL:
            ok = isinstance(p, bool)
        elif t is RTipe.FLOAT:
            ok = isinstance(p, Decimal) and p.is_finite()
        elif t is RTipe.JAVAOPTS:
            ok = isinstance(p, JavaOpts)
        else:
            ok = p is None or (_is_int(p) and p >= 1)
        if not ok:
            raise ValueError(f"payload {p!r} is not a valid {t.value} value")

    # Short constructors, mostly for tests and the REPL.
    @classmethod
    def integer(cls, i: int) -> "BaseValue":
        return cls(RTipe.INT, i)

    @classmethod
    def pos(cls, p: int) -> "BaseValue":
        return cls(RTipe.POS, p)

    @classmethod
    def nonneg(cls, n: int) -> "BaseValue":
        return cls(RTipe.NONNEG, n)

    @classmethod
    def string(cls, s: str) -> "BaseValue":
        return cls(RTipe.STR, s)

    @classmethod
    def boolean(cls, b: bool) -> "BaseValue":
        return cls(RTipe.BOOL, b)

    @classmethod
    def decimal(cls, f) -> "BaseValue":
        return cls(RTipe.FLOAT, Decimal(f) if not isinstance(f, Decimal) else f)

    @classmethod
    def jvm(cls, j: JavaOpts) -> "BaseValue":
        return cls(RTipe.JAVAOPTS, j)

    @classmethod
    def optpos(cls, o: Optional[int]) -> "BaseValue":
        return cls(RTipe.OPTPOS, o)


def render_base_value(v: BaseValue) -> str:
    """Canonical text of a lifted value. OPTPOS ``None`` renders as ``none``."""
    p = v.payload
    if v.tipe is RTipe.BOOL:
        return "true" if p else "false"
    if v.tipe is RTipe.OPTPOS:
        return "none" if p is None else str(p)
    if v.tipe is RTipe.JAVAOPTS:
        return " ".join([f"-Xms{p.init_heap_mb}m", f"-Xmx{p.max_heap_mb}m", *p.extra_flags])
    return str(p)


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

ENV_INT_KEYS = (
    "phys_cpu_cores",
    "virt_cpu_cores",
    "phys_mem_mb",
    "virt_mem_mb",
    "hw_page_size",
    "max_file_desc",
    "max_threads",
)
ENV_KEYS = ENV_INT_KEYS + ("comp_codecs",)


class EnvError(ValueError):
    """Malformed or invalid environment descriptor."""


@dataclass(frozen=True)
class Environment:
    """Platform parameters that configuration constraints refer to."""

    phys_cpu_cores: int
    virt_cpu_cores: int
    phys_mem_mb: int
    virt_mem_mb: int
    hw_page_size: int
    max_file_desc: int
    max_threads: int
    comp_codecs: tuple[str, ...] = ()

    def __post_init__(self):
        for k in ENV_INT_KEYS:
            v = getattr(self, k)
            if not _is_int(v) or v < 1:
                raise EnvError(f"{k} must be a positive integer, got {v!r}")
        codecs = tuple(self.comp_codecs)
        if any(not c for c in codecs):
            raise EnvError("comp_codecs entries must be nonempty")
        if len(set(codecs)) != len(codecs):
            raise EnvError("comp_codecs entries must be unique")
        object.__setattr__(self, "comp_codecs", codecs)

    @cached_property
    def _fingerprint(self) -> str:
        return hashlib.sha256(to_env_text(self).encode("utf-8")).hexdigest()[:16]

    def fingerprint(self) -> str:
        return self._fingerprint


def parse_env_text(text: str) -> Environment:
    """Parse the flat ``key=value`` environment descriptor."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise EnvError(f"line {lineno}: expected key=value")
        if key not in ENV_KEYS:
            raise EnvError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise EnvError(f"line {lineno}: duplicate key {key!r}")
        if key == "comp_codecs":
            values[key] = tuple(c.strip() for c in val.split(",")) if val else ()
        else:
            if not re.fullmatch(r"[0-9]+", val):
                raise EnvError(f"line {lineno}: {key} must be a positive integer")
            values[key] = int(val)
    missing = [k for k in ENV_KEYS if k not in values]
    if missing:
        raise EnvError(f"missing keys: {', '.join(missing)}")
    return Environment(**values)


def load_env(path: str | Path) -> Environment:
    return parse_env_text(Path(path).read_text(encoding="utf-8"))


def to_env_text(env: Environment) -> str:
    lines = [f"{k}={getattr(env, k)}" for k in ENV_INT_KEYS]
    lines.append("comp_codecs=" + ",".join(env.comp_codecs))
    return "\n".join(lines) + "\n"


# Reference platform: 14 physical cores, 32 GB, 4 KiB pages. The codec
# list is the set shipped with stock Hadoop 2.7.
REFERENCE_ENV = Environment(
    phys_cpu_cores=14,
    virt_cpu_cores=28,
    phys_mem_mb=32768,
    virt_mem_mb=32768,
    hw_page_size=4096,
    max_file_desc=3000,
    max_threads=500,
    comp_codecs=(
        "org.apache.hadoop.io.compress.DefaultCodec",
        "org.apache.hadoop.io.compress.GzipCodec",
        "org.apache.hadoop.io.compress.BZip2Codec",
        "org.apache.hadoop.io.compress.Lz4Codec",
        "org.apache.hadoop.io.compress.SnappyCodec",
    ),
)


# ---------------------------------------------------------------------------
# Raw configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawEntry:
    raw_value: str
    final: bool = False
    source: tuple[str, int] = ("<memory>", 0)


@dataclass(frozen=True, eq=False)
class RawConfig:
    """Ordered, read-only map from dotted field name to :class:`RawEntry`."""

    entries: Mapping[str, RawEntry] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @classmethod
    def from_values(cls, values: Mapping[str, str] | Iterable[tuple[str, str]],
                    source: str = "<memory>") -> "RawConfig":
        items = values.items() if isinstance(values, Mapping) else values
        return cls({k: RawEntry(str(v), False, (source, i)) for i, (k, v) in enumerate(items)})

    def values(self) -> dict[str, str]:
        return {k: e.raw_value for k, e in self.entries.items()}

    def __eq__(self, other):
        if not isinstance(other, RawConfig):
            return NotImplemented
        return dict(self.entries) == dict(other.entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, name):
        return name in self.entries

    def __getitem__(self, name) -> RawEntry:
        return self.entries[name]

    def __iter__(self):
        return iter(self.entries)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


class DiagnosticKind(str, enum.Enum):
    LIFT_FAILURE = "LiftFailure"
    PROPERTY_VIOLATION = "PropertyViolation"
    CROSS_FIELD_VIOLATION = "CrossFieldViolation"
    MISSING_FIELD = "MissingField"
    UNKNOWN_FIELD = "UnknownField"
    FINAL_OVERRIDE = "FinalOverride"

    @property
    def is_hard(self) -> bool:
        return self not in (DiagnosticKind.UNKNOWN_FIELD, DiagnosticKind.FINAL_OVERRIDE)


_FIELD_REQUIRED = {
    DiagnosticKind.LIFT_FAILURE,
    DiagnosticKind.PROPERTY_VIOLATION,
    DiagnosticKind.MISSING_FIELD,
}


@dataclass(frozen=True)
class Diagnostic:
    field: Optional[str]
    constraint_id: str
    kind: DiagnosticKind
    message: str

    def __post_init__(self):
        object.__setattr__(self, "kind", DiagnosticKind(self.kind))
        if self.kind in _FIELD_REQUIRED and not self.field:
            raise ValueError(f"{self.kind.value} diagnostic requires a field name")
        if self.kind is DiagnosticKind.CROSS_FIELD_VIOLATION and not self.constraint_id:
            raise ValueError("CrossFieldViolation requires a constraint id")

    @property
    def is_hard(self) -> bool:
        return self.kind.is_hard

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "field": self.field,
            "constraint_id": self.constraint_id,
            "message": self.message,
        }
