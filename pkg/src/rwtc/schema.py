"""Field specifications, cross-field constraints and manifest loading."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional

from rwtc.expr import (
    ENV_TYPES,
    TIPE_EXPR_TYPES,
    Expr,
    ExprError,
    ExprType,
    field_refs,
    parse_expr,
    to_source,
    typecheck_expr,
    uses_value,
)
from rwtc.model import REFERENCE_ENV, Environment, RTipe

FIELD_COLUMNS = (
    "name",
    "subsystem",
    "tipe",
    "property",
    "unit",
    "interp",
    "advice",
    "default",
    "variants",
    "sentinels",
    "required",
)
CROSS_COLUMNS = ("id", "expr", "description")
KNOWN_SUBSYSTEMS = ("core", "hdfs", "yarn", "mapred")

_NAME_RE = re.compile(r"[A-Za-z0-9_.\-]+")
_INT_RE = re.compile(r"-?[0-9]+")


class SchemaError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownFieldError(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self):
        return f"unknown field {self.name!r}"


@dataclass(frozen=True)
class FieldSpec:
    name: str
    subsystem: str
    tipe: RTipe
    property: Expr
    unit: str = ""
    interp: str = ""
    advice: str = ""
    default_raw: Optional[str] = None
    grid_variants: Optional[tuple[str, ...]] = None
    none_sentinels: tuple[str, ...] = ()
    required: bool = False

    @property
    def expr_type(self) -> ExprType:
        return TIPE_EXPR_TYPES[self.tipe]

    @property
    def property_source(self) -> str:
        return to_source(self.property)


@dataclass(frozen=True)
class CrossConstraint:
    id: str
    expr: Expr
    description: str = ""
    refs: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "refs", field_refs(self.expr))


@dataclass(frozen=True)
class ConfigSchema:
    name: str
    fields: Mapping[str, FieldSpec]
    cross_constraints: tuple[CrossConstraint, ...] = ()
    subsystems: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "fields", MappingProxyType(dict(self.fields)))

    def field_types(self) -> dict[str, ExprType]:
        return {n: f.expr_type for n, f in self.fields.items()}

    def __getitem__(self, name: str) -> FieldSpec:
        try:
            return self.fields[name]
        except KeyError:
            raise UnknownFieldError(name) from None


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_field(spec: FieldSpec, env: Environment = REFERENCE_ENV, line: Optional[int] = None):
    """Check a FieldSpec's invariants; raises SchemaError."""
    if not _NAME_RE.fullmatch(spec.name):
        raise SchemaError(f"bad field name {spec.name!r}", line)
    try:
        t = typecheck_expr(spec.property, spec.expr_type, {}, ENV_TYPES)
    except ExprError as exc:
        raise SchemaError(f"{spec.name}: property does not type-check: {exc}", line) from exc
    if t is not ExprType.BOOL:
        raise SchemaError(f"{spec.name}: property has type {t.value}, expected bool", line)
    if (spec.tipe is RTipe.OPTPOS) != bool(spec.none_sentinels):
        raise SchemaError(f"{spec.name}: none_sentinels must be given exactly for optpos fields", line)
    for s in spec.none_sentinels:
        if not _INT_RE.fullmatch(s):
            raise SchemaError(f"{spec.name}: sentinel {s!r} is not an integer", line)
    if spec.grid_variants is not None and not spec.grid_variants:
        raise SchemaError(f"{spec.name}: empty variant list", line)
    if spec.default_raw is not None:
        from rwtc.checker import FieldRejected, check_field

        try:
            check_field(spec, spec.default_raw, False, env)
        except FieldRejected as exc:
            msgs = "; ".join(d.message for d in exc.diagnostics)
            raise SchemaError(f"{spec.name}: default {spec.default_raw!r} rejected: {msgs}", line) from exc


def validate_cross(cc: CrossConstraint, types: dict[str, ExprType], line: Optional[int] = None):
    if uses_value(cc.expr):
        raise SchemaError(f"cross-constraint {cc.id}: `value` is not allowed here", line)
    try:
        t = typecheck_expr(cc.expr, None, types, ENV_TYPES)
    except ExprError as exc:
        raise SchemaError(f"cross-constraint {cc.id}: {exc}", line) from exc
    if t is not ExprType.BOOL:
        raise SchemaError(f"cross-constraint {cc.id}: type {t.value}, expected bool", line)


def _assemble(
    name: str,
    field_rows: list[tuple[Optional[int], FieldSpec]],
    cross_rows: list[tuple[Optional[int], CrossConstraint]],
    env: Environment,
) -> ConfigSchema:
    table: dict[str, FieldSpec] = {}
    subsystems: dict[str, None] = {}
    for lineno, spec in field_rows:
        if spec.name in table:
            raise SchemaError(f"duplicate field {spec.name!r}", lineno)
        validate_field(spec, env, lineno)
        table[spec.name] = spec
        subsystems.setdefault(spec.subsystem)
    types = {n: f.expr_type for n, f in table.items()}
    ids: set[str] = set()
    for lineno, cc in cross_rows:
        if cc.id in ids:
            raise SchemaError(f"duplicate cross-constraint {cc.id!r}", lineno)
        ids.add(cc.id)
        validate_cross(cc, types, lineno)
    order = {s: i for i, s in enumerate(KNOWN_SUBSYSTEMS)}
    ordered = sorted(subsystems, key=lambda s: (order.get(s, len(order)), s))
    return ConfigSchema(name, table, tuple(cc for _, cc in cross_rows), tuple(ordered))


def build_schema(
    name: str,
    fields: list[FieldSpec],
    cross: list[CrossConstraint] = (),
    env: Environment = REFERENCE_ENV,
) -> ConfigSchema:
    """Assemble and fully validate a schema from in-memory parts."""
    return _assemble(name, [(None, f) for f in fields], [(None, c) for c in cross], env)


# ---------------------------------------------------------------------------
# Manifest format
# ---------------------------------------------------------------------------


def _split_row(line: str) -> list[str]:
    cells, buf, esc = [], [], False
    for ch in line:
        if esc:
            buf.append(ch)
            esc = False
        elif ch == "\\":
            esc = True
        elif ch == "|":
            cells.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    if esc:
        buf.append("\\")
    cells.append("".join(buf).strip())
    return cells


def _escape_cell(text: str) -> str:
    return text.replace("\\", "\\\\").replace("|", "\\|")


def _list_cell(cell: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in cell.split(",")) if cell else ()


def _bool_cell(cell: str, lineno: int) -> bool:
    v = cell.lower()
    if v in ("", "false", "no"):
        return False
    if v in ("true", "yes"):
        return True
    raise SchemaError(f"required must be true or false, got {cell!r}", lineno)


def _parse_field_row(cells: list[str], lineno: int) -> FieldSpec:
    if len(cells) != len(FIELD_COLUMNS):
        raise SchemaError(f"field row needs {len(FIELD_COLUMNS)} cells, got {len(cells)}", lineno)
    name, subsystem, tipe, prop, unit, interp, advice, default, variants, sentinels, required = cells
    try:
        rtipe = RTipe(tipe.lower())
    except ValueError:
        raise SchemaError(f"unknown tipe {tipe!r}", lineno) from None
    if not subsystem:
        raise SchemaError(f"{name}: missing subsystem", lineno)
    try:
        expr = parse_expr(prop or "true")
    except ExprError as exc:
        raise SchemaError(f"{name}: {exc}", lineno) from exc
    return FieldSpec(
        name=name,
        subsystem=subsystem,
        tipe=rtipe,
        property=expr,
        unit=unit,
        interp=interp,
        advice=advice,
        default_raw=default or None,
        grid_variants=_list_cell(variants) or None,
        none_sentinels=_list_cell(sentinels),
        required=_bool_cell(required, lineno),
    )


def _parse_cross_row(cells: list[str], lineno: int) -> CrossConstraint:
    if len(cells) != len(CROSS_COLUMNS):
        raise SchemaError(f"cross row needs {len(CROSS_COLUMNS)} cells, got {len(cells)}", lineno)
    cid, source, desc = cells
    if not cid:
        raise SchemaError("cross-constraint without id", lineno)
    try:
        expr = parse_expr(source)
    except ExprError as exc:
        raise SchemaError(f"cross-constraint {cid}: {exc}", lineno) from exc
    return CrossConstraint(cid, expr, desc)


def parse_manifest(text: str, name: str = "schema", env: Environment = REFERENCE_ENV) -> ConfigSchema:
    """Parse and validate manifest text. Errors carry 1-based line numbers."""
    section = None
    field_rows: list[tuple[int, FieldSpec]] = []
    cross_rows: list[tuple[int, CrossConstraint]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped in ("[fields]", "[cross]"):
            section = stripped[1:-1]
            continue
        if stripped.startswith("["):
            raise SchemaError(f"unknown section {stripped!r}", lineno)
        if section is None:
            raise SchemaError("row outside of a [fields] or [cross] section", lineno)
        cells = _split_row(stripped)
        if section == "fields":
            field_rows.append((lineno, _parse_field_row(cells, lineno)))
        else:
            cross_rows.append((lineno, _parse_cross_row(cells, lineno)))

    return _assemble(name, field_rows, cross_rows, env)


def load_schema(manifest_path: str | Path, env: Environment = REFERENCE_ENV) -> ConfigSchema:
    path = Path(manifest_path)
    return parse_manifest(path.read_text(encoding="utf-8"), path.stem, env)


def serialize_schema(schema: ConfigSchema) -> str:
    out = [f"# schema: {schema.name}", "[fields]"]
    for f in schema.fields.values():
        row = [
            f.name,
            f.subsystem,
            f.tipe.value,
            f.property_source,
            f.unit,
            f.interp,
            f.advice,
            f.default_raw or "",
            ",".join(f.grid_variants or ()),
            ",".join(f.none_sentinels),
            "true" if f.required else "false",
        ]
        out.append("|".join(_escape_cell(c) for c in row))
    out.append("")
    out.append("[cross]")
    for cc in schema.cross_constraints:
        out.append("|".join(_escape_cell(c) for c in (cc.id, to_source(cc.expr), cc.description)))
    return "\n".join(out) + "\n"


@lru_cache(maxsize=1)
def bundled_hadoop_schema() -> ConfigSchema:
    """The shipped Hadoop 2.7 schema (core, hdfs, yarn, mapred)."""
    text = resources.files("rwtc.data").joinpath("hadoop.manifest").read_text(encoding="utf-8")
    return parse_manifest(text, "hadoop")


@dataclass(frozen=True)
class FieldExplanation:
    name: str
    subsystem: str
    tipe: str
    unit: str
    property: str
    interp: str
    advice: str
    default: Optional[str]
    none_sentinels: tuple[str, ...]

    def to_text(self) -> str:
        rows = [
            ("field", self.name),
            ("subsystem", self.subsystem),
            ("tipe", self.tipe),
            ("unit", self.unit),
            ("property", self.property),
            ("interp", self.interp),
            ("advice", self.advice),
            ("default", self.default or ""),
        ]
        if self.none_sentinels:
            rows.append(("none_sentinels", ",".join(self.none_sentinels)))
        return "\n".join(f"{k}: {v}" for k, v in rows) + "\n"


def explain_field(schema: ConfigSchema, name: str) -> FieldExplanation:
    """Metadata for one field. Raises UnknownFieldError for undeclared names."""
    spec = schema[name]
    return FieldExplanation(
        name=spec.name,
        subsystem=spec.subsystem,
        tipe=spec.tipe.value,
        unit=spec.unit,
        property=spec.property_source,
        interp=spec.interp,
        advice=spec.advice,
        default=spec.default_raw,
        none_sentinels=spec.none_sentinels,
    )
