"""Lift raw values to base types and prove their properties by evaluation.

A :class:`CertifiedField` is this package's stand-in for a dependent pair
(value, proof): it is only ever built after the field's property evaluated
to true, and it records which property and environment were used.
"""
from __future__ import annotations

import json
import re
import time
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from types import MappingProxyType
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

from rwtc.expr import EvalError, eval_payload
from rwtc.model import (
    BaseValue,
    Diagnostic,
    DiagnosticKind,
    Environment,
    LiftError,
    RawConfig,
    RawEntry,
    RTipe,
    parse_java_opts,
    render_base_value,
)

if TYPE_CHECKING:
    from rwtc.schema import ConfigSchema, FieldSpec

_INT_RE = re.compile(r"-?[0-9]+")
_DEC_RE = re.compile(r"-?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")


class FieldRejected(Exception):
    """Raised by :func:`check_field`; carries the diagnostics that explain why."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.message for d in diagnostics))


# ---------------------------------------------------------------------------
# Lifting
# ---------------------------------------------------------------------------


def lift_value(raw: str, spec: "FieldSpec") -> BaseValue:
    """Lift a raw string to ``spec.tipe``.

    Raises:
        LiftError: the string is not a value of the base type (for example
            ``-1`` for a positive field, or ``0`` for an option-positive one).
    """
    t = spec.tipe
    if t is RTipe.STR:
        return BaseValue(t, raw)
    if t is RTipe.BOOL:
        if raw == "true":
            return BaseValue(t, True)
        if raw == "false":
            return BaseValue(t, False)
        raise LiftError(raw, t, "expected true or false")
    if t is RTipe.JAVAOPTS:
        return BaseValue(t, parse_java_opts(raw))
    if t is RTipe.FLOAT:
        if not _DEC_RE.fullmatch(raw):
            raise LiftError(raw, t, "not a decimal literal")
        try:
            return BaseValue(t, Decimal(raw))
        except InvalidOperation:
            raise LiftError(raw, t, "not a decimal literal") from None
    if t is RTipe.OPTPOS:
        if raw in spec.none_sentinels:
            return BaseValue(t, None)
        if not _INT_RE.fullmatch(raw):
            raise LiftError(raw, t, "not an integer")
        n = int(raw)
        if n < 1:
            sentinels = ", ".join(spec.none_sentinels)
            raise LiftError(raw, t, f"must be a positive integer or one of {{{sentinels}}}")
        return BaseValue(t, n)
    # INT, POS, NONNEG
    if not _INT_RE.fullmatch(raw):
        raise LiftError(raw, t, "not a decimal integer")
    n = int(raw)
    if t is RTipe.POS and n < 1:
        raise LiftError(raw, t, "must be >= 1")
    if t is RTipe.NONNEG and n < 0:
        raise LiftError(raw, t, "must be >= 0")
    return BaseValue(t, n)


def render_raw(value: BaseValue, spec: "FieldSpec") -> str:
    """Inverse of :func:`lift_value`: the raw text a field should hold."""
    if value.tipe is RTipe.OPTPOS and value.payload is None:
        return spec.none_sentinels[0]
    return render_base_value(value)


# ---------------------------------------------------------------------------
# Certified values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Evidence:
    property_source: str
    evaluated_true: bool
    env_fingerprint: str

    def __post_init__(self):
        if self.evaluated_true is not True:
            raise ValueError("evidence must record a property that evaluated to true")


@dataclass(frozen=True)
class CertifiedField:
    field_id: str
    final: bool
    value: BaseValue
    evidence: Evidence


@dataclass(frozen=True)
class CrossEvidence:
    constraint_id: str
    evaluated_true: bool = True

    def __post_init__(self):
        if self.evaluated_true is not True:
            raise ValueError("cross evidence must record a constraint that held")


@dataclass(frozen=True, eq=False)
class CertifiedConfig:
    schema_name: str
    fields: Mapping[str, CertifiedField]
    cross_evidence: tuple[CrossEvidence, ...]
    environment: Environment

    def __post_init__(self):
        object.__setattr__(self, "fields", MappingProxyType(dict(self.fields)))

    def values(self) -> dict[str, BaseValue]:
        return {n: f.value for n, f in self.fields.items()}

    def to_raw_config(self, schema: "ConfigSchema") -> RawConfig:
        """Render certified values back to raw text (sentinels for empty options)."""
        return RawConfig(
            {
                n: RawEntry(render_raw(f.value, schema.fields[n]), f.final, ("<certified>", i))
                for i, (n, f) in enumerate(self.fields.items())
            }
        )


# ---------------------------------------------------------------------------
# Field and configuration checks
# ---------------------------------------------------------------------------


def _lift_diag(spec: "FieldSpec", exc: LiftError) -> Diagnostic:
    return Diagnostic(spec.name, f"{spec.name}:lift", DiagnosticKind.LIFT_FAILURE, str(exc))


def _check_field(spec: "FieldSpec", raw: str, final: bool, env: Environment, fp: str):
    """Return ``(CertifiedField, None)`` or ``(None | BaseValue, Diagnostic)``."""
    try:
        value = lift_value(raw, spec)
    except LiftError as exc:
        return None, _lift_diag(spec, exc)
    try:
        ok = eval_payload(spec.property, value.payload, {}, env)
    except EvalError as exc:
        return value, Diagnostic(
            spec.name,
            f"{spec.name}:property",
            DiagnosticKind.PROPERTY_VIOLATION,
            f"{spec.name} = {raw!r}: property `{spec.property_source}` could not be evaluated: {exc}",
        )
    if ok is not True:
        return value, Diagnostic(
            spec.name,
            f"{spec.name}:property",
            DiagnosticKind.PROPERTY_VIOLATION,
            f"{spec.name} = {raw!r} violates `{spec.property_source}`",
        )
    return CertifiedField(spec.name, final, value, Evidence(spec.property_source, True, fp)), None


def check_field(spec: "FieldSpec", raw: str, final: bool, env: Environment) -> CertifiedField:
    """Lift ``raw`` and evaluate the field property with ``value`` bound to it.

    Raises:
        FieldRejected: lift failure or property violation.
    """
    cf, diag = _check_field(spec, raw, final, env, env.fingerprint())
    if diag is not None:
        raise FieldRejected([diag])
    return cf


@dataclass(frozen=True, eq=False)
class CheckReport:
    identity: str
    passed: bool
    certified: Optional[CertifiedConfig]
    diagnostics: tuple[Diagnostic, ...]
    check_duration: float

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(d.kind.value for d in self.diagnostics)
        return {k.value: c.get(k.value, 0) for k in DiagnosticKind}

    @property
    def hard_diagnostics(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.is_hard]

    def to_dict(self, with_timing: bool = True) -> dict:
        d = {
            "config": self.identity,
            "outcome": "pass" if self.passed else "fail",
            "counts": self.counts,
            "diagnostics": [x.to_dict() for x in self.diagnostics],
        }
        if with_timing:
            d["check_duration_s"] = self.check_duration
        return d

    def to_json(self, with_timing: bool = True) -> str:
        return json.dumps(self.to_dict(with_timing), indent=2, sort_keys=False)

    def to_text(self) -> str:
        lines = [f"{self.identity}: {'PASS' if self.passed else 'FAIL'}"]
        for d in self.diagnostics:
            ident = d.field if d.kind is not DiagnosticKind.CROSS_FIELD_VIOLATION else d.constraint_id
            lines.append(f"{d.kind.value}\t{ident or '-'}\t{d.message}")
        return "\n".join(lines) + "\n"


def check_config(
    schema: "ConfigSchema",
    raw: RawConfig,
    env: Environment,
    identity: str = "<config>",
    warnings: Iterable[Diagnostic] = (),
) -> CheckReport:
    """Check a whole configuration; every problem is reported, none is fatal.

    Passes iff every required field is present, every present field lifts
    and satisfies its property, and every cross-constraint holds over the
    lifted values. Cross-constraints that touch a missing or rejected field
    fail as unresolved.
    """
    start = time.perf_counter()
    fp = env.fingerprint()
    diags: list[Diagnostic] = []
    certified: dict[str, CertifiedField] = {}
    view: dict[str, BaseValue] = {}

    for name, spec in schema.fields.items():
        entry = raw.entries.get(name)
        if entry is not None:
            text, final = entry.raw_value, entry.final
        elif spec.default_raw is not None:
            text, final = spec.default_raw, False
        else:
            if spec.required:
                diags.append(
                    Diagnostic(name, f"{name}:required", DiagnosticKind.MISSING_FIELD,
                               f"required field {name} is missing and has no default")
                )
            continue
        cf, diag = _check_field(spec, text, final, env, fp)
        if diag is None:
            certified[name] = cf
            view[name] = cf.value
        else:
            diags.append(diag)

    cross_ok: list[CrossEvidence] = []
    for cc in schema.cross_constraints:
        missing = [r for r in cc.refs if r not in view]
        if missing:
            diags.append(
                Diagnostic(None, cc.id, DiagnosticKind.CROSS_FIELD_VIOLATION,
                           f"{cc.id}: unresolved, no valid value for {', '.join(missing)}")
            )
            continue
        try:
            ok = eval_payload(cc.expr, None, view, env)
        except EvalError as exc:
            diags.append(
                Diagnostic(None, cc.id, DiagnosticKind.CROSS_FIELD_VIOLATION,
                           f"{cc.id}: could not be evaluated: {exc}")
            )
            continue
        if ok is True:
            cross_ok.append(CrossEvidence(cc.id))
        else:
            involved = ", ".join(f"{r}={render_base_value(view[r])}" for r in cc.refs)
            detail = f" ({cc.description})" if cc.description else ""
            diags.append(
                Diagnostic(None, cc.id, DiagnosticKind.CROSS_FIELD_VIOLATION,
                           f"{cc.id} violated{detail}: {involved}")
            )

    for name in raw.entries:
        if name not in schema.fields:
            diags.append(
                Diagnostic(name, "unknown", DiagnosticKind.UNKNOWN_FIELD,
                           f"{name} is not declared in schema {schema.name}")
            )
    diags.extend(warnings)

    passed = not any(d.is_hard for d in diags)
    cert = CertifiedConfig(schema.name, certified, tuple(cross_ok), env) if passed else None
    duration = round(time.perf_counter() - start, 3)
    return CheckReport(identity, passed, cert, tuple(diags), duration)


def recheck(certified: CertifiedConfig, schema: "ConfigSchema") -> CheckReport:
    """Re-run the checker on a certified configuration's rendered values."""
    return check_config(schema, certified.to_raw_config(schema), certified.environment, "<recheck>")


__all__ = [
    "CertifiedConfig",
    "CertifiedField",
    "CheckReport",
    "CrossEvidence",
    "Evidence",
    "FieldRejected",
    "check_config",
    "check_field",
    "lift_value",
    "recheck",
    "render_raw",
]
