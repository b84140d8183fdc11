"""Hadoop ``*-site.xml`` reading, layered merging and writing."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from rwtc.model import Diagnostic, DiagnosticKind, RawConfig, RawEntry


class SiteFileError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class SiteEntry:
    name: str
    value: str
    final: bool = False


@dataclass(frozen=True)
class SiteFile:
    path: str
    entries: tuple[SiteEntry, ...] = ()

    def to_raw_config(self) -> RawConfig:
        return RawConfig(
            {e.name: RawEntry(e.value, e.final, (self.path, i)) for i, e in enumerate(self.entries)}
        )


def _text(el) -> str:
    return (el.text or "").strip()


def parse_site_text(text: str, path: str = "<string>") -> SiteFile:
    """Parse site-file XML held in memory. See :func:`parse_site_file`."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SiteFileError(path, f"malformed XML: {exc}") from None
    if root.tag != "configuration":
        raise SiteFileError(path, f"root element must be <configuration>, got <{root.tag}>")
    entries: list[SiteEntry] = []
    seen: set[str] = set()
    for i, prop in enumerate(root.findall("property")):
        name_el = prop.find("name")
        value_el = prop.find("value")
        if name_el is None or not _text(name_el):
            raise SiteFileError(path, f"property #{i + 1} has no <name>")
        name = _text(name_el)
        if value_el is None:
            raise SiteFileError(path, f"property {name!r} has no <value>")
        if name in seen:
            raise SiteFileError(path, f"duplicate property {name!r}")
        seen.add(name)
        final_el = prop.find("final")
        final = False
        if final_el is not None:
            flag = _text(final_el).lower()
            if flag not in ("true", "false"):
                raise SiteFileError(path, f"property {name!r}: <final> must be true or false")
            final = flag == "true"
        entries.append(SiteEntry(name, _text(value_el), final))
    return SiteFile(path, tuple(entries))


def parse_site_file(path: str | Path) -> SiteFile:
    """Read a ``<configuration><property>...`` file.

    Text is whitespace-trimmed, unknown child elements and attributes are
    ignored, entries keep document order.

    Raises:
        OSError: the file cannot be read.
        SiteFileError: malformed XML, duplicate name, or a property without
            a name or value.
    """
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SiteFileError(str(path), f"not UTF-8: {exc}") from None
    return parse_site_text(text, str(path))


def merge_configs(files: Sequence[SiteFile]) -> tuple[RawConfig, list[Diagnostic]]:
    """Layer site files; later files win unless an earlier entry was final."""
    if not files:
        raise ValueError("merge_configs needs at least one file")
    merged: dict[str, RawEntry] = {}
    diags: list[Diagnostic] = []
    for f in files:
        for i, e in enumerate(f.entries):
            prev = merged.get(e.name)
            if prev is not None and prev.final:
                diags.append(
                    Diagnostic(
                        e.name,
                        "final",
                        DiagnosticKind.FINAL_OVERRIDE,
                        f"{f.path} tried to override final value {prev.raw_value!r} "
                        f"from {prev.source[0]} with {e.value!r}; kept the final value",
                    )
                )
                continue
            merged[e.name] = RawEntry(e.value, e.final, (f.path, i))
    return RawConfig(merged), diags


def raw_to_site_file(c: RawConfig, path: str = "<merged>") -> SiteFile:
    return SiteFile(path, tuple(SiteEntry(n, e.raw_value, e.final) for n, e in c.entries.items()))


def _property_xml(name: str, value: str, final: bool) -> str:
    lines = [
        "  <property>",
        f"    <name>{escape(name)}</name>",
        f"    <value>{escape(value)}</value>",
    ]
    if final:
        lines.append("    <final>true</final>")
    lines.append("  </property>")
    return "\n".join(lines)


def serialize_config(c: RawConfig | Iterable[SiteEntry]) -> str:
    """Write entries as a site file, sorted by name; ``<final>`` only when true."""
    if isinstance(c, RawConfig):
        items = [(n, e.raw_value, e.final) for n, e in c.entries.items()]
    else:
        items = [(e.name, e.value, e.final) for e in c]
    if not items:
        return "<configuration></configuration>\n"
    body = "\n".join(_property_xml(*it) for it in sorted(items))
    return f'<?xml version="1.0" encoding="UTF-8"?>\n<configuration>\n{body}\n</configuration>\n'
