import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwtc.checker import check_field
from rwtc.expr import Binary, FieldRef
from rwtc.model import REFERENCE_ENV, RTipe
from rwtc.schema import (
    CrossConstraint,
    SchemaError,
    UnknownFieldError,
    build_schema,
    explain_field,
    load_schema,
    parse_manifest,
    serialize_schema,
)

DESK = Path(__file__).parent / "data" / "desk.manifest"
BUFFER_ROW = (
    "io.file.buffer.size|core|pos|value mod env.hw_page_size == 0|bytes|"
    "Buffer size.|Page multiple.|4096|4096,65536||false"
)
MAXSIZE = "mapreduce.input.fileinputformat.split.maxsize"
MINSIZE = "mapreduce.input.fileinputformat.split.minsize"


def _manifest(*field_rows, cross=()):
    return "[fields]\n" + "\n".join(field_rows) + "\n[cross]\n" + "\n".join(cross) + "\n"


class TestManifest:
    def test_buffer_row(self):
        s = parse_manifest(_manifest(BUFFER_ROW))
        f = s.fields["io.file.buffer.size"]
        assert f.tipe is RTipe.POS
        assert f.property_source == "value mod env.hw_page_size == 0"
        assert f.default_raw == "4096"
        assert f.grid_variants == ("4096", "65536")
        assert f.none_sentinels == ()
        assert s.subsystems == ("core",)

    def test_optpos_without_sentinels(self):
        with pytest.raises(SchemaError):
            parse_manifest(_manifest("m.tasks|mapred|optpos|true||||-1|||false"))

    def test_cross_row(self):
        rows = [
            f"{MAXSIZE}|mapred|pos|true||||100|||false",
            f"{MINSIZE}|mapred|nonneg|true||||0|||false",
        ]
        s = parse_manifest(_manifest(*rows, cross=[f"maxsplit_gt_minsplit|field({MAXSIZE}) > field({MINSIZE})|"]))
        (cc,) = s.cross_constraints
        assert cc == CrossConstraint("maxsplit_gt_minsplit", Binary(">", FieldRef(MAXSIZE), FieldRef(MINSIZE)))
        assert cc.refs == (MAXSIZE, MINSIZE)

    @pytest.mark.parametrize(
        "text",
        [
            _manifest(BUFFER_ROW, BUFFER_ROW),
            _manifest("a|core|nope|true|||||||false"),
            _manifest("a|core|pos|value + 1|||||||false"),
            _manifest("a|core|pos|value > 0||||0|||false"),
            _manifest("a|core|pos|true|||1|||false"),
            _manifest("a|core|pos|true|||||||false", cross=["c|field(b) > 1|"]),
            _manifest("a|core|pos|true|||||||false", cross=["c|value > 1|"]),
            _manifest("a|core|pos|true|||||||maybe"),
            "[fields]\n[weird]\n",
            "a|core|pos|true|||||||false\n",
        ],
    )
    def test_rejected(self, text):
        with pytest.raises(SchemaError):
            parse_manifest(text)

    def test_error_carries_line(self):
        with pytest.raises(SchemaError) as ei:
            parse_manifest(_manifest(BUFFER_ROW, BUFFER_ROW))
        assert ei.value.line == 3

    def test_escaped_pipe(self):
        row = r"a|core|str|true||has \| pipe||x|||false"
        s = parse_manifest(_manifest(row))
        assert s.fields["a"].interp == "has | pipe"
        assert parse_manifest(serialize_schema(s), s.name) == s


class TestBundled:
    def test_buffer_field(self, schema):
        assert schema.fields["io.file.buffer.size"].tipe is RTipe.POS

    def test_uber_implication(self, schema):
        cc = {c.id: c for c in schema.cross_constraints}["uber_map_mem"]
        assert isinstance(cc.expr, Binary) and cc.expr.op == "implies"
        assert cc.expr.left == FieldRef("mapreduce.job.ubertask.enable")

    def test_maxtasks_sentinel(self, schema):
        f = schema.fields["mapreduce.jobtracker.maxtasks.perjob"]
        assert f.tipe is RTipe.OPTPOS and f.none_sentinels == ("-1",)

    def test_required_contents(self, schema):
        ids = {c.id for c in schema.cross_constraints}
        assert {"maxsplit_gt_minsplit", "uber_map_mem", "uber_reduce_mem", "uber_map_cpu", "uber_reduce_cpu"} <= ids
        tipes = {f.tipe for f in schema.fields.values()}
        assert RTipe.JAVAOPTS in tipes
        assert "value in env.comp_codecs" in {f.property_source for f in schema.fields.values()}
        assert schema.fields["yarn.nodemanager.container-manager.thread-count"].property_source == (
            "value <= env.max_threads"
        )
        assert schema.subsystems == ("core", "hdfs", "yarn", "mapred")

    def test_every_default_passes(self, schema):
        for f in schema.fields.values():
            if f.default_raw is not None:
                check_field(f, f.default_raw, False, REFERENCE_ENV)

    def test_serialize_reload_identity(self, schema):
        text = serialize_schema(schema)
        again = parse_manifest(text, schema.name)
        assert again == schema
        assert serialize_schema(again) == text


class TestExplain:
    def test_buffer(self, schema):
        info = explain_field(schema, "io.file.buffer.size")
        assert info.tipe == "pos"
        assert info.property == "value mod env.hw_page_size == 0"
        assert info.unit == "bytes"
        assert "property: value mod env.hw_page_size == 0" in info.to_text()

    @pytest.mark.parametrize("name", ["no.such.field", "io.buffer.size"])
    def test_unknown(self, schema, name):
        with pytest.raises(UnknownFieldError):
            explain_field(schema, name)


def test_desk_roundtrip(tmp_path):
    s = load_schema(DESK)
    out = tmp_path / "desk.manifest"
    out.write_text(serialize_schema(s))
    assert load_schema(out) == s


@given(st.randoms(use_true_random=False))
@settings(max_examples=25, deadline=None)
def test_field_row_order_independent(rnd: random.Random):
    lines = DESK.read_text().splitlines()
    start, end = lines.index("[fields]") + 1, lines.index("[cross]")
    rows = [ln for ln in lines[start:end] if ln.strip()]
    rnd.shuffle(rows)
    shuffled = "\n".join(lines[:start] + rows + lines[end:])
    assert parse_manifest(shuffled, "desk") == load_schema(DESK)


def test_build_schema_validates_defaults():
    s = parse_manifest(_manifest(BUFFER_ROW))
    spec = s.fields["io.file.buffer.size"]
    from dataclasses import replace

    with pytest.raises(SchemaError):
        build_schema("x", [replace(spec, default_raw="4097")])
