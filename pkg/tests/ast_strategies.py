"""Generators for constraint ASTs: hypothesis strategies plus a seeded generator."""
from __future__ import annotations

import functools
import random
import string
from decimal import Decimal

from hypothesis import strategies as st

from rwtc.expr import (
    Binary,
    Call,
    EnvRef,
    ExprType,
    FieldRef,
    Lit,
    Unary,
    ValueRef,
)

FIELD_NAMES = ("a.b", "x-y.z", "mapreduce.map.memory.mb", "f1")
ENV_INT_NAMES = ("hw_page_size", "max_threads", "phys_cpu_cores")
SAFE_CHARS = string.ascii_letters + string.digits + " ._-\"\\"

# Types of the fields available to typed expressions.
TYPED_FIELDS = {
    "n.one": ExprType.INT,
    "n.two": ExprType.INT,
    "opt.limit": ExprType.OPTINT,
    "flag.on": ExprType.BOOL,
    "codec.name": ExprType.STR,
    "ratio.f": ExprType.FLOAT,
    "task.opts": ExprType.JVM,
}


# ---------------------------------------------------------------------------
# Untyped shapes, for parse/print round trips
# ---------------------------------------------------------------------------

_lits = st.one_of(
    st.integers(-10**30, 10**30).map(Lit),
    st.booleans().map(Lit),
    st.text(alphabet=SAFE_CHARS, max_size=8).map(Lit),
    st.decimals(min_value=-1000, max_value=1000, places=3, allow_nan=False, allow_infinity=False).map(Lit),
)
_leaves = st.one_of(
    _lits,
    st.just(ValueRef()),
    st.sampled_from(FIELD_NAMES).map(FieldRef),
    st.sampled_from(ENV_INT_NAMES + ("comp_codecs",)).map(EnvRef),
)
_BIN_OPS = ("+", "-", "*", "/", "mod", "<", "<=", ">", ">=", "==", "!=", "in", "and", "or", "implies")
_UN_OPS = ("not", "neg", "is_some", "is_none", "unwrap")
_FNS = ("min", "max", "len", "heap_init", "heap_max")


def _extend(children):
    return st.one_of(
        st.builds(Binary, st.sampled_from(_BIN_OPS), children, children),
        st.builds(Unary, st.sampled_from(_UN_OPS), children),
        st.builds(Call, st.sampled_from(_FNS), st.lists(children, min_size=1, max_size=3).map(tuple)),
    )


any_expr = st.recursive(_leaves, _extend, max_leaves=12)


def random_ast(rng: random.Random, depth: int = 4):
    """Untyped AST from a seeded RNG (deterministic counterpart of ``any_expr``)."""
    if depth == 0 or rng.random() < 0.3:
        k = rng.randrange(8)
        if k == 0:
            return Lit(rng.randint(-10**6, 10**6))
        if k == 1:
            return Lit(rng.random() < 0.5)
        if k == 2:
            return Lit("".join(rng.choice(SAFE_CHARS) for _ in range(rng.randrange(6))))
        if k == 3:
            return Lit(Decimal(rng.randint(-99999, 99999)).scaleb(-rng.randrange(4)))
        if k == 4:
            return ValueRef()
        if k == 5:
            return FieldRef(rng.choice(FIELD_NAMES))
        return EnvRef(rng.choice(ENV_INT_NAMES + ("comp_codecs",)))
    k = rng.randrange(3)
    if k == 0:
        return Binary(rng.choice(_BIN_OPS), random_ast(rng, depth - 1), random_ast(rng, depth - 1))
    if k == 1:
        return Unary(rng.choice(_UN_OPS), random_ast(rng, depth - 1))
    args = tuple(random_ast(rng, depth - 1) for _ in range(rng.randint(1, 3)))
    return Call(rng.choice(_FNS), args)


# ---------------------------------------------------------------------------
# Well-typed expressions over small domains, for soundness properties
# ---------------------------------------------------------------------------


def _fields_of(t):
    return [FieldRef(n) for n, ft in TYPED_FIELDS.items() if ft is t]


@functools.lru_cache(maxsize=None)
def typed_expr(t: ExprType, depth: int = 3, self_type: ExprType = ExprType.INT):
    """Strategy for expressions of static type ``t``."""
    leaves = []
    if t is ExprType.INT:
        leaves = [st.integers(-6, 6).map(Lit), st.sampled_from(ENV_INT_NAMES).map(EnvRef)]
    elif t is ExprType.BOOL:
        leaves = [st.booleans().map(Lit)]
    elif t is ExprType.STR:
        leaves = [st.sampled_from(["", "a", "org.apache.hadoop.io.compress.DefaultCodec"]).map(Lit)]
    elif t is ExprType.STRLIST:
        leaves = [st.just(EnvRef("comp_codecs"))]
    elif t is ExprType.FLOAT:
        leaves = [st.sampled_from(["0.5", "1.0", "-2.25"]).map(lambda s: Lit(Decimal(s)))]
    refs = _fields_of(t)
    if refs:
        leaves.append(st.sampled_from(refs))
    if self_type is t:
        leaves.append(st.just(ValueRef()))
    base = st.one_of(*leaves)
    if depth == 0 or t in (ExprType.STRLIST, ExprType.JVM, ExprType.OPTINT, ExprType.STR):
        return base
    sub = lambda tt: typed_expr(tt, depth - 1, self_type)  # noqa: E731
    if t is ExprType.INT:
        return st.one_of(
            base,
            st.builds(Binary, st.sampled_from(["+", "-", "*", "/", "mod"]), sub(ExprType.INT), sub(ExprType.INT)),
            st.builds(Unary, st.just("neg"), sub(ExprType.INT)),
            st.builds(Unary, st.just("unwrap"), sub(ExprType.OPTINT)),
            st.builds(Call, st.sampled_from(["min", "max"]),
                      st.lists(sub(ExprType.INT), min_size=1, max_size=3).map(tuple)),
            st.builds(Call, st.just("len"), st.tuples(sub(ExprType.STR))),
            st.builds(Call, st.sampled_from(["heap_init", "heap_max"]), st.tuples(sub(ExprType.JVM))),
        )
    if t is ExprType.FLOAT:
        return st.one_of(
            base,
            st.builds(Binary, st.sampled_from(["+", "-", "*"]), sub(ExprType.FLOAT), sub(ExprType.INT)),
            st.builds(Unary, st.just("neg"), sub(ExprType.FLOAT)),
        )
    # BOOL
    return st.one_of(
        base,
        st.builds(Binary, st.sampled_from(["<", "<=", ">", ">=", "==", "!="]), sub(ExprType.INT), sub(ExprType.INT)),
        st.builds(Binary, st.sampled_from(["<", "<=", "==", "!="]), sub(ExprType.FLOAT), sub(ExprType.INT)),
        st.builds(Binary, st.sampled_from(["==", "!="]), sub(ExprType.OPTINT), sub(ExprType.OPTINT)),
        st.builds(Binary, st.sampled_from(["and", "or", "implies"]), sub(ExprType.BOOL), sub(ExprType.BOOL)),
        st.builds(Binary, st.just("in"), sub(ExprType.STR), sub(ExprType.STRLIST)),
        st.builds(Unary, st.just("not"), sub(ExprType.BOOL)),
        st.builds(Unary, st.sampled_from(["is_some", "is_none"]), sub(ExprType.OPTINT)),
    )
