"""A small typed expression language for field properties and cross-field constraints.

Surface syntax (lowest precedence first)::

    expr    := or_expr [ "implies" expr ]
    or_expr := and_expr { "or" and_expr }
    and_expr:= cmp { "and" cmp }
    cmp     := add { ("<"|"<="|">"|">="|"=="|"!="|"in") add }
    add     := mul { ("+"|"-") mul }
    mul     := unary { ("*"|"/"|"mod") unary }
    unary   := ("not"|"-") unary | atom
    atom    := int | decimal | "true" | "false" | string | "value"
             | "env." ident | "field(" dotted ")"
             | fn "(" args ")" | "(" expr ")"

Integers are arbitrary precision. ``/`` truncates toward zero and ``mod``
takes the sign of the dividend. Decimal values compare with an absolute
tolerance of 1e-9.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Mapping, Optional, Union

from rwtc.model import ENV_INT_KEYS, BaseValue, Environment, JavaOpts, RTipe

FLOAT_TOL = Decimal("1e-9")


class ExprType(str, enum.Enum):
    INT = "int"
    BOOL = "bool"
    STR = "str"
    OPTINT = "optint"
    STRLIST = "strlist"
    FLOAT = "float"
    JVM = "jvm"


TIPE_EXPR_TYPES = {
    RTipe.INT: ExprType.INT,
    RTipe.POS: ExprType.INT,
    RTipe.NONNEG: ExprType.INT,
    RTipe.STR: ExprType.STR,
    RTipe.BOOL: ExprType.BOOL,
    RTipe.FLOAT: ExprType.FLOAT,
    RTipe.JAVAOPTS: ExprType.JVM,
    RTipe.OPTPOS: ExprType.OPTINT,
}

ENV_TYPES: dict[str, ExprType] = {k: ExprType.INT for k in ENV_INT_KEYS}
ENV_TYPES["comp_codecs"] = ExprType.STRLIST


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

LitValue = Union[int, bool, str, Decimal]


@dataclass(frozen=True, slots=True)
class Lit:
    value: LitValue

    def __eq__(self, other):
        # bool is an int subclass; keep Lit(True) distinct from Lit(1)
        return (
            isinstance(other, Lit)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self):
        return hash((type(self.value), self.value))


@dataclass(frozen=True, slots=True)
class ValueRef:
    pass


@dataclass(frozen=True, slots=True)
class FieldRef:
    name: str


@dataclass(frozen=True, slots=True)
class EnvRef:
    name: str


@dataclass(frozen=True, slots=True)
class Unary:
    op: str  # not, neg, is_some, is_none, unwrap
    operand: "Expr"


@dataclass(frozen=True, slots=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Call:
    fn: str  # min, max, len, heap_init, heap_max
    args: tuple["Expr", ...]


Expr = Union[Lit, ValueRef, FieldRef, EnvRef, Unary, Binary, Call]

UNARY_OPS = ("not", "neg", "is_some", "is_none", "unwrap")
UNARY_FNS = ("is_some", "is_none", "unwrap")
CALL_FNS = ("min", "max", "len", "heap_init", "heap_max")
ARITH_OPS = ("+", "-", "*", "/", "mod")
CMP_OPS = ("<", "<=", ">", ">=", "==", "!=", "in")
BOOL_OPS = ("and", "or", "implies")
BINARY_OPS = ARITH_OPS + CMP_OPS + BOOL_OPS

KEYWORDS = frozenset(
    {"and", "or", "not", "implies", "mod", "in", "true", "false", "value", "field", "env"}
    | set(UNARY_FNS)
    | set(CALL_FNS)
)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, pos: int, source: str = ""):
        self.pos = pos
        self.source = source
        super().__init__(f"{message} at position {pos}")


class ExprTypeError(ExprError):
    def __init__(self, message: str, node: Expr):
        self.node = node
        super().__init__(f"{message} in `{to_source(node)}`")


class UnknownRefError(ExprError):
    def __init__(self, kind: str, name: str):
        self.kind = kind
        self.name = name
        super().__init__(f"unknown {kind} reference {name!r}")


class EvalError(ExprError):
    pass


class DivByZero(EvalError):
    pass


class UnwrapNone(EvalError):
    pass


class UnresolvedFieldRef(EvalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"field {name!r} has no lifted value")


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<field>field\s*\(\s*(?P<fname>[A-Za-z0-9_.\-]+)\s*\))
  | (?P<env>env\.(?P<ename>[A-Za-z_][A-Za-z0-9_]*))
  | (?P<dec>[0-9]+\.[0-9]+)
  | (?P<int>[0-9]+)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<op><=|>=|==|!=|<|>|\+|-|\*|/|\(|\)|,)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_STR_ESCAPE_RE = re.compile(r"\\(.)", re.DOTALL)


@dataclass(frozen=True, slots=True)
class _Tok:
    kind: str
    text: str
    pos: int
    payload: object = None


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        if kind in ("fname", "ename"):
            kind = "field" if m.group("field") else "env"
        text = m.group(0)
        if kind == "field":
            toks.append(_Tok("field", text, pos, m.group("fname")))
        elif kind == "env":
            toks.append(_Tok("env", text, pos, m.group("ename")))
        elif kind == "str":
            toks.append(_Tok("str", text, pos, _STR_ESCAPE_RE.sub(r"\1", text[1:-1])))
        elif kind != "ws":
            toks.append(_Tok(kind, text, pos))
        pos = m.end()
    toks.append(_Tok("eof", "", n))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[_Tok] = None) -> ExprSyntaxError:
        tok = tok or self.tok
        found = tok.text or "end of input"
        return ExprSyntaxError(f"{msg}, found {found!r}", tok.pos, self.source)

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("op", "ident") and t.text in texts

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input")
        return e

    def expr(self) -> Expr:
        left = self.or_expr()
        if self.at("implies"):
            self.advance()
            return Binary("implies", left, self.expr())
        return left

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.at("or"):
            self.advance()
            e = Binary("or", e, self.and_expr())
        return e

    def and_expr(self) -> Expr:
        e = self.cmp()
        while self.at("and"):
            self.advance()
            e = Binary("and", e, self.cmp())
        return e

    def cmp(self) -> Expr:
        e = self.add()
        while self.at(*CMP_OPS):
            op = self.advance().text
            e = Binary(op, e, self.add())
        return e

    def add(self) -> Expr:
        e = self.mul()
        while self.at("+", "-"):
            op = self.advance().text
            e = Binary(op, e, self.mul())
        return e

    def mul(self) -> Expr:
        e = self.unary()
        while self.at("*", "/", "mod"):
            op = self.advance().text
            e = Binary(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("not"):
            self.advance()
            return Unary("not", self.unary())
        if self.at("-"):
            self.advance()
            t = self.tok
            # a minus glued to a numeric literal is a negative literal
            if t.kind == "int":
                self.advance()
                return Lit(-int(t.text))
            if t.kind == "dec":
                self.advance()
                return Lit(-Decimal(t.text))
            return Unary("neg", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Lit(int(t.text))
        if t.kind == "dec":
            self.advance()
            return Lit(Decimal(t.text))
        if t.kind == "str":
            self.advance()
            return Lit(t.payload)
        if t.kind == "field":
            self.advance()
            return FieldRef(t.payload)
        if t.kind == "env":
            self.advance()
            return EnvRef(t.payload)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            if t.text == "true":
                self.advance()
                return Lit(True)
            if t.text == "false":
                self.advance()
                return Lit(False)
            if t.text == "value":
                self.advance()
                return ValueRef()
            if t.text in UNARY_FNS or t.text in CALL_FNS:
                self.advance()
                args = self.args()
                if t.text in UNARY_FNS:
                    if len(args) != 1:
                        raise self.error(f"{t.text} takes exactly one argument", t)
                    return Unary(t.text, args[0])
                return Call(t.text, tuple(args))
            if t.text in KEYWORDS:
                raise self.error("unexpected keyword")
            raise self.error("unknown identifier")
        raise self.error("expected an expression")

    def args(self) -> list[Expr]:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.expr())
            while self.at(","):
                self.advance()
                out.append(self.expr())
        self.expect(")")
        return out


def parse_expr(source: str) -> Expr:
    """Parse constraint source text into an AST.

    Raises:
        ExprSyntaxError: with the character offset of the offending token.
    """
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

_PREC = {"implies": 0, "or": 1, "and": 2}
_PREC.update({op: 3 for op in CMP_OPS})
_PREC.update({"+": 4, "-": 4, "*": 5, "/": 5, "mod": 5})
_UNARY_PREC = 6
_ATOM_PREC = 7


def _lit_source(v: LitValue) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Decimal):
        text = format(v, "f")
        return text if "." in text else text + ".0"
    return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _print(e: Expr) -> tuple[str, int]:
    if isinstance(e, Lit):
        return _lit_source(e.value), _ATOM_PREC
    if isinstance(e, ValueRef):
        return "value", _ATOM_PREC
    if isinstance(e, FieldRef):
        return f"field({e.name})", _ATOM_PREC
    if isinstance(e, EnvRef):
        return f"env.{e.name}", _ATOM_PREC
    if isinstance(e, Unary):
        inner, p = _print(e.operand)
        if e.op == "neg":
            return f"-({inner})", _UNARY_PREC
        if e.op == "not":
            return ("not " + (f"({inner})" if p < _UNARY_PREC else inner)), _UNARY_PREC
        return f"{e.op}({inner})", _ATOM_PREC
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        left, lp = _print(e.left)
        right, rp = _print(e.right)
        if e.op == "implies":
            lparen, rparen = lp <= prec, rp < prec
        else:
            lparen, rparen = lp < prec, rp <= prec
        if lparen:
            left = f"({left})"
        if rparen:
            right = f"({right})"
        return f"{left} {e.op} {right}", prec
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_print(a)[0] for a in e.args)})", _ATOM_PREC
    raise TypeError(f"not an expression node: {e!r}")


def to_source(e: Expr) -> str:
    """Render an AST back to source; ``parse_expr(to_source(e)) == e``."""
    return _print(e)[0]


# ---------------------------------------------------------------------------
# Static helpers
# ---------------------------------------------------------------------------


def _children(e: Expr):
    if isinstance(e, Unary):
        return (e.operand,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, Call):
        return e.args
    return ()


def walk(e: Expr):
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(_children(node)))


def field_refs(e: Expr) -> tuple[str, ...]:
    """Field names referenced by ``e``, first occurrence order, no duplicates."""
    seen: dict[str, None] = {}
    for node in walk(e):
        if isinstance(node, FieldRef):
            seen.setdefault(node.name)
    return tuple(seen)


def uses_value(e: Expr) -> bool:
    return any(isinstance(node, ValueRef) for node in walk(e))


# ---------------------------------------------------------------------------
# Type checker
# ---------------------------------------------------------------------------

_NUMERIC = (ExprType.INT, ExprType.FLOAT)


def typecheck_expr(
    e: Expr,
    self_type: Optional[ExprType] = None,
    schema_types: Optional[Mapping[str, ExprType]] = None,
    env_types: Mapping[str, ExprType] = ENV_TYPES,
) -> ExprType:
    """Infer the type of ``e``; properties and constraints must come out BOOL.

    Raises:
        ExprTypeError: an operator applied to operands of the wrong type.
        UnknownRefError: unresolved ``field(...)``/``env.`` name, or
            ``value`` used where no self type is in scope.
    """
    schema_types = schema_types or {}

    def tc(node: Expr) -> ExprType:
        if isinstance(node, Lit):
            v = node.value
            if isinstance(v, bool):
                return ExprType.BOOL
            if isinstance(v, int):
                return ExprType.INT
            if isinstance(v, Decimal):
                return ExprType.FLOAT
            return ExprType.STR
        if isinstance(node, ValueRef):
            if self_type is None:
                raise UnknownRefError("value", "value")
            return self_type
        if isinstance(node, FieldRef):
            if node.name not in schema_types:
                raise UnknownRefError("field", node.name)
            return schema_types[node.name]
        if isinstance(node, EnvRef):
            if node.name not in env_types:
                raise UnknownRefError("env", node.name)
            return env_types[node.name]
        if isinstance(node, Unary):
            t = tc(node.operand)
            if node.op == "not":
                if t is ExprType.BOOL:
                    return ExprType.BOOL
            elif node.op == "neg":
                if t in _NUMERIC:
                    return t
            elif node.op in ("is_some", "is_none"):
                if t is ExprType.OPTINT:
                    return ExprType.BOOL
            elif node.op == "unwrap":
                if t is ExprType.OPTINT:
                    return ExprType.INT
            else:
                raise ExprTypeError(f"unknown unary operator {node.op!r}", node)
            raise ExprTypeError(f"{node.op} cannot take {t.value}", node)
        if isinstance(node, Binary):
            lt, rt = tc(node.left), tc(node.right)
            op = node.op
            if op in BOOL_OPS:
                if lt is ExprType.BOOL and rt is ExprType.BOOL:
                    return ExprType.BOOL
            elif op in ("+", "-", "*", "/"):
                if lt in _NUMERIC and rt in _NUMERIC:
                    return ExprType.FLOAT if ExprType.FLOAT in (lt, rt) else ExprType.INT
            elif op == "mod":
                if lt is ExprType.INT and rt is ExprType.INT:
                    return ExprType.INT
            elif op in ("<", "<=", ">", ">="):
                if lt in _NUMERIC and rt in _NUMERIC:
                    return ExprType.BOOL
            elif op in ("==", "!="):
                if lt == rt or (lt in _NUMERIC and rt in _NUMERIC):
                    return ExprType.BOOL
            elif op == "in":
                if lt is ExprType.STR and rt is ExprType.STRLIST:
                    return ExprType.BOOL
            else:
                raise ExprTypeError(f"unknown binary operator {op!r}", node)
            raise ExprTypeError(f"{op} cannot take {lt.value} and {rt.value}", node)
        if isinstance(node, Call):
            ts = [tc(a) for a in node.args]
            if node.fn in ("min", "max"):
                if ts and all(t in _NUMERIC for t in ts):
                    return ExprType.FLOAT if ExprType.FLOAT in ts else ExprType.INT
                raise ExprTypeError(f"{node.fn} needs one or more numeric arguments", node)
            if node.fn == "len":
                if len(ts) == 1 and ts[0] in (ExprType.STR, ExprType.STRLIST):
                    return ExprType.INT
                raise ExprTypeError("len needs one str or strlist argument", node)
            if node.fn in ("heap_init", "heap_max"):
                if len(ts) == 1 and ts[0] is ExprType.JVM:
                    return ExprType.INT
                raise ExprTypeError(f"{node.fn} needs one jvm argument", node)
            raise ExprTypeError(f"unknown function {node.fn!r}", node)
        raise TypeError(f"not an expression node: {node!r}")

    return tc(e)


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------


def _tdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _tmod(a: int, b: int) -> int:
    return a - b * _tdiv(a, b)


def _is_dec(*vs) -> bool:
    return any(isinstance(v, Decimal) for v in vs)


def _compare(op: str, a, b) -> bool:
    if _is_dec(a, b):
        close = abs(Decimal(a) - Decimal(b)) <= FLOAT_TOL
        if op == "==":
            return close
        if op == "!=":
            return not close
        if op == "<":
            return a < b and not close
        if op == "<=":
            return a < b or close
        if op == ">":
            return a > b and not close
        return a > b or close
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def eval_payload(e: Expr, self_val, view: Mapping[str, BaseValue], env: Environment):
    """Evaluate with ``value`` bound to an already-unwrapped payload."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, ValueRef):
        return self_val
    if isinstance(e, FieldRef):
        bv = view.get(e.name)
        if bv is None:
            raise UnresolvedFieldRef(e.name)
        return bv.payload
    if isinstance(e, EnvRef):
        return getattr(env, e.name)
    if isinstance(e, Binary):
        op = e.op
        if op == "and":
            return eval_payload(e.left, self_val, view, env) and eval_payload(e.right, self_val, view, env)
        if op == "or":
            return eval_payload(e.left, self_val, view, env) or eval_payload(e.right, self_val, view, env)
        if op == "implies":
            return (not eval_payload(e.left, self_val, view, env)) or eval_payload(e.right, self_val, view, env)
        a = eval_payload(e.left, self_val, view, env)
        b = eval_payload(e.right, self_val, view, env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise DivByZero(f"division by zero in `{to_source(e)}`")
            if _is_dec(a, b):
                return Decimal(a) / Decimal(b)
            return _tdiv(a, b)
        if op == "mod":
            if b == 0:
                raise DivByZero(f"mod by zero in `{to_source(e)}`")
            return _tmod(a, b)
        if op == "in":
            return a in b
        return _compare(op, a, b)
    if isinstance(e, Unary):
        v = eval_payload(e.operand, self_val, view, env)
        op = e.op
        if op == "not":
            return not v
        if op == "neg":
            return -v
        if op == "is_some":
            return v is not None
        if op == "is_none":
            return v is None
        if v is None:
            raise UnwrapNone(f"unwrap of none in `{to_source(e)}`")
        return v
    if isinstance(e, Call):
        vals = [eval_payload(a, self_val, view, env) for a in e.args]
        if e.fn == "min":
            return min(vals)
        if e.fn == "max":
            return max(vals)
        if e.fn == "len":
            return len(vals[0])
        j: JavaOpts = vals[0]
        return j.init_heap_mb if e.fn == "heap_init" else j.max_heap_mb
    raise TypeError(f"not an expression node: {e!r}")


def eval_expr(
    e: Expr,
    self_val: Optional[BaseValue] = None,
    config_view: Optional[Mapping[str, BaseValue]] = None,
    env: Optional[Environment] = None,
):
    """Evaluate a type-checked expression.

    Returns the plain Python result (``bool`` for properties and constraints,
    ``int``, ``str``, ``Decimal``, ``None`` for an empty option).

    Raises:
        DivByZero, UnwrapNone, UnresolvedFieldRef
    """
    if env is None:
        from rwtc.model import REFERENCE_ENV

        env = REFERENCE_ENV
    payload = self_val.payload if self_val is not None else None
    return eval_payload(e, payload, config_view or {}, env)
