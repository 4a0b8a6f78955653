"""Expression AST, parser, type checker, compiler and printer.

Expressions appear in guards, rates, updates and state formulas. The same
precedence-climbing parser serves the model and property languages; the
property parser injects probability-operator atoms through `primary_hook`.

Precedence (loosest to tightest): ``|``, ``&``, ``= !=``, ``< <= > >=``,
``+ -``, ``* /``, unary ``- !``. Division always yields a double.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ParseError

INT = "int"
DOUBLE = "double"
BOOL = "bool"


def pos_field():
    """Source position, excluded from equality and hashing."""
    return field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: tuple = pos_field()


@dataclass(frozen=True)
class RealLit:
    value: float
    # exact decimal value of the source literal, for constant folding
    decimal: Fraction | None = field(default=None, compare=False, repr=False)
    pos: tuple = pos_field()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: tuple = pos_field()


@dataclass(frozen=True)
class Ident:
    name: str
    pos: tuple = pos_field()


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or '!'
    operand: object
    pos: tuple = pos_field()


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    pos: tuple = pos_field()


_BINARY_LEVELS = (
    ("|",),
    ("&",),
    ("=", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/"),
)

_PRECEDENCE = {op: level for level, ops in enumerate(_BINARY_LEVELS) for op in ops}
_UNARY_LEVEL = len(_BINARY_LEVELS)


def parse_expression(stream, primary_hook=None):
    """Parse an expression from `stream`. `primary_hook(stream)` may claim
    a primary (returning a node) before the default rules run."""
    return _parse_binary(stream, 0, primary_hook)


def _parse_binary(stream, level, hook):
    if level >= len(_BINARY_LEVELS):
        return _parse_unary(stream, hook)
    node = _parse_binary(stream, level + 1, hook)
    ops = _BINARY_LEVELS[level]
    while stream.current.kind == "op" and stream.current.text in ops:
        tok = stream.consume()
        right = _parse_binary(stream, level + 1, hook)
        node = Binary(tok.text, node, right, pos=(tok.line, tok.column))
    return node


def _parse_unary(stream, hook):
    tok = stream.current
    if tok.kind == "op" and tok.text in ("-", "!"):
        stream.consume()
        operand = _parse_unary(stream, hook)
        return Unary(tok.text, operand, pos=(tok.line, tok.column))
    return _parse_primary(stream, hook)


def _parse_primary(stream, hook):
    if hook is not None:
        node = hook(stream)
        if node is not None:
            return node
    tok = stream.current
    if tok.kind == "int":
        stream.consume()
        return IntLit(int(tok.text), pos=(tok.line, tok.column))
    if tok.kind == "real":
        stream.consume()
        # decimal text -> exact rational -> nearest double
        decimal = Fraction(tok.text)
        return RealLit(float(decimal), decimal=decimal, pos=(tok.line, tok.column))
    if tok.kind == "ident":
        stream.consume()
        if tok.text == "true":
            return BoolLit(True, pos=(tok.line, tok.column))
        if tok.text == "false":
            return BoolLit(False, pos=(tok.line, tok.column))
        return Ident(tok.text, pos=(tok.line, tok.column))
    if tok.kind == "op" and tok.text == "(":
        stream.consume()
        node = _parse_binary(stream, 0, hook)
        stream.expect("op", ")")
        return node
    stream.error(f"expected an expression but found {tok.text or tok.kind!r}")


def type_of(expr, env, atom_hook=None):
    """Infer the type of `expr` ('int', 'double', 'bool').

    `env` maps identifier names to types. `atom_hook(node)` may supply a
    type for node classes this module does not know about.
    """
    if isinstance(expr, IntLit):
        return INT
    if isinstance(expr, RealLit):
        return DOUBLE
    if isinstance(expr, BoolLit):
        return BOOL
    if isinstance(expr, Ident):
        t = env.get(expr.name)
        if t is None:
            raise ParseError(f"unknown identifier '{expr.name}'", *expr.pos)
        return t
    if isinstance(expr, Unary):
        t = type_of(expr.operand, env, atom_hook)
        if expr.op == "-":
            if t == BOOL:
                raise ParseError("operator '-' needs a numeric operand", *expr.pos)
            return t
        if t != BOOL:
            raise ParseError("operator '!' needs a boolean operand", *expr.pos)
        return BOOL
    if isinstance(expr, Binary):
        lt = type_of(expr.left, env, atom_hook)
        rt = type_of(expr.right, env, atom_hook)
        op = expr.op
        if op in ("&", "|"):
            if lt != BOOL or rt != BOOL:
                raise ParseError(f"operator '{op}' needs boolean operands", *expr.pos)
            return BOOL
        if op in ("=", "!="):
            if (lt == BOOL) != (rt == BOOL):
                raise ParseError(f"operator '{op}' cannot mix boolean and "
                                 "numeric operands", *expr.pos)
            return BOOL
        if op in ("<", "<=", ">", ">="):
            if lt == BOOL or rt == BOOL:
                raise ParseError(f"operator '{op}' needs numeric operands", *expr.pos)
            return BOOL
        # arithmetic
        if lt == BOOL or rt == BOOL:
            raise ParseError(f"operator '{op}' needs numeric operands", *expr.pos)
        if op == "/":
            return DOUBLE
        return DOUBLE if DOUBLE in (lt, rt) else INT
    if atom_hook is not None:
        t = atom_hook(expr)
        if t is not None:
            return t
    raise ParseError(f"cannot type expression node {type(expr).__name__}")


_PY_OPS = {"&": "and", "|": "or", "=": "==", "!=": "!=",
           "<": "<", "<=": "<=", ">": ">", ">=": ">=",
           "+": "+", "-": "-", "*": "*", "/": "/"}


def to_python(expr, var_index, constants, atom_names=None):
    """Render `expr` as a Python expression over the valuation tuple `v`.

    Variables become `v[i]`, constants are inlined as literals. Nodes found
    in `atom_names` (a mapping node -> name) render as that name.
    """
    if atom_names is not None and expr in atom_names:
        return atom_names[expr]
    if isinstance(expr, IntLit):
        return repr(expr.value)
    if isinstance(expr, RealLit):
        return repr(expr.value)
    if isinstance(expr, BoolLit):
        return repr(expr.value)
    if isinstance(expr, Ident):
        if expr.name in var_index:
            return f"v[{var_index[expr.name]}]"
        value = constants[expr.name]
        if isinstance(value, Fraction):
            if value.denominator == 1:
                return repr(int(value))
            return repr(float(value))
        return repr(value)
    if isinstance(expr, Unary):
        inner = to_python(expr.operand, var_index, constants, atom_names)
        return f"(-{inner})" if expr.op == "-" else f"(not {inner})"
    if isinstance(expr, Binary):
        left = to_python(expr.left, var_index, constants, atom_names)
        right = to_python(expr.right, var_index, constants, atom_names)
        return f"({left} {_PY_OPS[expr.op]} {right})"
    raise ParseError(f"cannot compile expression node {type(expr).__name__}")


def compile_expression(expr, var_index, constants, extra_args=()):
    """Compile `expr` to a fast callable of the valuation tuple `v`."""
    args = ", ".join(("v",) + tuple(extra_args))
    code = to_python(expr, var_index, constants)
    return eval(f"lambda {args}: {code}", {"__builtins__": {}})  # noqa: S307


def fold_constant(expr, constants, pos_hint=(0, 0)):
    """Evaluate a constant expression to a Fraction at parse time."""
    if isinstance(expr, IntLit):
        return Fraction(expr.value)
    if isinstance(expr, RealLit):
        return expr.decimal if expr.decimal is not None else Fraction(expr.value)
    if isinstance(expr, Ident):
        if expr.name not in constants:
            raise ParseError(f"unknown constant '{expr.name}' in constant "
                             "expression", *expr.pos)
        return constants[expr.name]
    if isinstance(expr, Unary) and expr.op == "-":
        return -fold_constant(expr.operand, constants, pos_hint)
    if isinstance(expr, Binary) and expr.op in ("+", "-", "*", "/"):
        left = fold_constant(expr.left, constants, pos_hint)
        right = fold_constant(expr.right, constants, pos_hint)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if right == 0:
            raise ParseError("division by zero in constant expression", *expr.pos)
        return left / right
    raise ParseError("constant expressions allow only numbers, constants "
                     "and + - * /", *pos_hint)


def to_source(expr, atom_printer=None, _parent_level=-1):
    """Pretty-print `expr`; output reparses to a structurally equal AST."""
    if atom_printer is not None:
        text = atom_printer(expr)
        if text is not None:
            return text
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, RealLit):
        return repr(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, Ident):
        return expr.name
    if isinstance(expr, Unary):
        inner = to_source(expr.operand, atom_printer, _UNARY_LEVEL)
        text = f"{expr.op}{inner}"
        return text
    if isinstance(expr, Binary):
        level = _PRECEDENCE[expr.op]
        left = to_source(expr.left, atom_printer, level - 1)
        # same-level right operand is parenthesized to keep left associativity
        right = to_source(expr.right, atom_printer, level)
        text = f"{left} {expr.op} {right}"
        if level <= _parent_level:
            return f"({text})"
        return text
    raise ParseError(f"cannot print expression node {type(expr).__name__}")


