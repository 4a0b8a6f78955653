"""Probability queries over time-bounded until path formulas.

Supported query forms::

    P=? [ left U<=t right ]
    P>=0.9 [ left U<=t right ]        (comparators < <= > >=)

State formulas are boolean expressions over model variables, constants and
labels, optionally containing one level of nested threshold operators such
as ``(P>=0.5 [ true U<=7 "communicate" ])``. The steady-state operator, the
next operator, unbounded until and interval-bounded until are rejected with
named unsupported-operator errors.
"""

import enum
from dataclasses import dataclass

from . import expressions as ex
from .errors import (CtmcheckError, ModelRuntimeError, ParseError,
                     UnsupportedOperatorError)
from .lexer import TokenStream
from .model import _substitute_labels, _type_env, eval_predicate

COMPARATORS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class PathFormula:
    """Time-bounded until: reach a `right` state within `time_bound`,
    passing only through `left` states."""
    left: object
    right: object
    time_bound: float


@dataclass(frozen=True)
class ProbAtom:
    """A nested threshold operator used as a boolean atom in a state
    formula: holds in a state iff the probability of `path` from that state
    compares as required against `threshold`."""
    comparator: str
    threshold: float
    path: PathFormula


@dataclass(frozen=True)
class CslQuery:
    mode: str  # 'exact' or 'threshold'
    comparator: str | None
    target_p: float | None
    path: PathFormula


class UntilClass(enum.Enum):
    NON_NESTED_UNTIL = "non-nested"
    NESTED_UNTIL = "nested"


def parse_property(source, model):
    """Parse and type-check one query against `model`'s symbols."""
    stream = TokenStream(source)
    head = stream.expect("ident", what="'P'")
    if head.text == "S":
        raise UnsupportedOperatorError(
            "S", "unsupported operator 'S': the steady-state operator is "
            "not supported", head.line, head.column)
    if head.text != "P":
        raise ParseError("a query must start with the 'P' operator",
                         head.line, head.column)
    if stream.accept("op", "="):
        stream.expect("op", "?")
        mode, comparator, target_p = "exact", None, None
    else:
        op = stream.current
        if not (op.kind == "op" and op.text in COMPARATORS):
            stream.error("expected '=?' or a comparator after 'P'")
        stream.consume()
        target_p = _parse_number(stream, "probability bound")
        if not 0.0 <= target_p <= 1.0:
            raise ParseError("probability bound must be within [0,1]",
                             op.line, op.column)
        mode, comparator = "threshold", op.text
    stream.expect("op", "[")
    path = _parse_path(stream, model)
    stream.expect("op", "]")
    if not stream.at_end():
        stream.error("trailing input after query")
    return CslQuery(mode, comparator, target_p, path)


def _parse_number(stream, what):
    tok = stream.current
    if tok.kind not in ("int", "real"):
        stream.error(f"expected a number for the {what}")
    stream.consume()
    return float(tok.text)


def _looks_like_next_operator(stream):
    if not stream.check("ident", "X"):
        return False
    nxt = stream.next
    return (nxt.kind in ("ident", "int", "real", "string")
            or (nxt.kind == "op" and nxt.text in ("(", "!")))


def _parse_path(stream, model):
    tok = stream.current
    if _looks_like_next_operator(stream):
        raise UnsupportedOperatorError(
            "X", "unsupported operator 'X': the next operator is not "
            "supported", tok.line, tok.column)
    left = _parse_state_formula(stream, model)
    u = stream.expect("ident", "U", what="'U'")
    if stream.check("op", "["):
        raise UnsupportedOperatorError(
            "U[t1,t2]", "unsupported operator: interval-bounded until "
            "'U[t1,t2]' is not supported", u.line, u.column)
    if stream.check("op", "<") or stream.check("op", ">") or stream.check("op", ">="):
        raise UnsupportedOperatorError(
            "U", "unsupported operator: only 'U<=t' time bounds are "
            "supported", u.line, u.column)
    if not stream.check("op", "<="):
        raise UnsupportedOperatorError(
            "U", "unsupported operator: unbounded until is not supported "
            "(a time bound 'U<=t' is required)", u.line, u.column)
    stream.consume()
    bound_tok = stream.current
    time_bound = _parse_number(stream, "time bound")
    if not time_bound > 0.0:
        raise ParseError("time bound must be positive",
                         bound_tok.line, bound_tok.column)
    right = _parse_state_formula(stream, model)
    return PathFormula(left, right, time_bound)


def _parse_state_formula(stream, model):
    expr = ex.parse_expression(stream, primary_hook=_formula_hook(stream, model))
    expr = _substitute_labels(expr, model.labels)
    _check_formula_type(expr, model)
    return expr


def _formula_hook(stream, model):
    def hook(s):
        tok = s.accept("string")
        if tok is not None:
            if tok.text not in model.labels:
                raise ParseError(f"unknown label '{tok.text}'",
                                 tok.line, tok.column)
            return model.labels[tok.text]
        # '(' 'P' cmp number '[' opens a nested operator; anything else in
        # parens falls through to the ordinary expression rules
        if s.check("op", "(") and s.next.kind == "ident" and s.next.text == "P":
            mark = s._pos
            s.consume()
            atom = _try_parse_prob_atom(s, model)
            if atom is None:
                s._pos = mark
                return None
            s.expect("op", ")")
            return atom
    return hook


def _try_parse_prob_atom(stream, model):
    p_tok = stream.consume()  # 'P'
    if stream.check("op", "="):
        # committed: P= inside a formula can only be a (disallowed) P=?
        stream.consume()
        if stream.accept("op", "?"):
            raise ParseError("nested probability operators need a threshold "
                             "comparison; 'P=?' cannot be nested",
                             p_tok.line, p_tok.column)
        return None
    if not (stream.current.kind == "op" and stream.current.text in COMPARATORS):
        return None
    comparator = stream.consume().text
    if stream.current.kind not in ("int", "real"):
        return None
    threshold = float(stream.consume().text)
    if not stream.check("op", "["):
        return None
    # structure confirmed; parse errors inside the brackets now propagate
    if not 0.0 <= threshold <= 1.0:
        raise ParseError("probability bound must be within [0,1]",
                         p_tok.line, p_tok.column)
    stream.consume()
    path = _parse_path(stream, model)
    stream.expect("op", "]")
    atom = ProbAtom(comparator, threshold, path)
    if collect_prob_atoms(path.left) or collect_prob_atoms(path.right):
        raise ParseError("probability operators may be nested at most one "
                         "level deep", p_tok.line, p_tok.column)
    return atom


def _check_formula_type(expr, model):
    env = _type_env(model)

    def atom_hook(node):
        return ex.BOOL if isinstance(node, ProbAtom) else None

    if ex.type_of(expr, env, atom_hook) != ex.BOOL:
        raise ParseError("state formula must be boolean-valued")


def collect_prob_atoms(formula):
    """Nested threshold operators of `formula`, outermost level only,
    de-duplicated structurally, in source order."""
    found = []
    stack = [formula]
    while stack:
        node = stack.pop(0)
        if isinstance(node, ProbAtom):
            if node not in found:
                found.append(node)
        elif isinstance(node, ex.Unary):
            stack.insert(0, node.operand)
        elif isinstance(node, ex.Binary):
            stack.insert(0, node.right)
            stack.insert(0, node.left)
    return found


def classify(query):
    """NON_NESTED_UNTIL iff neither side of the until holds a nested
    probability operator."""
    if collect_prob_atoms(query.path.left) or collect_prob_atoms(query.path.right):
        return UntilClass.NESTED_UNTIL
    return UntilClass.NON_NESTED_UNTIL


def _compare(p, comparator, threshold):
    if comparator == "<":
        return p < threshold
    if comparator == "<=":
        return p <= threshold
    if comparator == ">":
        return p > threshold
    return p >= threshold


def _atom_value(atom, s, inner):
    if inner is None:
        raise CtmcheckError("state formula holds a nested probability "
                            "operator but no inner table was supplied")
    table = inner
    if atom in inner and isinstance(inner.get(atom), dict):
        table = inner[atom]
    if s not in table:
        raise CtmcheckError(f"inner table does not cover state {s}")
    value = table[s]
    if isinstance(value, bool):
        return value
    return _compare(float(value), atom.comparator, atom.threshold)


def sat(model, s, formula, inner=None):
    """Truth of `formula` in state `s`.

    `inner` supplies values for nested operators, either flat
    ``{state: bool | probability}`` or per-operator
    ``{ProbAtom: {state: bool | probability}}``.
    """
    if isinstance(formula, ProbAtom):
        return _atom_value(formula, s, inner)
    if not collect_prob_atoms(formula):
        return eval_predicate(model, s, formula)
    if isinstance(formula, ex.Unary) and formula.op == "!":
        return not sat(model, s, formula.operand, inner)
    if isinstance(formula, ex.Binary):
        op = formula.op
        if op == "&":
            return (sat(model, s, formula.left, inner)
                    and sat(model, s, formula.right, inner))
        if op == "|":
            return (sat(model, s, formula.left, inner)
                    or sat(model, s, formula.right, inner))
        if op in ("=", "!="):
            eq = (sat(model, s, formula.left, inner)
                  == sat(model, s, formula.right, inner))
            return eq if op == "=" else not eq
    raise CtmcheckError(f"cannot evaluate formula node {type(formula).__name__}")


def compile_state_formula(model, formula):
    """Compile to `fn(valuation, atom_values) -> bool` plus the tuple of
    nested operators whose truth values `atom_values` must supply, in
    collect_prob_atoms order."""
    atoms = tuple(collect_prob_atoms(formula))
    atom_names = {atom: f"a[{i}]" for i, atom in enumerate(atoms)}
    code = ex.to_python(formula, model.var_index, model.constants, atom_names)
    raw = eval(f"lambda v, a: {code}", {"__builtins__": {}})  # noqa: S307

    def fn(v, a):
        try:
            return raw(v, a)
        except ZeroDivisionError:
            raise ModelRuntimeError(
                "division by zero evaluating a state formula at state "
                f"{model.format_state(v)}", state=v) from None

    return fn, atoms


def format_state_formula(formula):
    def atom_printer(node):
        if isinstance(node, ProbAtom):
            return (f"(P{node.comparator}{_format_number(node.threshold)} "
                    f"[ {_format_path(node.path)} ])")
        return None
    return ex.to_source(formula, atom_printer)


def _format_number(x):
    return repr(x)


def _format_path(path):
    return (f"{format_state_formula(path.left)} "
            f"U<={_format_number(path.time_bound)} "
            f"{format_state_formula(path.right)}")


def format_property(query):
    """Render a query back to text; reparsing yields an equal AST."""
    if query.mode == "exact":
        head = "P=?"
    else:
        head = f"P{query.comparator}{_format_number(query.target_p)}"
    return f"{head} [ {_format_path(query.path)} ]"


def parse_property_file(text, model):
    """Parse a .csl file: one property per line, // comments allowed.
    Returns a list of (source text, query) pairs."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        try:
            out.append((line, parse_property(line, model)))
        except ParseError as err:
            err.line = lineno
            raise
    return out
