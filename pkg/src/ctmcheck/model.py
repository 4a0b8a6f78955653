"""Guarded-command CTMC models.

A model file (extension ``.sm``) declares a ``ctmc``, optional constants and
labels, and a single module of integer variables plus guarded commands::

    ctmc
    const int c = 7;
    const double mu = 2.0;
    module tandem
      q : [0..c] init 0;
      [] q < c  -> 4*mu : (q'=q+1);
      [] q > 0  -> mu   : (q'=q-1);
    endmodule
    label "full" = q = c;

A variable with an empty upper bound (``q : [0..] init 0``) is unbounded
above, which is what makes state spaces infinite. Commands may carry several
``rate : update`` branches joined by ``+``; each branch acts as its own
command. States are plain tuples of ints, one entry per declared variable in
declaration order. Transitions to the same target state race: their rates
add. Self-loops are dropped when successors are generated.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import fsum
from typing import NamedTuple

from . import expressions as ex
from .errors import ModelRuntimeError, ParseError
from .lexer import TokenStream

INT64_MAX = 2 ** 63


@dataclass(frozen=True)
class VariableDecl:
    name: str
    lower: int
    upper: int | None  # None = unbounded above
    init: int


@dataclass(frozen=True)
class Command:
    guard: object
    rate: object
    updates: tuple  # ((variable name, expression), ...)


class Transition(NamedTuple):
    source: tuple
    target: tuple
    rate: float


class Model:
    """Immutable parsed model; successor generation is pure and reentrant."""

    def __init__(self, name, variables, commands, constants, labels,
                 const_kinds=None):
        self.name = name
        self.variables = tuple(variables)
        self.commands = tuple(commands)
        self.constants = dict(constants)  # name -> Fraction
        self.labels = dict(labels)        # name -> boolean expression AST
        if const_kinds is None:
            const_kinds = {n: "int" if v.denominator == 1 else "double"
                           for n, v in self.constants.items()}
        self.const_kinds = dict(const_kinds)
        self.var_index = {v.name: i for i, v in enumerate(self.variables)}
        self.bounds = tuple((v.lower, v.upper) for v in self.variables)
        self._compiled = [self._compile_command(c, k)
                          for k, c in enumerate(self.commands)]
        self._pred_cache = {}

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return (self.name == other.name
                and self.variables == other.variables
                and self.commands == other.commands
                and self.constants == other.constants
                and self.const_kinds == other.const_kinds
                and self.labels == other.labels)

    def __repr__(self):
        return (f"Model({self.name!r}, {len(self.variables)} variables, "
                f"{len(self.commands)} commands)")

    def _compile_command(self, cmd, k):
        guard = ex.compile_expression(cmd.guard, self.var_index, self.constants)
        rate = ex.compile_expression(cmd.rate, self.var_index, self.constants)
        exprs = {self.var_index[name]: expr for name, expr in cmd.updates}
        parts = []
        for i in range(len(self.variables)):
            if i in exprs:
                parts.append(ex.to_python(exprs[i], self.var_index, self.constants))
            else:
                parts.append(f"v[{i}]")
        tuple_code = "(" + ", ".join(parts) + ("," if len(parts) == 1 else "") + ")"
        update = eval(f"lambda v: {tuple_code}", {"__builtins__": {}})  # noqa: S307
        touched = tuple(sorted(exprs))
        return guard, rate, update, touched, k

    def successor_items(self, v):
        """Merged (target valuation, rate) pairs for state `v`, in command
        declaration order of first occurrence. Self-loops are dropped."""
        merged = {}
        for guard, rate, update, touched, k in self._compiled:
            try:
                if not guard(v):
                    continue
                r = float(rate(v))
            except ZeroDivisionError:
                raise ModelRuntimeError(
                    f"division by zero evaluating command {k + 1} at state "
                    f"{self.format_state(v)}", state=v) from None
            if r <= 0.0:
                raise ModelRuntimeError(
                    f"command {k + 1} has rate {r} on an enabled guard at "
                    f"state {self.format_state(v)}", state=v)
            try:
                target = update(v)
            except ZeroDivisionError:
                raise ModelRuntimeError(
                    f"division by zero in update of command {k + 1} at state "
                    f"{self.format_state(v)}", state=v) from None
            for i in touched:
                x = target[i]
                lo, hi = self.bounds[i]
                if x < lo or (hi is not None and x > hi) or not -INT64_MAX < x < INT64_MAX:
                    raise ModelRuntimeError(
                        f"update of command {k + 1} drives variable "
                        f"'{self.variables[i].name}' to {x}, outside its "
                        f"declared range, at state {self.format_state(v)}",
                        state=v)
            if target == v:
                continue
            merged[target] = merged.get(target, 0.0) + r
        return list(merged.items())

    def format_state(self, v):
        return "(" + ", ".join(f"{d.name}={x}"
                               for d, x in zip(self.variables, v)) + ")"


def initial_state(model):
    """The state given by every variable's init value."""
    return tuple(v.init for v in model.variables)


def successors(model, s):
    """All outgoing transitions of `s` (race semantics, no self-loops)."""
    return [Transition(s, t, r) for t, r in model.successor_items(s)]


def exit_rate(transitions):
    """Total outgoing rate; 0.0 for a deadlock state."""
    return fsum(t.rate for t in transitions)


def eval_predicate(model, s, expr):
    """Evaluate a boolean expression (text or AST) in state `s`."""
    if isinstance(expr, str):
        expr = parse_predicate(model, expr)
    fn = model._pred_cache.get(expr)
    if fn is None:
        env = _type_env(model)
        if ex.type_of(expr, env) != ex.BOOL:
            raise ParseError("predicate must be boolean-valued")
        fn = ex.compile_expression(expr, model.var_index, model.constants)
        model._pred_cache[expr] = fn
    try:
        return bool(fn(s))
    except ZeroDivisionError:
        raise ModelRuntimeError(
            f"division by zero evaluating a predicate at state "
            f"{model.format_state(s)}", state=s) from None


def parse_predicate(model, text):
    """Parse a boolean expression against the model's symbols. Label names
    (bare or quoted) expand to their defining expression."""
    stream = TokenStream(text)
    expr = ex.parse_expression(stream, primary_hook=_label_hook(model))
    if not stream.at_end():
        stream.error("trailing input after expression")
    expr = _substitute_labels(expr, model.labels)
    env = _type_env(model)
    if ex.type_of(expr, env) != ex.BOOL:
        raise ParseError("predicate must be boolean-valued")
    return expr


def _label_hook(model):
    def hook(stream):
        tok = stream.accept("string")
        if tok is not None:
            if tok.text not in model.labels:
                raise ParseError(f"unknown label '{tok.text}'", tok.line, tok.column)
            return model.labels[tok.text]
        return None
    return hook


def _substitute_labels(expr, labels):
    if isinstance(expr, ex.Ident) and expr.name in labels:
        return labels[expr.name]
    if isinstance(expr, ex.Unary):
        return ex.Unary(expr.op, _substitute_labels(expr.operand, labels), pos=expr.pos)
    if isinstance(expr, ex.Binary):
        return ex.Binary(expr.op,
                         _substitute_labels(expr.left, labels),
                         _substitute_labels(expr.right, labels), pos=expr.pos)
    return expr


def _type_env(model):
    env = {v.name: ex.INT for v in model.variables}
    for name in model.constants:
        env[name] = ex.INT if model.const_kinds[name] == "int" else ex.DOUBLE
    return env


# ---------------------------------------------------------------------------
# parsing

_MODEL_KINDS = ("dtmc", "mdp", "pta", "probabilistic", "nondeterministic")


def parse_model(source):
    """Parse model text into a type-checked Model.

    Raises ParseError (with line/column) on lexical, syntactic or semantic
    problems: unknown identifiers, type mismatches, duplicate variables,
    bad init values, or a non-CTMC model keyword.
    """
    stream = TokenStream(source)
    head = stream.expect("ident", what="model type keyword 'ctmc'")
    if head.text != "ctmc":
        if head.text in _MODEL_KINDS:
            raise ParseError(f"unsupported model type '{head.text}': only "
                             "ctmc models are handled", head.line, head.column)
        raise ParseError("model must start with the 'ctmc' keyword",
                         head.line, head.column)

    constants = {}
    const_kinds = {}
    labels = {}
    label_order = []
    module = None

    while not stream.at_end():
        if stream.check("ident", "const"):
            _parse_const(stream, constants, const_kinds)
        elif stream.check("ident", "label"):
            _parse_label(stream, labels, label_order)
        elif stream.check("ident", "module"):
            if module is not None:
                stream.error("only a single module is supported")
            module = _parse_module(stream, constants)
        else:
            stream.error(f"unexpected token {stream.current.text!r} at top level")
    if module is None:
        raise ParseError("model has no module")

    name, variables, commands = module
    model_env = {v.name: ex.INT for v in variables}
    for cname, value in constants.items():
        model_env[cname] = ex.INT if const_kinds[cname] == "int" else ex.DOUBLE

    var_names = {v.name for v in variables}
    for cname in constants:
        if cname in var_names:
            raise ParseError(f"'{cname}' is declared both as a constant and "
                             "a variable")

    for k, cmd in enumerate(commands):
        if ex.type_of(cmd.guard, model_env) != ex.BOOL:
            raise ParseError(f"guard of command {k + 1} is not boolean",
                             *cmd.guard.pos)
        if ex.type_of(cmd.rate, model_env) == ex.BOOL:
            raise ParseError(f"rate of command {k + 1} is not numeric",
                             *cmd.rate.pos)
        seen = set()
        for vname, expr in cmd.updates:
            if vname not in var_names:
                raise ParseError(f"update of command {k + 1} assigns unknown "
                                 f"variable '{vname}'")
            if vname in seen:
                raise ParseError(f"command {k + 1} assigns variable "
                                 f"'{vname}' twice in one update")
            seen.add(vname)
            if ex.type_of(expr, model_env) != ex.INT:
                raise ParseError(f"update expression for '{vname}' in command "
                                 f"{k + 1} is not integer-valued", *expr.pos)

    for lname in label_order:
        expr = labels[lname]
        if ex.type_of(expr, model_env) != ex.BOOL:
            raise ParseError(f"label \"{lname}\" is not boolean")

    return Model(name, variables, commands, constants, labels, const_kinds)


def _parse_const(stream, constants, const_kinds):
    stream.expect("ident", "const")
    kind_tok = stream.expect("ident", what="'int' or 'double'")
    if kind_tok.text not in ("int", "double"):
        raise ParseError("constant kind must be 'int' or 'double'",
                         kind_tok.line, kind_tok.column)
    name_tok = stream.expect("ident", what="constant name")
    if name_tok.text in constants:
        raise ParseError(f"duplicate constant '{name_tok.text}'",
                         name_tok.line, name_tok.column)
    stream.expect("op", "=")
    expr = ex.parse_expression(stream)
    stream.expect("op", ";")
    value = ex.fold_constant(expr, constants,
                             pos_hint=(name_tok.line, name_tok.column))
    if kind_tok.text == "int" and value.denominator != 1:
        raise ParseError(f"constant '{name_tok.text}' declared int but its "
                         f"value {value} is not integral",
                         name_tok.line, name_tok.column)
    constants[name_tok.text] = value
    const_kinds[name_tok.text] = kind_tok.text


def _parse_label(stream, labels, label_order):
    stream.expect("ident", "label")
    name_tok = stream.expect("string", what="quoted label name")
    if name_tok.text in labels:
        raise ParseError(f"duplicate label \"{name_tok.text}\"",
                         name_tok.line, name_tok.column)
    stream.expect("op", "=")
    expr = ex.parse_expression(stream)
    stream.expect("op", ";")
    labels[name_tok.text] = expr
    label_order.append(name_tok.text)


def _parse_module(stream, constants):
    stream.expect("ident", "module")
    name = stream.expect("ident", what="module name").text
    variables = []
    names = set()
    while stream.check("ident") and stream.next.kind == "op" and stream.next.text == ":":
        variables.append(_parse_vardecl(stream, constants, names))
    commands = []
    while stream.check("op", "["):
        commands.extend(_parse_command(stream))
    stream.expect("ident", "endmodule")
    return name, variables, commands


def _parse_int_const(stream, constants, what):
    expr = ex.parse_expression(stream)
    value = ex.fold_constant(expr, constants)
    if value.denominator != 1:
        stream.error(f"{what} must be an integer")
    return int(value)


def _parse_vardecl(stream, constants, names):
    name_tok = stream.expect("ident", what="variable name")
    if name_tok.text in names:
        raise ParseError(f"duplicate variable '{name_tok.text}'",
                         name_tok.line, name_tok.column)
    names.add(name_tok.text)
    stream.expect("op", ":")
    stream.expect("op", "[")
    lower = _parse_int_const(stream, constants, "lower bound")
    stream.expect("op", "..")
    upper = None
    if not stream.check("op", "]"):
        upper = _parse_int_const(stream, constants, "upper bound")
    stream.expect("op", "]")
    stream.expect("ident", "init")
    init = _parse_int_const(stream, constants, "init value")
    stream.expect("op", ";")
    if upper is not None and lower > upper:
        raise ParseError(f"variable '{name_tok.text}' has lower bound above "
                         "upper bound", name_tok.line, name_tok.column)
    if init < lower:
        raise ParseError(f"variable '{name_tok.text}': init below lower bound",
                         name_tok.line, name_tok.column)
    if upper is not None and init > upper:
        raise ParseError(f"variable '{name_tok.text}': init above upper bound",
                         name_tok.line, name_tok.column)
    return VariableDecl(name_tok.text, lower, upper, init)


def _parse_command(stream):
    stream.expect("op", "[")
    stream.expect("op", "]")
    guard = ex.parse_expression(stream)
    stream.expect("op", "->")
    branches = []
    while True:
        rate = ex.parse_expression(stream)
        stream.expect("op", ":")
        updates = _parse_update(stream)
        branches.append(Command(guard, rate, updates))
        if not stream.accept("op", "+"):
            break
    stream.expect("op", ";")
    return branches


def _parse_update(stream):
    updates = []
    while True:
        stream.expect("op", "(")
        name = stream.expect("ident", what="variable name").text
        stream.expect("op", "'")
        stream.expect("op", "=")
        expr = ex.parse_expression(stream)
        stream.expect("op", ")")
        updates.append((name, expr))
        if not stream.accept("op", "&"):
            break
    return tuple(updates)


# ---------------------------------------------------------------------------
# printing

def _format_fraction(value):
    if value.denominator == 1:
        return str(int(value))
    as_float = float(value)
    if Fraction(repr(as_float)) == value:
        return repr(as_float)
    return f"{value.numerator}/{value.denominator}"


def format_model(model):
    """Render a model back to source; reparsing yields an equal Model."""
    lines = ["ctmc"]
    for name, value in model.constants.items():
        kind = model.const_kinds[name]
        lines.append(f"const {kind} {name} = {_format_fraction(value)};")
    lines.append(f"module {model.name}")
    for v in model.variables:
        hi = "" if v.upper is None else str(v.upper)
        lines.append(f"  {v.name} : [{v.lower}..{hi}] init {v.init};")
    for cmd in model.commands:
        upd = " & ".join(f"({name}'={ex.to_source(expr)})"
                         for name, expr in cmd.updates)
        lines.append(f"  [] {ex.to_source(cmd.guard)} -> "
                     f"{ex.to_source(cmd.rate)} : {upd};")
    lines.append("endmodule")
    for name, expr in model.labels.items():
        lines.append(f'label "{name}" = {ex.to_source(expr)};')
    return "\n".join(lines) + "\n"
