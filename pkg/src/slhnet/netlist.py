"""Text DSL for declaring photonic network netlists.

Grammar (newline-separated statements, ``#`` comments):

    netlist := stmt*
    stmt    := "mode" IDENT
             | "param" IDENT "=" literal
             | "comp" IDENT "=" primitive
             | "network" "=" expr
    primitive := KIND "(" args ")"
    expr    := term ("++" term)*        # concatenation, G1-then-G2 ports
    term    := factor ("<|" factor)*    # series, left operand downstream
    factor  := IDENT | "(" expr ")"

Primitive kinds: mirror(mode, rate, freq), loss_mirror(mode, rate),
drive(amplitude), phase(theta), passthrough(n), beamsplitter(eta).
Numeric arguments may be literals or references to declared params.
The drive amplitude accepts complex literals like ``0.5+1.2i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import slh
from .ops import ModeRegistry
from .slh import SLHTriple, validate

__all__ = ["NetlistError", "NetlistAst", "parse", "compile_netlist", "pretty_print"]


class NetlistError(ValueError):
    """Parse or compile diagnostic with a source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---- AST ----

@dataclass(frozen=True)
class Literal:
    value: complex
    is_complex: bool  # written with an imaginary part


@dataclass(frozen=True)
class Arg:
    """Primitive argument: literal value or parameter reference."""
    line: int
    col: int
    name: str | None = None      # param or mode reference
    literal: Literal | None = None


@dataclass(frozen=True)
class PrimitiveCall:
    kind: str
    args: tuple[Arg, ...]
    line: int
    col: int


@dataclass(frozen=True)
class Ref:
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class SeriesNode:
    left: "ExprNode"   # downstream
    right: "ExprNode"  # upstream
    line: int
    col: int


@dataclass(frozen=True)
class ConcatNode:
    left: "ExprNode"
    right: "ExprNode"
    line: int
    col: int


ExprNode = Ref | SeriesNode | ConcatNode


@dataclass
class NetlistAst:
    modes: list[str] = field(default_factory=list)
    params: dict[str, Literal] = field(default_factory=dict)
    comps: dict[str, PrimitiveCall] = field(default_factory=dict)
    network: ExprNode | None = None


# ---- tokenizer ----

_PUNCT = ("++", "<|", "(", ")", "=", ",")


@dataclass(frozen=True)
class Token:
    kind: str    # IDENT | NUMBER | IMAG | PUNCT | NEWLINE | EOF
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            tokens.append(Token("NEWLINE", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        two = text[i:i + 2]
        if two in ("++", "<|"):
            tokens.append(Token("PUNCT", two, line, col))
            i += 2
            col += 2
            continue
        if ch in "()=,":
            tokens.append(Token("PUNCT", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            num = text[i:j]
            kind = "NUMBER"
            if j < n and text[j] == "i":
                kind = "IMAG"
                j += 1
            tokens.append(Token(kind, num, line, col))
            col += j - i
            i = j
            continue
        if ch == "+" or ch == "-":
            tokens.append(Token("PUNCT", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise NetlistError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---- parser ----

_KINDS = {
    "mirror": 3,
    "loss_mirror": 2,
    "drive": 1,
    "phase": 1,
    "passthrough": 1,
    "beamsplitter": 1,
}
_KEYWORDS = {"mode", "param", "comp", "network"} | set(_KINDS)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind
            raise NetlistError(f"expected {want!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def skip_newlines(self):
        while self.peek().kind == "NEWLINE":
            self.next()

    def end_of_stmt(self):
        t = self.peek()
        if t.kind in ("NEWLINE", "EOF"):
            if t.kind == "NEWLINE":
                self.next()
            return
        raise NetlistError(f"unexpected {t.text!r} after statement", t.line, t.col)

    def parse(self) -> NetlistAst:
        ast = NetlistAst()
        while True:
            self.skip_newlines()
            t = self.peek()
            if t.kind == "EOF":
                break
            if t.kind != "IDENT":
                raise NetlistError(f"expected statement, found {t.text!r}",
                                   t.line, t.col)
            if t.text == "mode":
                self.next()
                name = self._declared_name(ast)
                ast.modes.append(name)
            elif t.text == "param":
                self.next()
                name = self._declared_name(ast)
                self.expect("PUNCT", "=")
                ast.params[name] = self._literal()
            elif t.text == "comp":
                self.next()
                name = self._declared_name(ast)
                self.expect("PUNCT", "=")
                ast.comps[name] = self._primitive()
            elif t.text == "network":
                if ast.network is not None:
                    raise NetlistError("duplicate network statement", t.line, t.col)
                self.next()
                self.expect("PUNCT", "=")
                ast.network = self._expr()
            else:
                raise NetlistError(f"unknown statement {t.text!r}", t.line, t.col)
            self.end_of_stmt()
        if ast.network is None:
            t = self.peek()
            raise NetlistError("netlist has no network statement", t.line, t.col)
        return ast

    def _declared_name(self, ast: NetlistAst) -> str:
        t = self.expect("IDENT")
        if t.text in _KEYWORDS:
            raise NetlistError(f"{t.text!r} is a reserved word", t.line, t.col)
        if t.text in ast.modes or t.text in ast.params or t.text in ast.comps:
            raise NetlistError(f"{t.text!r} already declared", t.line, t.col)
        return t.text

    def _number(self) -> tuple[float, bool]:
        """Signed magnitude; returns (value, was_imaginary)."""
        sign = 1.0
        t = self.peek()
        if t.kind == "PUNCT" and t.text in "+-":
            self.next()
            sign = -1.0 if t.text == "-" else 1.0
            t = self.peek()
        if t.kind not in ("NUMBER", "IMAG"):
            raise NetlistError(f"expected number, found {t.text!r}", t.line, t.col)
        self.next()
        try:
            value = float(t.text)
        except ValueError:
            raise NetlistError(f"malformed number {t.text!r}", t.line, t.col) from None
        return sign * value, t.kind == "IMAG"

    def _literal(self) -> Literal:
        v1, imag1 = self._number()
        if imag1:
            return Literal(complex(0.0, v1), True)
        t = self.peek()
        if t.kind == "PUNCT" and t.text in "+-" and \
                self.toks[self.pos + 1].kind == "IMAG":
            v2, _ = self._number()
            return Literal(complex(v1, v2), True)
        return Literal(complex(v1, 0.0), False)

    def _primitive(self) -> PrimitiveCall:
        t = self.expect("IDENT")
        if t.text not in _KINDS:
            raise NetlistError(f"unknown primitive kind {t.text!r}", t.line, t.col)
        self.expect("PUNCT", "(")
        args: list[Arg] = []
        if not (self.peek().kind == "PUNCT" and self.peek().text == ")"):
            while True:
                args.append(self._arg())
                nxt = self.peek()
                if nxt.kind == "PUNCT" and nxt.text == ",":
                    self.next()
                    continue
                break
        self.expect("PUNCT", ")")
        if len(args) != _KINDS[t.text]:
            raise NetlistError(
                f"{t.text} takes {_KINDS[t.text]} argument(s), got {len(args)}",
                t.line, t.col)
        return PrimitiveCall(t.text, tuple(args), t.line, t.col)

    def _arg(self) -> Arg:
        t = self.peek()
        if t.kind == "IDENT":
            self.next()
            return Arg(t.line, t.col, name=t.text)
        lit = self._literal()
        return Arg(t.line, t.col, literal=lit)

    def _expr(self) -> ExprNode:
        node = self._term()
        while self.peek().kind == "PUNCT" and self.peek().text == "++":
            op = self.next()
            right = self._term()
            node = ConcatNode(node, right, op.line, op.col)
        return node

    def _term(self) -> ExprNode:
        node = self._factor()
        while self.peek().kind == "PUNCT" and self.peek().text == "<|":
            op = self.next()
            right = self._factor()
            node = SeriesNode(node, right, op.line, op.col)
        return node

    def _factor(self) -> ExprNode:
        t = self.peek()
        if t.kind == "PUNCT" and t.text == "(":
            self.next()
            node = self._expr()
            self.expect("PUNCT", ")")
            return node
        if t.kind == "IDENT":
            self.next()
            return Ref(t.text, t.line, t.col)
        raise NetlistError(f"expected component reference, found {t.text!r}",
                           t.line, t.col)


def parse(text: str) -> NetlistAst:
    """Parse netlist text; raises NetlistError with line:col on failure."""
    ast = _Parser(_tokenize(text)).parse()
    _check_references(ast)
    return ast


def _check_references(ast: NetlistAst) -> None:
    for cname, call in ast.comps.items():
        spec = _ARG_SPECS[call.kind]
        for arg, kind in zip(call.args, spec):
            if arg.name is not None:
                if kind == "mode":
                    if arg.name not in ast.modes:
                        raise NetlistError(f"unknown mode {arg.name!r}",
                                           arg.line, arg.col)
                elif arg.name not in ast.params:
                    raise NetlistError(f"unknown param {arg.name!r}",
                                       arg.line, arg.col)
            elif kind == "mode":
                raise NetlistError("mode argument must be a mode name",
                                   arg.line, arg.col)

    def walk(node: ExprNode):
        if isinstance(node, Ref):
            if node.name not in ast.comps:
                raise NetlistError(f"unknown component {node.name!r}",
                                   node.line, node.col)
        else:
            walk(node.left)
            walk(node.right)

    walk(ast.network)


# argument kinds per primitive: mode name, real scalar, complex scalar, int
_ARG_SPECS = {
    "mirror": ("mode", "real", "real"),
    "loss_mirror": ("mode", "real"),
    "drive": ("complex",),
    "phase": ("real",),
    "passthrough": ("int",),
    "beamsplitter": ("real",),
}


# ---- compiler ----

def _resolve(arg: Arg, kind: str, ast: NetlistAst, values: dict[str, complex]):
    if kind == "mode":
        return arg.name
    if arg.name is not None:
        v = values[arg.name]
    else:
        v = arg.literal.value
    if kind == "real":
        if v.imag != 0.0:
            raise NetlistError("argument must be real", arg.line, arg.col)
        return v.real
    if kind == "int":
        if v.imag != 0.0 or v.real != int(v.real):
            raise NetlistError("argument must be an integer", arg.line, arg.col)
        return int(v.real)
    return v  # complex


def compile_netlist(ast: NetlistAst, overrides: dict[str, complex] | None = None,
                    ) -> SLHTriple:
    """Instantiate primitives and fold the network expression into a triple.

    ``overrides`` replace declared parameter values by name; referencing an
    undeclared parameter is an error.  The compiled triple is validated.
    """
    overrides = overrides or {}
    for name in overrides:
        if name not in ast.params:
            raise NetlistError(f"override for undeclared param {name!r}", 0, 0)
    values: dict[str, complex] = {k: lit.value for k, lit in ast.params.items()}
    for name, v in overrides.items():
        values[name] = complex(v)

    reg = ModeRegistry(ast.modes)
    triples: dict[str, SLHTriple] = {}
    for cname, call in ast.comps.items():
        spec = _ARG_SPECS[call.kind]
        vals = [_resolve(a, k, ast, values) for a, k in zip(call.args, spec)]
        try:
            if call.kind == "mirror":
                mode = reg.get(call.args[0].name)
                triples[cname] = slh.mirror(reg, mode, vals[1], vals[2])
            elif call.kind == "loss_mirror":
                mode = reg.get(call.args[0].name)
                triples[cname] = slh.loss_mirror(reg, mode, vals[1])
            elif call.kind == "drive":
                triples[cname] = slh.drive(reg, vals[0])
            elif call.kind == "phase":
                triples[cname] = slh.phase_shifter(reg, vals[0])
            elif call.kind == "passthrough":
                triples[cname] = slh.passthrough(reg, vals[0])
            elif call.kind == "beamsplitter":
                triples[cname] = slh.beamsplitter(reg, vals[0])
        except ValueError as exc:
            raise NetlistError(str(exc), call.line, call.col) from exc

    def build(node: ExprNode) -> SLHTriple:
        if isinstance(node, Ref):
            return triples[node.name]
        left = build(node.left)
        right = build(node.right)
        if isinstance(node, ConcatNode):
            return slh.concat(left, right)
        try:
            return slh.series(left, right)
        except slh.PortCountError as exc:
            raise NetlistError(str(exc), node.line, node.col) from exc

    triple = build(ast.network)
    violations = validate(triple)
    if violations:
        raise NetlistError("compiled network is invalid: " +
                           "; ".join(violations), 0, 0)
    return triple


# ---- pretty printer ----

def _fmt_literal(lit: Literal) -> str:
    # shortest round-trip float formatting so printing never loses precision
    v = lit.value
    if lit.is_complex or v.imag != 0.0:
        if v.real == 0.0:
            return f"{v.imag!r}i"
        return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}i"
    return repr(v.real)


def _fmt_expr(node: ExprNode, parent: str = "") -> str:
    if isinstance(node, Ref):
        return node.name
    if isinstance(node, SeriesNode):
        s = f"{_fmt_expr(node.left, 'series')} <| {_fmt_expr(node.right, 'series')}"
        return s
    s = f"{_fmt_expr(node.left, 'concat')} ++ {_fmt_expr(node.right, 'concat')}"
    if parent == "series":
        return f"({s})"
    return s


def pretty_print(ast: NetlistAst) -> str:
    """Canonical netlist text; parse(pretty_print(parse(t))) is a fixed point."""
    lines = []
    for m in ast.modes:
        lines.append(f"mode {m}")
    for k, lit in ast.params.items():
        lines.append(f"param {k} = {_fmt_literal(lit)}")
    for k, call in ast.comps.items():
        args = []
        for a in call.args:
            args.append(a.name if a.name is not None else _fmt_literal(a.literal))
        lines.append(f"comp {k} = {call.kind}({', '.join(args)})")
    lines.append(f"network = {_fmt_expr(ast.network)}")
    return "\n".join(lines) + "\n"
