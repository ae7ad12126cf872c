"""Recursive-descent parser for ``.ifc`` source files.

    var h : secret trusted;
    var u : public untrusted;
    var low : public trusted;
    [#];
    low := declassify(u < h);
    endorse@e1(u, v) if (u == v) { ... } else { ... }
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EnvError, LabelError, ParseError
from .lattice import parse_level
from .syntax import (
    INTERNAL_PREFIX, PRECEDENCE, Assign, BinOp, CheckedEndorse, Command, Const,
    Declassify, Endorse, Hole, If, Program, SecurityEnv, Seq, Skip, Var, While, seq,
)

TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<hole>\[\s*(?:\#|•)\s*\])
  | (?P<label>@[A-Za-z0-9_.#']+)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>:=|==|!=|<=|>=|&&|\|\||[-+*<>=(){};:,@])
""", re.VERBOSE | re.DOTALL)

KEYWORDS = {"var", "skip", "if", "else", "while", "endorse", "declassify", "true", "false"}
DIRECTIVE_RE = re.compile(r"^\s*//\s*domain\s*:\s*(\d+)\s*$", re.MULTILINE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            newlines = m.group().count("\n")
            if newlines:
                line += newlines
                line_start = pos + m.group().rfind("\n") + 1
        elif kind != "ws":
            if kind == "ident" and m.group() in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass(frozen=True)
class _MultiChecked(Command):
    label: object
    vars: tuple
    cond: object
    then: Command
    orelse: Command
    span: object = None


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.holes = 0
        self.decls: list = []
        self.internal: set = set()
        self.declared: dict = {}

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def use(self, tok: Token) -> str:
        if tok.text not in self.declared:
            raise EnvError(f"undeclared variable {tok.text!r}", tok.line, tok.col)
        return tok.text

    # -- declarations
    def declarations(self):
        while self.at("var"):
            self.advance()
            name = self.ident()
            self.expect(":")
            conf = self.ident()
            integ = self.ident()
            internal = False
            if self.tok.kind == "ident" and self.tok.text == "internal":
                self.advance()
                internal = True
            self.expect(";")
            try:
                level = parse_level(conf.text, integ.text)
            except KeyError:
                self.error(f"bad security level {conf.text} {integ.text}", conf)
            if name.text in self.declared:
                raise EnvError(f"variable {name.text!r} declared twice", name.line, name.col)
            if name.text.startswith(INTERNAL_PREFIX) != internal:
                raise EnvError(f"names starting with {INTERNAL_PREFIX!r} are reserved for "
                               f"internal temporaries", name.line, name.col)
            self.declared[name.text] = level
            self.decls.append((name.text, level))
            if internal:
                self.internal.add(name.text)

    # -- statements
    def stmt_list(self, closing: str) -> Command:
        cmds = []
        while not (self.at(closing) or self.tok.kind == "eof"):
            c, block_like = self.stmt()
            cmds.append(c)
            if self.at(";"):
                self.advance()
            elif not block_like and not (self.at(closing) or self.tok.kind == "eof"):
                self.error(f"expected ';', found {self.tok.text!r}")
        return seq(*cmds)

    def block(self) -> Command:
        self.expect("{")
        c = self.stmt_list("}")
        self.expect("}")
        return c

    def stmt(self) -> tuple:
        t = self.tok
        span = (t.line, t.col)
        if t.kind == "hole":
            self.advance()
            self.holes += 1
            return Hole(self.holes - 1, span), False
        if self.at("skip"):
            self.advance()
            return Skip(span), False
        if self.at("{"):
            return self.block(), True
        if self.at("if"):
            self.advance()
            cond = self.guard(allow_declassify=False)
            then = self.block()
            orelse = self.else_part()
            return If(cond, then, orelse, span), True
        if self.at("while"):
            self.advance()
            cond = self.guard(allow_declassify=False)
            return While(cond, self.block(), span), True
        if self.at("endorse"):
            self.advance()
            label = self.label()
            self.expect("(")
            names = [self.use(self.ident())]
            while self.at(","):
                self.advance()
                names.append(self.use(self.ident()))
            self.expect(")")
            self.expect("if")
            cond = self.guard(allow_declassify=True)
            then = self.block()
            orelse = self.else_part()
            return _MultiChecked(label, tuple(names), cond, then, orelse, span), True
        if t.kind == "ident":
            name = self.use(self.advance())
            self.expect(":=")
            if self.at("endorse"):
                self.advance()
                label = self.label()
                self.expect("(")
                e = self.expr(allow_declassify=True)
                self.expect(")")
                return Endorse(name, label, e, span), False
            return Assign(name, self.expr(allow_declassify=True), span), False
        self.error(f"unexpected {t.text or 'end of input'!r}")

    def else_part(self) -> Command:
        if not self.at("else"):
            return Skip()
        self.advance()
        if self.at("if"):
            c, _ = self.stmt()
            return c
        return self.block()

    def label(self):
        if self.tok.kind == "label":
            return self.advance().text[1:]
        if self.at("@"):
            self.error("expected endorsement label")
        return None

    def guard(self, allow_declassify: bool):
        self.expect("(")
        e = self.expr(allow_declassify)
        self.expect(")")
        return e

    # -- expressions (precedence climbing)
    def expr(self, allow_declassify: bool, min_prec: int = 1, in_declassify: bool = False):
        left = self.atom(allow_declassify, in_declassify)
        while True:
            op = self.tok.text
            if self.tok.kind != "op":
                break
            if op == "=":
                op = "=="
            if op not in PRECEDENCE or PRECEDENCE[op] < min_prec:
                break
            t = self.advance()
            right = self.expr(allow_declassify, PRECEDENCE[op] + 1, in_declassify)
            left = BinOp(op, left, right, (t.line, t.col))
        return left

    def atom(self, allow_declassify: bool, in_declassify: bool):
        t = self.tok
        span = (t.line, t.col)
        if t.kind == "num":
            self.advance()
            return Const(int(t.text), span)
        if self.at("true") or self.at("false"):
            self.advance()
            return Const(1 if t.text == "true" else 0, span)
        if self.at("declassify"):
            if not allow_declassify:
                self.error("declassification is not allowed in if/while guards")
            if in_declassify:
                self.error("nested declassify")
            self.advance()
            self.expect("(")
            inner = self.expr(allow_declassify, 1, in_declassify=True)
            self.expect(")")
            return Declassify(inner, span)
        if self.at("("):
            self.advance()
            e = self.expr(allow_declassify, 1, in_declassify)
            self.expect(")")
            return e
        if t.kind == "ident":
            return Var(self.use(self.advance()), span)
        self.error(f"unexpected {t.text or 'end of input'!r} in expression")

    def program(self) -> tuple:
        self.declarations()
        body = self.stmt_list("<eof>")
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        return SecurityEnv(tuple(self.decls), frozenset(self.internal)), body


def _finish(c: Command, explicit: set, counter: list) -> Command:
    """Fill in omitted labels, check uniqueness, desugar multi-variable checked endorse."""
    def fresh():
        while True:
            counter[0] += 1
            lab = f"e{counter[0]}"
            if lab not in explicit:
                explicit.add(lab)
                return lab

    def go(c: Command) -> Command:
        match c:
            case Seq(a, b, span):
                return Seq(go(a), go(b), span)
            case If(e, a, b, span):
                return If(e, go(a), go(b), span)
            case While(e, body, span):
                return While(e, go(body), span)
            case Endorse(x, None, e, span):
                return Endorse(x, fresh(), e, span)
            case _MultiChecked(label, names, cond, then, orelse, span):
                label = label if label is not None else fresh()
                then, orelse = go(then), go(orelse)
                if len(names) == 1:
                    return CheckedEndorse(label, names[0], cond, then, orelse, span)
                labels = [f"{label}.{k + 1}" for k in range(len(names))]
                for lab in labels:
                    if lab in explicit:
                        raise LabelError(f"duplicate endorsement label {lab!r}", *(span or (0, 0)))
                    explicit.add(lab)
                # check as early as possible; later variables endorsed under `true`
                inner = then
                for x, lab in reversed(list(zip(names[1:], labels[1:]))):
                    inner = CheckedEndorse(lab, x, Const(1), inner, Skip(), span)
                return CheckedEndorse(labels[0], names[0], cond, inner, orelse, span)
        return c
    return go(c)


def _explicit_labels(c: Command) -> list:
    out = []
    def go(c):
        match c:
            case Seq(a, b) | If(_, a, b):
                go(a); go(b)
            case While(_, body):
                go(body)
            case Endorse(_, lab, _, span) if lab is not None:
                out.append((lab, span))
            case _MultiChecked(lab, _, _, a, b, span):
                if lab is not None:
                    out.append((lab, span))
                go(a); go(b)
    go(c)
    return out


def parse_program(text: str, domain: int | None = None) -> Program:
    parser = Parser(text)
    env, body = parser.program()
    seen: set = set()
    for lab, span in _explicit_labels(body):
        if lab in seen:
            raise LabelError(f"duplicate endorsement label {lab!r}", *(span or (0, 0)))
        seen.add(lab)
    body = _finish(body, seen, [0])
    if domain is None:
        m = DIRECTIVE_RE.search(text)
        domain = int(m.group(1)) if m else 4
    if domain < 2:
        raise ParseError("domain size must be at least 2")
    return Program(env, body, domain)


def parse_command(text: str, env: SecurityEnv) -> Command:
    """Parse a statement list against an existing environment (used for attacks)."""
    parser = Parser(text)
    parser.declared = dict(env.decls)
    body = parser.stmt_list("<eof>")
    if parser.tok.kind != "eof":
        parser.error(f"unexpected {parser.tok.text!r}")
    return _finish(body, set(), [0])


def parse_file(path, domain: int | None = None) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read(), domain)
