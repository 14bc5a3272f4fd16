"""Textual net language (``.cpn`` files): lexer, parser and serializer.

Grammar::

    net        := [ "net" IDENT ";" ] { stmt }
    stmt       := colorset | vardecl | place | trans
    colorset   := "colorset" IDENT "=" "{" IDENT { "," IDENT } "}" ";"
    vardecl    := "var" IDENT ":" IDENT ";"
    place      := "place" IDENT ":" IDENT [ "init" msexpr ] [ "capacity" INT ] ";"
    trans      := "trans" IDENT "{" { arc } "}"
    arc        := ("in" | "out") IDENT ":" msexpr ";"
                | "inhibit" IDENT [ ":" INT ] ";"
    msexpr     := term { "++" term }
    term       := INT "`" IDENT

Identifiers may contain primes (``P0'``).  ``//`` starts a line comment.
Names must be declared before use.  A term identifier resolves to a
variable first and to a color value of the arc's place otherwise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .core import (
    ArcInscription,
    ColorSet,
    Multiset,
    Net,
    Place,
    Term,
    Transition,
    Variable,
    validate_net,
)

KEYWORDS = frozenset(
    {"net", "colorset", "var", "place", "trans", "init", "capacity", "in", "out", "inhibit"}
)
STATEMENT_KEYWORDS = frozenset({"net", "colorset", "var", "place", "trans"})
IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_']*")

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\f\v]+)"
    r"|(?P<nl>\n)"
    r"|(?P<comment>//[^\n]*)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_']*)"
    r"|(?P<int>[0-9]+)"
    r"|(?P<sym>\+\+|[=;:{},`])"
)


@dataclass(frozen=True)
class SourceSpan:
    start_line: int
    start_column: int
    end_line: int
    end_column: int

    def __str__(self) -> str:
        return f"{self.start_line}:{self.start_column}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.span}: {self.message}"


class NetSyntaxError(ValueError):
    """Raised by :func:`parse_net`; ``errors`` holds every diagnostic found."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, sym, eof
    text: str
    span: SourceSpan


def tokenize(source: str) -> tuple[list[Token], list[ParseError]]:
    tokens: list[Token] = []
    errors: list[ParseError] = []
    line, col, pos = 1, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            span = SourceSpan(line, col, line, col + 1)
            errors.append(ParseError(span, f"unexpected character {source[pos]!r}"))
            pos += 1
            col += 1
            continue
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                if kind == "ident" and text in KEYWORDS:
                    kind = "keyword"
                tokens.append(Token(kind, text, SourceSpan(line, col, line, col + len(text))))
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(line, col, line, col)))
    return tokens, errors


class _Recover(Exception):
    pass


@dataclass
class _Scope:
    color_sets: dict[str, ColorSet] = field(default_factory=dict)
    variables: dict[str, Variable] = field(default_factory=dict)
    places: dict[str, Place] = field(default_factory=dict)
    transitions: dict[str, Transition] = field(default_factory=dict)
    initial: dict[str, Multiset] = field(default_factory=dict)
    spans: dict[str, SourceSpan] = field(default_factory=dict)


class Parser:
    def __init__(self, source: str):
        self.tokens, self.errors = tokenize(source)
        self.pos = 0
        self.scope = _Scope()
        self.name = "net"

    # -- token helpers -------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "keyword")

    def error(self, span: SourceSpan, message: str, expected: tuple[str, ...] = ()) -> None:
        self.errors.append(ParseError(span, message, expected))

    def fail(self, *expected: str) -> None:
        found = self.tok.text or "end of input"
        self.error(self.tok.span, f"expected {' or '.join(expected)}, found {found!r}", expected)
        raise _Recover

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.fail("identifier")
        return self.advance()

    def integer(self) -> tuple[int, Token]:
        if self.tok.kind != "int":
            self.fail("integer")
        t = self.advance()
        return int(t.text), t

    def sync(self, stop: frozenset[str]) -> None:
        """Skip to just past the next ``;`` or to a token in ``stop``."""
        while self.tok.kind != "eof":
            if self.tok.text in stop and self.tok.kind in ("sym", "keyword"):
                return
            if self.advance().text == ";":
                return

    # -- grammar -------------------------------------------------------
    def parse(self) -> None:
        first = True
        while self.tok.kind != "eof":
            try:
                if self.at("net"):
                    start = self.advance()
                    name = self.ident()
                    self.expect(";")
                    if not first:
                        self.error(start.span, "net name must be the first statement")
                    self.name = name.text
                elif self.at("colorset"):
                    self.colorset()
                elif self.at("var"):
                    self.vardecl()
                elif self.at("place"):
                    self.place()
                elif self.at("trans"):
                    self.trans()
                else:
                    self.fail("'colorset'", "'var'", "'place'", "'trans'")
            except _Recover:
                if self.at("}"):
                    self.advance()
                self.sync(STATEMENT_KEYWORDS)
            first = False

    def declare(self, table: dict, kind: str, tok: Token) -> bool:
        if tok.text in table:
            self.error(tok.span, f"{kind} {tok.text} already declared")
            return False
        self.scope.spans[f"{kind}:{tok.text}"] = tok.span
        return True

    def colorset(self) -> None:
        self.advance()
        name = self.ident()
        self.expect("=")
        self.expect("{")
        values = [self.ident()]
        while self.at(","):
            self.advance()
            values.append(self.ident())
        self.expect("}")
        self.expect(";")
        seen: set[str] = set()
        for v in values:
            if v.text in seen:
                self.error(v.span, f"value {v.text} repeated in color set {name.text}")
                return
            if v.text in self.scope.variables:
                self.error(v.span, f"value {v.text} is shadowed by variable {v.text}")
            seen.add(v.text)
        if self.declare(self.scope.color_sets, "color set", name):
            self.scope.color_sets[name.text] = ColorSet(name.text, tuple(v.text for v in values))

    def vardecl(self) -> None:
        self.advance()
        name = self.ident()
        self.expect(":")
        cs = self.ident()
        self.expect(";")
        if cs.text not in self.scope.color_sets:
            self.error(cs.span, f"unknown color set {cs.text}")
            return
        if any(name.text in c.values for c in self.scope.color_sets.values()):
            self.error(name.span, f"variable {name.text} shadows a color value")
            return
        if self.declare(self.scope.variables, "variable", name):
            self.scope.variables[name.text] = Variable(name.text, cs.text)

    def msexpr(self) -> list[tuple[int, Token, Token]]:
        terms = [self.term()]
        while self.at("++"):
            self.advance()
            terms.append(self.term())
        return terms

    def term(self) -> tuple[int, Token, Token]:
        n, ntok = self.integer()
        self.expect("`")
        return n, ntok, self.ident()

    def resolve(self, terms, cs: ColorSet, allow_vars: bool) -> list[Term] | None:
        out: list[Term] = []
        ok = True
        for n, ntok, sym in terms:
            if n < 1:
                self.error(ntok.span, "multiplicity must be positive")
                ok = False
                continue
            var = self.scope.variables.get(sym.text)
            if var is not None:
                if not allow_vars:
                    self.error(sym.span, f"variable {sym.text} not allowed in an initial marking")
                    ok = False
                elif var.color_set != cs.name:
                    self.error(sym.span, f"type mismatch: {sym.text} is {var.color_set}, place holds {cs.name}")
                    ok = False
                else:
                    out.append(Term(n, sym.text, True))
            elif sym.text in cs.values:
                out.append(Term(n, sym.text))
            else:
                self.error(sym.span, f"{sym.text} is neither a variable nor a value of {cs.name}")
                ok = False
        return out if ok else None

    def place(self) -> None:
        self.advance()
        name = self.ident()
        self.expect(":")
        cs_tok = self.ident()
        init = None
        capacity = None
        if self.at("init"):
            self.advance()
            init = self.msexpr()
        if self.at("capacity"):
            self.advance()
            capacity, cap_tok = self.integer()
            if capacity < 1:
                self.error(cap_tok.span, "capacity must be positive")
                capacity = None
        self.expect(";")
        cs = self.scope.color_sets.get(cs_tok.text)
        if cs is None:
            self.error(cs_tok.span, f"unknown color set {cs_tok.text}")
            return
        if not self.declare(self.scope.places, "place", name):
            return
        self.scope.places[name.text] = Place(name.text, cs.name, capacity)
        if init is not None:
            terms = self.resolve(init, cs, allow_vars=False)
            if terms is not None:
                ms = ArcInscription(tuple(terms)).evaluate({})
                if capacity is not None and ms.size > capacity:
                    self.error(name.span, f"initial marking of {name.text} exceeds capacity {capacity}")
                self.scope.initial[name.text] = ms

    def trans(self) -> None:
        self.advance()
        name = self.ident()
        self.expect("{")
        inputs: list = []
        outputs: list = []
        inhibitors: list = []
        used: dict[str, set[str]] = {"in": set(), "out": set(), "inhibit": set()}
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("'}'")
            try:
                self.arc(name.text, inputs, outputs, inhibitors, used)
            except _Recover:
                self.sync(frozenset({"}"}))
        self.advance()
        if self.declare(self.scope.transitions, "transition", name):
            self.scope.transitions[name.text] = Transition(
                name.text, tuple(inputs), tuple(outputs), tuple(inhibitors)
            )

    def arc(self, owner: str, inputs, outputs, inhibitors, used) -> None:
        kind = self.tok
        if not (self.at("in") or self.at("out") or self.at("inhibit")):
            self.fail("'in'", "'out'", "'inhibit'")
        self.advance()
        ptok = self.ident()
        if kind.text == "inhibit":
            threshold = 1
            if self.at(":"):
                self.advance()
                threshold, ttok = self.integer()
                if threshold < 1:
                    self.error(ttok.span, "inhibitor threshold must be positive")
                    threshold = 1
            self.expect(";")
        else:
            self.expect(":")
            terms = self.msexpr()
            self.expect(";")
        place = self.scope.places.get(ptok.text)
        if place is None:
            self.error(ptok.span, f"unknown place {ptok.text}")
            return
        if ptok.text in used[kind.text]:
            self.error(ptok.span, f"duplicate {kind.text} arc on {ptok.text} in {owner}")
            return
        if kind.text == "inhibit" and ptok.text in used["in"] or kind.text == "in" and ptok.text in used["inhibit"]:
            self.error(ptok.span, f"{ptok.text} is both input and inhibitor of {owner}")
            return
        used[kind.text].add(ptok.text)
        if kind.text == "inhibit":
            inhibitors.append((ptok.text, threshold))
            return
        resolved = self.resolve(terms, self.scope.color_sets[place.color_set], allow_vars=True)
        if resolved is not None:
            (inputs if kind.text == "in" else outputs).append((ptok.text, ArcInscription(tuple(resolved))))

    def build(self) -> Net:
        s = self.scope
        return Net(
            name=self.name,
            color_sets=tuple(s.color_sets.values()),
            variables=tuple(s.variables.values()),
            places=tuple(s.places.values()),
            transitions=tuple(s.transitions.values()),
            initial_marking=s.initial,
        )


def parse_net(source: str) -> Net:
    """Parse ``.cpn`` text into a validated :class:`Net`.

    Raises :class:`NetSyntaxError` with every lexical, syntactic and semantic
    error found; parsing resumes at the next ``;`` after an error.
    """
    parser = Parser(source)
    parser.parse()
    if parser.errors:
        raise NetSyntaxError(parser.errors)
    net = parser.build()
    # the parser's own checks should already cover these; anything left is
    # reported against the start of the file
    leftover = validate_net(net)
    if leftover:
        span = SourceSpan(1, 1, 1, 1)
        raise NetSyntaxError([ParseError(span, str(d)) for d in leftover])
    return net


def _check_ident(name: str) -> str:
    if not IDENT_RE.fullmatch(name) or name in KEYWORDS:
        raise ValueError(f"{name!r} cannot be written as an identifier")
    return name


def _ms_text(terms) -> str:
    return " ++ ".join(f"{n}`{_check_ident(s)}" for n, s in terms)


def serialize_net(net: Net) -> str:
    """Render ``net`` in the ``.cpn`` language.

    Statement order is color sets, variables, places, transitions; the
    output is LF-terminated and deterministic.
    """
    lines = [f"net {_check_ident(net.name)};"]
    if net.color_sets:
        lines.append("")
        for cs in net.color_sets:
            values = ", ".join(_check_ident(v) for v in cs.values)
            lines.append(f"colorset {_check_ident(cs.name)} = {{ {values} }};")
    if net.variables:
        lines.append("")
        for v in net.variables:
            lines.append(f"var {_check_ident(v.name)} : {_check_ident(v.color_set)};")
    init = dict(net.initial_marking)
    if net.places:
        lines.append("")
        for p in net.places:
            text = f"place {_check_ident(p.name)} : {_check_ident(p.color_set)}"
            ms = init.get(p.name)
            if ms:
                values = net.color_set_map[p.color_set].values if p.color_set in net.color_set_map else ()
                order = {v: i for i, v in enumerate(values)}
                items = sorted(ms.items(), key=lambda kv: order.get(kv[0], len(order)))
                text += " init " + _ms_text((n, v) for v, n in items)
            if p.capacity is not None:
                text += f" capacity {p.capacity}"
            lines.append(text + ";")
    for t in net.transitions:
        lines.append("")
        lines.append(f"trans {_check_ident(t.name)} {{")
        for kw, arcs in (("in", t.inputs), ("out", t.outputs)):
            for place, ins in arcs:
                lines.append(f"  {kw} {_check_ident(place)} : {_ms_text((x.multiplicity, x.symbol) for x in ins.terms)};")
        for place, k in t.inhibitors:
            suffix = "" if k == 1 else f" : {k}"
            lines.append(f"  inhibit {_check_ident(place)}{suffix};")
        lines.append("}")
    return "\n".join(lines) + "\n"
