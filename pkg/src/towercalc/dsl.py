"""Parser for the tower-expression DSL.

Grammar sketch (full EBNF in docs/grammar.ebnf):

    expr      = term { "*" term } ;
    term      = "1" | "Z" | "F" "(" int ")" | surface | atom | etage | "(" expr ")" ;
    surface   = ("S" | "N") "(" int [ "," int ] ")" ;
    atom      = name "{" [ clause { "," clause } ] "}" ;
    clause    = "one_ended" | "prototype" | "b1" int | "elt" name
              | ("square" | "commutator" | "no_cyclic_splitting") name ;
    etage     = "etage" "{" "surface" ":" surface ";"
                "bottoms" ":" "[" expr { "," expr } "]" ";"
                "glue" ":" "[" glue { "," glue } "]"
                [ ";" "rho" ":" "[" assign { "," assign } "]" ] [";"] "}" ;
    parachute = "parachute" "{" "surface" ":" surface ";"
                "indices" ":" "[" int { "," int } "]" [";"] "}" ;
    glue      = "(" int "->" target ")" ;
    target    = name "." name [ "^" int ]            (* element power *)
              | "B" int [ "[" int "]" ] ":" word ;   (* explicit word *)
    assign    = name "->" word ;

Parse errors carry line/column and the expected tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .splittings import (CenteredSplitting, ClosedSurfaceGroup, Edge, FreeGroup,
                         GroupExpr, PowerGluing, PrototypeAtom, SurfaceEtage,
                         Trivial, WordGluing, atoms_of, bottom_generator_names,
                         expr_factors, free_product, make_facts, make_parachute,
                         _is_z_bottom)
from .surfaces import Surface
from .words import Word, parse_word

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<arrow>->)
  | (?P<pow>\^-?\d+)
  | (?P<sym>[{}()\[\],;:.*])
""", re.VERBOSE)

FACT_CLAUSES = {"square", "commutator", "no_cyclic_splitting"}
RESERVED = {"etage", "parachute", "F", "S", "N", "Z", "surface", "bottoms",
            "glue", "rho", "indices"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


class ParseError(ValueError):
    def __init__(self, message: str, token: Token | None, expected: list[str] | None = None):
        where = f" at line {token.line}, column {token.column}" if token else " at end of input"
        hint = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(message + where + hint)
        self.token = token
        self.expected = expected or []


def _tokenize(text: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             Token("error", text[pos], line, col))
        kind = m.lastgroup or "error"
        value = m.group()
        if kind != "ws":
            tokens.append(Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


class Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def take(self, expected: str | None = None) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", None,
                             [expected] if expected else None)
        if expected is not None and tok.text != expected:
            raise ParseError(f"unexpected token {tok.text!r}", tok, [expected])
        self.pos += 1
        return tok

    def take_int(self) -> int:
        tok = self.take()
        if tok.kind != "int":
            raise ParseError(f"expected an integer, got {tok.text!r}", tok, ["<int>"])
        return int(tok.text)

    def take_name(self) -> str:
        tok = self.take()
        if tok.kind != "name":
            raise ParseError(f"expected a name, got {tok.text!r}", tok, ["<name>"])
        return tok.text

    # -- words ------------------------------------------------------------

    def collect_word_text(self, stop: set[str]) -> str:
        parts = []
        depth = 0
        while True:
            tok = self.peek()
            if tok is None:
                break
            if depth == 0 and tok.text in stop:
                break
            if tok.text in "([":
                depth += 1
            if tok.text in ")]":
                if depth == 0:
                    break
                depth -= 1
            parts.append(self.take().text)
        return " ".join(parts)

    # -- surfaces and expressions -----------------------------------------

    def parse_surface(self) -> Surface:
        tok = self.take()
        if tok.text not in ("S", "N"):
            raise ParseError(f"expected a surface literal, got {tok.text!r}",
                             tok, ["S(g[,b])", "N(g[,b])"])
        self.take("(")
        genus = self.take_int()
        boundary = 0
        if self.at(","):
            self.take(",")
            boundary = self.take_int()
        self.take(")")
        return Surface(genus, boundary, orientable=(tok.text == "S"))

    def parse_expr(self) -> GroupExpr:
        factors = [self.parse_term()]
        while self.at("*"):
            self.take("*")
            factors.append(self.parse_term())
        return free_product(*factors) if len(factors) > 1 else factors[0]

    def parse_term(self) -> GroupExpr:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", None, ["<expression>"])
        if tok.text == "(":
            self.take("(")
            e = self.parse_expr()
            self.take(")")
            return e
        if tok.text == "1":
            self.take()
            return Trivial()
        if tok.text == "Z":
            self.take()
            return FreeGroup(1)
        if tok.text == "F":
            self.take()
            self.take("(")
            rank = self.take_int()
            self.take(")")
            return FreeGroup(rank)
        if tok.text in ("S", "N"):
            return ClosedSurfaceGroup(self.parse_surface())
        if tok.text == "etage":
            res = self.parse_etage()
            if isinstance(res, tuple):
                raise ParseError("a rho clause is only allowed at top level",
                                 self.tokens[self.pos - 1])
            return SurfaceEtage(res, None)
        if tok.text == "parachute":
            return SurfaceEtage(self.parse_parachute(), None)
        if tok.kind == "name":
            return self.parse_atom()
        raise ParseError(f"unexpected token {tok.text!r}", tok,
                         ["F(n)", "S(..)", "N(..)", "Z", "1", "etage", "<atom>"])

    def parse_atom(self) -> PrototypeAtom:
        name = self.take_name()
        if name in RESERVED:
            raise ParseError(f"{name!r} is reserved", self.tokens[self.pos - 1])
        self.take("{")
        one_ended = False
        b1 = None
        elements: list[str] = []
        facts: list[tuple[str, str]] = []
        while not self.at("}"):
            clause = self.take_name()
            if clause == "one_ended":
                one_ended = True
            elif clause == "prototype":
                facts.append(("prototype", ""))
            elif clause == "b1":
                b1 = self.take_int()
            elif clause == "elt":
                elements.append(self.take_name())
            elif clause in FACT_CLAUSES:
                facts.append((clause, self.take_name()))
            else:
                raise ParseError(f"unknown fact clause {clause!r}",
                                 self.tokens[self.pos - 1],
                                 sorted(FACT_CLAUSES | {"one_ended", "prototype",
                                                        "b1", "elt"}))
            if self.at(","):
                self.take(",")
        self.take("}")
        return PrototypeAtom(name, make_facts(one_ended=one_ended, b1_mod2=b1,
                                              elements=elements, facts=facts))

    # -- splittings ---------------------------------------------------------

    def parse_parachute(self) -> CenteredSplitting:
        self.take("parachute")
        self.take("{")
        self.take("surface")
        self.take(":")
        surface = self.parse_surface()
        self.take(";")
        self.take("indices")
        self.take(":")
        self.take("[")
        indices = [self.take_int()]
        while self.at(","):
            self.take(",")
            indices.append(self.take_int())
        self.take("]")
        if self.at(";"):
            self.take(";")
        self.take("}")
        return make_parachute(surface, indices)

    def parse_etage(self) -> CenteredSplitting:
        self.take("etage")
        self.take("{")
        self.take("surface")
        self.take(":")
        surface = self.parse_surface()
        self.take(";")
        self.take("bottoms")
        self.take(":")
        self.take("[")
        bottoms = [self.parse_expr()]
        while self.at(","):
            self.take(",")
            bottoms.append(self.parse_expr())
        self.take("]")
        self.take(";")
        self.take("glue")
        self.take(":")
        self.take("[")
        edges = [self.parse_glue(bottoms)]
        while self.at(","):
            self.take(",")
            edges.append(self.parse_glue(bottoms))
        self.take("]")
        rho = None
        if self.at(";") and self.pos + 1 < len(self.tokens) \
                and self.tokens[self.pos + 1].text == "rho":
            self.take(";")
            self.take("rho")
            self.take(":")
            self.take("[")
            rho = [self.parse_assign()]
            while self.at(","):
                self.take(",")
                rho.append(self.parse_assign())
            self.take("]")
        if self.at(";"):
            self.take(";")
        self.take("}")
        c = CenteredSplitting(surface, tuple(bottoms), tuple(edges))
        if rho is not None:
            c = (c, dict(rho))  # type: ignore[assignment]
        return c

    def parse_assign(self) -> tuple[str, str]:
        name = self.take_name()
        self.take("->")
        text = self.collect_word_text({",", "]"})
        return name, text

    def parse_glue(self, bottoms: list[GroupExpr]) -> Edge:
        self.take("(")
        boundary = self.take_int() - 1
        self.take("->")
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of glue target", None)
        edge: Edge
        if tok.kind == "name" and re.fullmatch(r"B\d+", tok.text) and \
                self.tokens[self.pos + 1].text in (":", "["):
            name = self.take_name()
            bottom = int(name[1:]) - 1
            factor = 0
            if self.at("["):
                self.take("[")
                factor = self.take_int()
                self.take("]")
            self.take(":")
            text = self.collect_word_text({")"})
            edge = self._word_edge(bottoms, boundary, bottom, factor, text)
        else:
            head = self.take_name()
            self.take(".")
            element = self.take_name()
            power = 1
            nxt = self.peek()
            if nxt is not None and nxt.kind == "pow":
                power = int(self.take().text[1:])
            if re.fullmatch(r"B\d+", head):
                bottom = int(head[1:]) - 1
            else:
                bottom = self._bottom_of_atom(bottoms, head)
            edge = Edge(boundary, bottom, PowerGluing(element, power))
        self.take(")")
        return edge

    def _bottom_of_atom(self, bottoms: list[GroupExpr], name: str) -> int:
        for j, b in enumerate(bottoms):
            if any(a.name == name for a in atoms_of(b)):
                return j
        raise ParseError(f"no bottom contains an atom named {name!r}",
                         self.tokens[self.pos - 1] if self.pos else None)

    def _word_edge(self, bottoms: list[GroupExpr], boundary: int, bottom: int,
                   factor: int, text: str) -> Edge:
        if not 0 <= bottom < len(bottoms):
            raise ParseError(f"bottom B{bottom + 1} out of range",
                             self.tokens[self.pos - 1] if self.pos else None)
        target = expr_factors(bottoms[bottom])[factor]
        names = bottom_generator_names(target)
        if names is None:
            raise ParseError("explicit gluing words need a free or surface bottom",
                             self.tokens[self.pos - 1] if self.pos else None)
        w = parse_word(text, names)
        return Edge(boundary, bottom, WordGluing(w, factor))


ParseResult = "GroupExpr | CenteredSplitting | tuple[CenteredSplitting, dict[str, str]]"


def parse_expr(text: str):
    """Parse a DSL document: a group expression, a centered splitting, or a
    (splitting, rho-assignments) pair for `discriminate`.

    A bare `etage {...}` or `parachute {...}` document denotes the splitting
    itself; inside a larger expression such blocks denote uncertified etage
    nodes (certify them with towers.certify before classification)."""
    parser = Parser(text)
    tok = parser.peek()
    if tok is None:
        raise ParseError("empty input", None)
    if tok.text in ("etage", "parachute"):
        result = parser.parse_etage() if tok.text == "etage" else parser.parse_parachute()
        if parser.peek() is not None and parser.at("*"):
            parser.pos = 0
            result = parser.parse_expr()
    else:
        result = parser.parse_expr()
    trailing = parser.peek()
    if trailing is not None:
        raise ParseError(f"trailing input {trailing.text!r}", trailing)
    return result
