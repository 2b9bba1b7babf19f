"""Turtle import and export for knowledge-base snapshots.

The supported subset covers what the store itself emits: prefixed names,
full IRIs, plain/typed literals, bare numeric and boolean tokens, the
``a`` keyword, and predicate (``;``) / object (``,``) lists. Blank nodes
and collections are rejected with a position-carrying parse error.

``dump_turtle`` is canonical: a fixed prefix header, then one statement
per line sorted by the (subject, predicate, object) canonical text, so
identical graphs always serialise to identical bytes.
"""

from __future__ import annotations

import re

from .errors import TurtleParseError
from .graph import Graph
from .schema import PREFIXES, RDF_TYPE
from .terms import (
    Iri, Literal, Term, Triple,
    XSD_BOOLEAN, XSD_DECIMAL, XSD_INTEGER, XSD_STRING,
)

_SAFE_LOCAL = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_-]*$")

_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\"}


class _Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind: str, value, line: int, col: int):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)

    def err(msg: str):
        raise TurtleParseError(msg, line, col)

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c == "<":
            j = text.find(">", i + 1)
            if j < 0:
                err("unterminated IRI")
            value = text[i + 1:j]
            tokens.append(_Token("iri", value, start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c == '"':
            j = i + 1
            out = []
            while True:
                if j >= n or text[j] == "\n":
                    err("unterminated string literal")
                ch = text[j]
                if ch == "\\":
                    if j + 1 >= n:
                        err("dangling escape")
                    esc = text[j + 1]
                    if esc == "u":
                        if j + 6 > n:
                            err("bad \\u escape")
                        out.append(chr(int(text[j + 2:j + 6], 16)))
                        j += 6
                        continue
                    if esc not in _ESCAPES:
                        err(f"unknown escape \\{esc}")
                    out.append(_ESCAPES[esc])
                    j += 2
                    continue
                if ch == '"':
                    break
                out.append(ch)
                j += 1
            tokens.append(_Token("string", "".join(out), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c in ".;,":
            # A dot may also start a decimal; statements never do here since
            # bare numerics always begin with a digit or sign.
            tokens.append(_Token(c, c, start_line, start_col))
            i += 1
            col += 1
            continue
        if c == "^":
            if text[i:i + 2] != "^^":
                err("expected ^^ before datatype")
            tokens.append(_Token("^^", "^^", start_line, start_col))
            i += 2
            col += 2
            continue
        if c in "[](){}":
            err(f"unsupported Turtle construct starting with {c!r}")
        m = re.match(r"[+-]?\d+(\.\d+)?", text[i:])
        if m:
            lex = m.group(0)
            kind = "decimal" if "." in lex else "integer"
            tokens.append(_Token(kind, lex, start_line, start_col))
            i += len(lex)
            col += len(lex)
            continue
        m = re.match(r"@?[A-Za-z_][\w-]*", text[i:])
        if m:
            word = m.group(0)
            if i + len(word) < n and text[i + len(word)] == ":":
                rest = re.match(r"[^\s,;.]*[^\s,;.]|", text[i + len(word) + 1:])
                local = rest.group(0) if rest else ""
                tokens.append(_Token("pname", (word, local), start_line, start_col))
                consumed = len(word) + 1 + len(local)
                i += consumed
                col += consumed
                continue
            tokens.append(_Token("word", word, start_line, start_col))
            i += len(word)
            col += len(word)
            continue
        if c == ":":
            err("prefixed name with empty prefix is not supported")
        err(f"unexpected character {c!r}")
    tokens.append(_Token("eof", None, line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.prefixes = dict(PREFIXES)

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, tok: _Token, msg: str):
        raise TurtleParseError(msg, tok.line, tok.col)

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            self.fail(tok, f"expected {kind!r}, found {tok.kind!r}")
        return tok

    def resolve(self, tok: _Token, prefix: str, local: str) -> Iri:
        if prefix not in self.prefixes:
            self.fail(tok, f"undeclared prefix {prefix!r}")
        return Iri(self.prefixes[prefix] + local)

    def parse(self) -> list[Triple]:
        triples: list[Triple] = []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return triples
            if tok.kind == "word" and tok.value in ("@prefix", "PREFIX"):
                self.parse_prefix()
                continue
            if tok.kind == "word" and tok.value == "@base":
                self.fail(tok, "@base is not supported")
            triples.extend(self.parse_statement())

    def parse_prefix(self):
        tok = self.next()  # @prefix / PREFIX
        name = self.next()
        if name.kind != "pname" or name.value[1] != "":
            self.fail(name, "expected prefix declaration like ex:")
        iri = self.expect("iri")
        self.prefixes[name.value[0]] = iri.value
        if tok.value == "@prefix":
            self.expect(".")
        elif self.peek().kind == ".":
            self.next()

    def parse_term(self, *, as_subject: bool = False) -> Term:
        tok = self.next()
        if tok.kind == "iri":
            return Iri(tok.value)
        if tok.kind == "pname":
            return self.resolve(tok, *tok.value)
        if tok.kind == "word" and tok.value == "a":
            return RDF_TYPE
        if as_subject:
            self.fail(tok, f"expected IRI, found {tok.kind!r}")
        if tok.kind == "string":
            if self.peek().kind == "^^":
                self.next()
                dt_tok = self.next()
                if dt_tok.kind == "iri":
                    dtype = dt_tok.value
                elif dt_tok.kind == "pname":
                    dtype = self.resolve(dt_tok, *dt_tok.value).text
                else:
                    self.fail(dt_tok, "expected datatype IRI after ^^")
                try:
                    return Literal(tok.value, dtype)
                except ValueError as exc:
                    self.fail(tok, str(exc))
            return Literal(tok.value, XSD_STRING)
        if tok.kind == "integer":
            return Literal(tok.value, XSD_INTEGER)
        if tok.kind == "decimal":
            return Literal(tok.value, XSD_DECIMAL)
        if tok.kind == "word" and tok.value in ("true", "false"):
            return Literal(tok.value, XSD_BOOLEAN)
        self.fail(tok, f"expected term, found {tok.kind!r}")

    def parse_statement(self) -> list[Triple]:
        subject = self.parse_term(as_subject=True)
        triples: list[Triple] = []
        while True:
            predicate = self.parse_term(as_subject=True)
            while True:
                obj = self.parse_term()
                triples.append(Triple(subject, predicate, obj))
                if self.peek().kind == ",":
                    self.next()
                    continue
                break
            tok = self.next()
            if tok.kind == ";":
                if self.peek().kind == ".":  # tolerate trailing ; before .
                    self.next()
                    return triples
                continue
            if tok.kind == ".":
                return triples
            self.fail(tok, f"expected '.', ';' or ',', found {tok.kind!r}")


def parse_turtle(text: str) -> list[Triple]:
    """Parse Turtle text into triples. Raises :class:`TurtleParseError`."""
    return _Parser(text).parse()


def load_turtle(text: str, graph: Graph | None = None) -> Graph:
    """Parse Turtle text into a graph (a bare one unless given)."""
    g = graph if graph is not None else Graph()
    g.insert_all(parse_turtle(text))
    return g


def _render_iri(iri: Iri) -> str:
    for prefix, ns in PREFIXES.items():
        if iri.text.startswith(ns):
            local = iri.text[len(ns):]
            if _SAFE_LOCAL.match(local):
                return f"{prefix}:{local}"
    return f"<{iri.text}>"


def _render_literal(lit: Literal) -> str:
    escaped = (
        lit.text.replace("\\", "\\\\").replace('"', '\\"')
        .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
    )
    quoted = f'"{escaped}"'
    if lit.datatype == XSD_STRING:
        return quoted
    return f"{quoted}^^{_render_iri(Iri(lit.datatype))}"


def render_term(term: Term) -> str:
    return _render_iri(term) if isinstance(term, Iri) else _render_literal(term)


def dump_turtle(graph: Graph) -> str:
    """Serialise a graph to canonical Turtle text."""
    lines = [f"@prefix {prefix}: <{ns}> ." for prefix, ns in sorted(PREFIXES.items())]
    lines.append("")
    for t in sorted(graph.triples(), key=Triple.sort_key):
        lines.append(f"{render_term(t.subject)} {render_term(t.predicate)} {render_term(t.object)} .")
    return "\n".join(lines) + "\n"
