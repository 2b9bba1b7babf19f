"""Query and update engine for the knowledge base.

Supported grammar, which is exactly what the runtime facade and the HTTP
service need:

- ``PREFIX`` declarations
- ``SELECT [DISTINCT] ?v ... | * WHERE { patterns FILTER(...) ... }``
- ``INSERT DATA { triples }``
- ``DELETE { templates } INSERT { templates } WHERE { patterns }``
  (either the DELETE or the INSERT part may be omitted)

Filters are single comparisons (``= != < <= > >=``) between a variable
and a literal or between two variables. Anything else in the SPARQL
universe (OPTIONAL, UNION, GROUP BY, ORDER BY, property paths, ...) is
rejected with :class:`UnsupportedFeatureError` so callers can tell
"outside the subset" apart from a typo.

Evaluation is a straightforward left-to-right index-backed join; results
are deterministic (sorted by canonical binding text). Updates are atomic:
every instantiated triple is computed and validated before the graph is
touched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import AbstractSet, Iterable

from .errors import (
    ProtectedTripleError,
    QuerySyntaxError,
    UnboundTemplateVariableError,
    UnsupportedFeatureError,
)
from .graph import Graph
from .schema import PREFIXES, RDF_TYPE
from .terms import (
    Iri, Literal, Term, Triple, canonical_text,
    XSD_BOOLEAN, XSD_DECIMAL, XSD_INTEGER, XSD_STRING,
)

_UNSUPPORTED = {
    "OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "BIND", "VALUES",
    "ASK", "CONSTRUCT", "DESCRIBE", "LIMIT", "OFFSET", "HAVING", "EXISTS",
    "NOT", "REDUCED", "FROM", "NAMED", "WITH", "USING", "LOAD", "CLEAR",
    "DROP", "CREATE", "COPY", "MOVE", "ADD",
}
_UNSUPPORTED_PRETTY = {"GROUP": "GROUP BY", "ORDER": "ORDER BY"}

_COMPARISONS = ("<=", ">=", "!=", "=", "<", ">")


@dataclass(frozen=True)
class Variable:
    name: str  # without the leading '?'


PatternTerm = Variable | Iri | Literal
TriplePattern = tuple[PatternTerm, PatternTerm, PatternTerm]
Binding = dict[str, Term]


@dataclass(frozen=True)
class FilterExpr:
    left: PatternTerm
    op: str
    right: PatternTerm


@dataclass
class SelectQuery:
    variables: list[str]
    distinct: bool
    where: list[TriplePattern]
    filters: list[FilterExpr]
    star: bool = False


@dataclass
class InsertDataQuery:
    triples: list[Triple]


@dataclass
class UpdateQuery:
    delete_patterns: list[TriplePattern]
    insert_templates: list[TriplePattern]
    where: list[TriplePattern]
    filters: list[FilterExpr]


Query = SelectQuery | InsertDataQuery | UpdateQuery


@dataclass
class UpdateStats:
    inserted: int
    deleted: int


# ---------------------------------------------------------------------------
# Tokenizer


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

    def err(msg: str, expected: str = ""):
        raise QuerySyntaxError(msg, line, col, expected)

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

        def emit(kind: str, value, width: int):
            nonlocal i, col
            tokens.append(_Token(kind, value, start_line, start_col))
            i += width
            col += width

        two = text[i:i + 2]
        if two in ("<=", ">=", "!="):
            emit("op", two, 2)
            continue
        if c == "<":
            # '<' opens an IRI only if a '>' closes it before any whitespace;
            # otherwise it is the less-than operator.
            j = i + 1
            while j < n and not text[j].isspace() and text[j] != ">":
                j += 1
            if j < n and text[j] == ">":
                emit("iri", text[i + 1:j], j + 1 - i)
            else:
                emit("op", "<", 1)
            continue
        if c in "=>":
            emit("op", c, 1)
            continue
        if c == "?":
            m = re.match(r"\?([A-Za-z_][\w]*)", text[i:])
            if not m:
                err("expected variable name after '?'")
            emit("var", m.group(1), m.end())
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
                    mapped = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\"}.get(esc)
                    if mapped is None:
                        err(f"unknown escape \\{esc}")
                    out.append(mapped)
                    j += 2
                    continue
                if ch == '"':
                    break
                out.append(ch)
                j += 1
            emit("string", "".join(out), j + 1 - i)
            continue
        if c in "{}().;,*":
            emit(c, c, 1)
            continue
        if c == "^":
            if two != "^^":
                err("expected ^^ before datatype")
            emit("^^", "^^", 2)
            continue
        m = re.match(r"[+-]?\d+(\.\d+)?", text[i:])
        if m:
            lex = m.group(0)
            emit("decimal" if "." in lex else "integer", lex, len(lex))
            continue
        m = re.match(r"[A-Za-z_][\w-]*", text[i:])
        if m:
            word = m.group(0)
            after = i + len(word)
            if after < n and text[after] == ":":
                rest = re.match(r"[^\s,;.(){}]*[^\s,;.(){}]|", text[after + 1:])
                local = rest.group(0) if rest else ""
                emit("pname", (word, local), len(word) + 1 + len(local))
            else:
                emit("word", word, len(word))
            continue
        err(f"unexpected character {c!r}")
    tokens.append(_Token("eof", None, line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser


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

    def fail(self, tok: _Token, msg: str, expected: str = ""):
        raise QuerySyntaxError(msg, tok.line, tok.col, expected)

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            self.fail(tok, f"found {tok.kind!r}", expected=kind)
        return tok

    def keyword(self, tok: _Token) -> str | None:
        return tok.value.upper() if tok.kind == "word" else None

    def check_unsupported(self, tok: _Token):
        kw = self.keyword(tok)
        if kw in _UNSUPPORTED or kw in _UNSUPPORTED_PRETTY:
            raise UnsupportedFeatureError(_UNSUPPORTED_PRETTY.get(kw, kw))

    def parse(self) -> Query:
        while True:
            tok = self.peek()
            if self.keyword(tok) == "PREFIX":
                self.next()
                name = self.next()
                if name.kind != "pname" or name.value[1] != "":
                    self.fail(name, "bad prefix declaration", expected="prefix:")
                iri = self.expect("iri")
                self.prefixes[name.value[0]] = iri.value
                continue
            break
        tok = self.peek()
        kw = self.keyword(tok)
        if kw == "SELECT":
            query = self.parse_select()
        elif kw == "INSERT":
            self.next()
            if self.keyword(self.peek()) == "DATA":
                self.next()
                query = self.parse_insert_data()
            else:
                query = self.parse_update(delete_first=False)
        elif kw == "DELETE":
            self.next()
            if self.keyword(self.peek()) == "DATA":
                self.fail(self.peek(), "DELETE DATA is not supported; use DELETE ... WHERE")
            query = self.parse_update(delete_first=True)
        else:
            self.check_unsupported(tok)
            self.fail(tok, f"found {tok.kind!r} {tok.value!r}",
                      expected="SELECT, INSERT or DELETE")
        tail = self.peek()
        if tail.kind != "eof":
            self.check_unsupported(tail)
            self.fail(tail, f"trailing input {tail.value!r}", expected="end of query")
        return query

    def parse_select(self) -> SelectQuery:
        self.next()  # SELECT
        distinct = False
        if self.keyword(self.peek()) == "DISTINCT":
            distinct = True
            self.next()
        variables: list[str] = []
        star = False
        if self.peek().kind == "*":
            self.next()
            star = True
        else:
            while self.peek().kind == "var":
                variables.append(self.next().value)
            if not variables:
                self.check_unsupported(self.peek())
                self.fail(self.peek(), "no selected variables", expected="?var or *")
        if self.keyword(self.peek()) != "WHERE":
            self.check_unsupported(self.peek())
            self.fail(self.peek(), f"found {self.peek().value!r}", expected="WHERE")
        self.next()
        where, filters = self.parse_group()
        where_vars = _pattern_variables(where)
        if star:
            variables = list(where_vars)
        else:
            for name in variables:
                if name not in where_vars:
                    tok = self.tokens[0]
                    raise QuerySyntaxError(
                        f"selected variable ?{name} does not appear in WHERE",
                        tok.line, tok.col)
        return SelectQuery(variables=variables, distinct=distinct,
                           where=where, filters=filters, star=star)

    def parse_insert_data(self) -> InsertDataQuery:
        patterns = self.parse_triple_block(allow_filters=False)
        triples = []
        for s, p, o in patterns:
            if isinstance(s, Variable) or isinstance(p, Variable) or isinstance(o, Variable):
                tok = self.tokens[0]
                raise QuerySyntaxError("INSERT DATA does not allow variables",
                                       tok.line, tok.col)
            triples.append(Triple(s, p, o))
        return InsertDataQuery(triples=triples)

    def parse_update(self, *, delete_first: bool) -> UpdateQuery:
        deletes: list[TriplePattern] = []
        inserts: list[TriplePattern] = []
        if delete_first:
            deletes = self.parse_triple_block(allow_filters=False)
            if self.keyword(self.peek()) == "INSERT":
                self.next()
                inserts = self.parse_triple_block(allow_filters=False)
        else:
            inserts = self.parse_triple_block(allow_filters=False)
        if self.keyword(self.peek()) != "WHERE":
            self.check_unsupported(self.peek())
            self.fail(self.peek(), f"found {self.peek().value!r}", expected="WHERE")
        self.next()
        where, filters = self.parse_group()
        where_vars = _pattern_variables(where)
        for tmpl in (deletes, inserts):
            for pattern in tmpl:
                for term in pattern:
                    if isinstance(term, Variable) and term.name not in where_vars:
                        raise UnboundTemplateVariableError(term.name)
        return UpdateQuery(delete_patterns=deletes, insert_templates=inserts,
                           where=where, filters=filters)

    def parse_group(self) -> tuple[list[TriplePattern], list[FilterExpr]]:
        patterns, filters = self._parse_block(allow_filters=True)
        return patterns, filters

    def parse_triple_block(self, *, allow_filters: bool) -> list[TriplePattern]:
        patterns, _ = self._parse_block(allow_filters=allow_filters)
        return patterns

    def _parse_block(self, *, allow_filters: bool):
        self.expect("{")
        patterns: list[TriplePattern] = []
        filters: list[FilterExpr] = []
        while True:
            tok = self.peek()
            if tok.kind == "}":
                self.next()
                return patterns, filters
            if tok.kind == "eof":
                self.fail(tok, "unterminated block", expected="}")
            kw = self.keyword(tok)
            if kw == "FILTER":
                if not allow_filters:
                    self.fail(tok, "FILTER is not allowed in a template block")
                self.next()
                filters.append(self.parse_filter())
                continue
            if kw and kw != "A":
                self.check_unsupported(tok)
            patterns.extend(self.parse_pattern_statement())

    def parse_pattern_statement(self) -> list[TriplePattern]:
        subject = self.parse_pattern_term(position="subject")
        out: list[TriplePattern] = []
        while True:
            predicate = self.parse_pattern_term(position="predicate")
            while True:
                obj = self.parse_pattern_term(position="object")
                out.append((subject, predicate, obj))
                if self.peek().kind == ",":
                    self.next()
                    continue
                break
            tok = self.peek()
            if tok.kind == ";":
                self.next()
                if self.peek().kind in (".", "}"):
                    if self.peek().kind == ".":
                        self.next()
                    return out
                continue
            if tok.kind == ".":
                self.next()
                return out
            if tok.kind == "}":
                return out
            self.check_unsupported(tok)
            self.fail(tok, f"found {tok.kind!r}", expected="'.', ';', ',' or '}'")

    def parse_pattern_term(self, *, position: str) -> PatternTerm:
        tok = self.next()
        if tok.kind == "var":
            return Variable(tok.value)
        if tok.kind == "iri":
            return Iri(tok.value)
        if tok.kind == "pname":
            prefix, local = tok.value
            if prefix not in self.prefixes:
                self.fail(tok, f"undeclared prefix {prefix!r}")
            return Iri(self.prefixes[prefix] + local)
        if tok.kind == "word" and tok.value == "a" and position == "predicate":
            return RDF_TYPE
        if position in ("subject", "predicate"):
            self.check_unsupported(tok)
            self.fail(tok, f"found {tok.kind!r}", expected=f"IRI or variable as {position}")
        if tok.kind == "string":
            if self.peek().kind == "^^":
                self.next()
                dt = self.next()
                if dt.kind == "iri":
                    dtype = dt.value
                elif dt.kind == "pname":
                    prefix, local = dt.value
                    if prefix not in self.prefixes:
                        self.fail(dt, f"undeclared prefix {prefix!r}")
                    dtype = self.prefixes[prefix] + local
                else:
                    self.fail(dt, "expected datatype IRI after ^^")
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
        self.check_unsupported(tok)
        self.fail(tok, f"found {tok.kind!r}", expected="term")

    def parse_filter(self) -> FilterExpr:
        self.expect("(")
        left = self.parse_filter_operand()
        op_tok = self.next()
        if op_tok.kind != "op" or op_tok.value not in _COMPARISONS:
            self.fail(op_tok, f"found {op_tok.value!r}", expected="comparison operator")
        right = self.parse_filter_operand()
        self.expect(")")
        if not (isinstance(left, Variable) or isinstance(right, Variable)):
            tok = self.tokens[0]
            raise QuerySyntaxError("filter must involve at least one variable",
                                   tok.line, tok.col)
        return FilterExpr(left=left, op=op_tok.value, right=right)

    def parse_filter_operand(self) -> PatternTerm:
        tok = self.peek()
        if tok.kind in ("iri", "pname"):
            self.fail(tok, "IRI operands are not supported in FILTER")
        term = self.parse_pattern_term(position="object")
        return term


def _pattern_variables(patterns: Iterable[TriplePattern]) -> dict[str, None]:
    """Ordered set of variable names appearing in the patterns."""
    ordered: dict[str, None] = {}
    for pattern in patterns:
        for term in pattern:
            if isinstance(term, Variable):
                ordered.setdefault(term.name)
    return ordered


def parse_query(text: str) -> Query:
    """Parse query text; see module docstring for the supported grammar."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation


def _bind(term: PatternTerm, binding: Binding) -> Term | None:
    """Concrete term, bound value, or None when still free."""
    if isinstance(term, Variable):
        return binding.get(term.name)
    return term


def eval_bgp(graph: Graph, patterns: list[TriplePattern],
             filters: list[FilterExpr] | None = None) -> list[Binding]:
    """Join the patterns left to right, then apply every filter."""
    solutions: list[Binding] = [{}]
    for s_pat, p_pat, o_pat in patterns:
        extended: list[Binding] = []
        for binding in solutions:
            s = _bind(s_pat, binding)
            p = _bind(p_pat, binding)
            o = _bind(o_pat, binding)
            if isinstance(s, Literal) or isinstance(p, Literal):
                continue  # a variable bound to a literal can never be a subject/predicate
            for triple in graph.match(s, p, o):
                new = dict(binding)
                ok = True
                for pat_term, value in ((s_pat, triple.subject),
                                        (p_pat, triple.predicate),
                                        (o_pat, triple.object)):
                    if isinstance(pat_term, Variable):
                        existing = new.get(pat_term.name)
                        if existing is None:
                            new[pat_term.name] = value
                        elif existing != value:
                            ok = False
                            break
                if ok:
                    extended.append(new)
        solutions = extended
        if not solutions:
            break
    if filters:
        solutions = [b for b in solutions if all(_filter_holds(f, b) for f in filters)]
    return solutions


def _filter_holds(f: FilterExpr, binding: Binding) -> bool:
    left = _bind(f.left, binding)
    right = _bind(f.right, binding)
    if left is None or right is None:
        return False
    return _compare(left, f.op, right)


def _compare(a: Term, op: str, b: Term) -> bool:
    """Permissive comparison: incompatible operands never match."""
    if isinstance(a, Literal) and isinstance(b, Literal):
        if a.is_numeric and b.is_numeric:
            x, y = a.numeric_value(), b.numeric_value()
        elif a.datatype == b.datatype:
            x, y = a.text, b.text
        else:
            return False
    elif isinstance(a, Iri) and isinstance(b, Iri):
        if op not in ("=", "!="):
            return False
        x, y = a.text, b.text
    else:
        return False
    if op == "=":
        return x == y
    if op == "!=":
        return x != y
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    return x >= y


def eval_select(graph: Graph, query: SelectQuery) -> list[Binding]:
    """Solutions projected onto the selected variables, sorted, deduplicated
    when DISTINCT."""
    solutions = eval_bgp(graph, query.where, query.filters)
    rows = [{name: b[name] for name in query.variables} for b in solutions]
    keyed = sorted(
        rows, key=lambda r: tuple(canonical_text(r[name]) for name in query.variables))
    if not query.distinct:
        return keyed
    seen = set()
    out = []
    for row in keyed:
        key = tuple(canonical_text(row[name]) for name in query.variables)
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def _instantiate(pattern: TriplePattern, binding: Binding) -> Triple:
    terms = []
    for term in pattern:
        if isinstance(term, Variable):
            value = binding.get(term.name)
            if value is None:
                raise UnboundTemplateVariableError(term.name)
            terms.append(value)
        else:
            terms.append(term)
    return Triple(*terms)


def eval_update(graph: Graph, query: InsertDataQuery | UpdateQuery,
                protected: AbstractSet[Triple] = frozenset()) -> UpdateStats:
    """Apply an update atomically and report actual graph changes.

    ``protected`` triples may never be deleted; when an instantiated delete
    pattern hits one, :class:`ProtectedTripleError` is raised and the graph
    is left untouched.
    """
    if isinstance(query, InsertDataQuery):
        inserted = graph.insert_all(query.triples)
        return UpdateStats(inserted=inserted, deleted=0)

    solutions = eval_bgp(graph, query.where, query.filters)
    delete_set: set[Triple] = set()
    insert_set: set[Triple] = set()
    for binding in solutions:
        for pattern in query.delete_patterns:
            delete_set.add(_instantiate(pattern, binding))
        for pattern in query.insert_templates:
            insert_set.add(_instantiate(pattern, binding))
    for t in delete_set:
        if t in protected and t in graph:
            raise ProtectedTripleError(f"update would delete a schema triple: {t}")
    deleted = 0
    for t in delete_set:
        deleted += graph.remove(t.subject, t.predicate, t.object)
    inserted = graph.insert_all(insert_set)
    return UpdateStats(inserted=inserted, deleted=deleted)
