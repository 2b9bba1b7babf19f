"""Independent reference implementations used to cross-check the engine.

Nothing here may call into the indexed store or the query evaluator: the
oracle matcher is a straight list scan and the oracle query evaluator is
a recursive nested-loop join, both written directly from the documented
semantics.
"""

from __future__ import annotations

import random
from decimal import Decimal

from ontoplant.schema import RDF_TYPE, RDFS_SUBCLASS_OF
from ontoplant.sparql import FilterExpr, SelectQuery, Variable
from ontoplant.terms import (
    Iri, Literal, Term, Triple, canonical_text,
    XSD_DECIMAL, XSD_INTEGER, XSD_STRING,
)


def scan_subclasses(triples: list[Triple], cls: Iri) -> set[Iri]:
    closure = {cls}
    changed = True
    while changed:
        changed = False
        for t in triples:
            if t.predicate == RDFS_SUBCLASS_OF and t.object in closure:
                if t.subject not in closure:
                    closure.add(t.subject)
                    changed = True
    return closure


def scan_match(triples: list[Triple], s: Iri | None, p: Iri | None,
               o: Term | None, infer_types: bool = True) -> list[Triple]:
    """Full-scan pattern match with the documented subclass-type rule."""
    found = set()
    for t in triples:
        if (s is None or t.subject == s) and (p is None or t.predicate == p) \
                and (o is None or t.object == o):
            found.add(t)
    if infer_types and p == RDF_TYPE and isinstance(o, Iri):
        for sub in scan_subclasses(triples, o):
            if sub == o:
                continue
            for t in triples:
                if t.predicate == RDF_TYPE and t.object == sub:
                    if s is None or t.subject == s:
                        found.add(Triple(t.subject, RDF_TYPE, o))
    return sorted(found, key=Triple.sort_key)


def _oracle_compare(a: Term, op: str, b: Term) -> bool:
    numeric = (XSD_INTEGER, XSD_DECIMAL)
    if isinstance(a, Literal) and isinstance(b, Literal) \
            and a.datatype in numeric and b.datatype in numeric:
        left, right = Decimal(a.text), Decimal(b.text)
    elif isinstance(a, Literal) and isinstance(b, Literal) and a.datatype == b.datatype:
        left, right = a.text, b.text
    elif isinstance(a, Iri) and isinstance(b, Iri) and op in ("=", "!="):
        left, right = a.text, b.text
    else:
        return False
    return {
        "=": left == right, "!=": left != right,
        "<": left < right, "<=": left <= right,
        ">": left > right, ">=": left >= right,
    }[op]


def naive_select(triples: list[Triple], query: SelectQuery) -> list[dict[str, Term]]:
    """Recursive nested-loop evaluation over a plain triple list."""

    def substitute(term, binding):
        if isinstance(term, Variable):
            return binding.get(term.name)
        return term

    def join(patterns, binding):
        if not patterns:
            yield binding
            return
        s_pat, p_pat, o_pat = patterns[0]
        s = substitute(s_pat, binding)
        p = substitute(p_pat, binding)
        o = substitute(o_pat, binding)
        if isinstance(s, Literal) or isinstance(p, Literal):
            return
        for t in scan_match(triples, s, p, o):
            extended = dict(binding)
            conflict = False
            for pat, value in ((s_pat, t.subject), (p_pat, t.predicate), (o_pat, t.object)):
                if isinstance(pat, Variable):
                    if pat.name in extended and extended[pat.name] != value:
                        conflict = True
                        break
                    extended[pat.name] = value
            if not conflict:
                yield from join(patterns[1:], extended)

    def passes(binding, f: FilterExpr) -> bool:
        left = substitute(f.left, binding)
        right = substitute(f.right, binding)
        if left is None or right is None:
            return False
        return _oracle_compare(left, f.op, right)

    rows = []
    for binding in join(query.where, {}):
        if all(passes(binding, f) for f in query.filters):
            rows.append({name: binding[name] for name in query.variables})
    rows.sort(key=lambda r: tuple(canonical_text(r[n]) for n in query.variables))
    if query.distinct:
        deduped, seen = [], set()
        for row in rows:
            key = tuple(canonical_text(row[n]) for n in query.variables)
            if key not in seen:
                seen.add(key)
                deduped.append(row)
        return deduped
    return rows


# ---------------------------------------------------------------------------
# Seeded generators


def random_term(rng: random.Random, *, iri_only: bool = False) -> Term:
    roll = rng.random()
    if iri_only or roll < 0.6:
        return Iri(f"urn:n{rng.randrange(12)}")
    if roll < 0.75:
        return Literal(str(rng.randrange(20)), XSD_INTEGER)
    if roll < 0.9:
        return Literal(f"{rng.randrange(200) / 4:.2f}", XSD_DECIMAL)
    return Literal(rng.choice(["red", "green", "blue", "successful"]), XSD_STRING)


def random_graph_triples(rng: random.Random, size: int) -> list[Triple]:
    """Random triples over a small vocabulary, including occasional
    rdf:type / rdfs:subClassOf facts to exercise the inference rule."""
    triples = set()
    classes = [Iri(f"urn:c{i}") for i in range(4)]
    predicates = [Iri(f"urn:p{i}") for i in range(5)] + [RDF_TYPE, RDFS_SUBCLASS_OF]
    while len(triples) < size:
        p = rng.choice(predicates)
        if p == RDF_TYPE:
            triples.add(Triple(random_term(rng, iri_only=True), p, rng.choice(classes)))
        elif p == RDFS_SUBCLASS_OF:
            triples.add(Triple(rng.choice(classes), p, rng.choice(classes)))
        else:
            triples.add(Triple(random_term(rng, iri_only=True), p, random_term(rng)))
    return sorted(triples, key=Triple.sort_key)


def random_literal(rng: random.Random) -> Literal:
    roll = rng.random()
    if roll < 0.5:
        return Literal(str(rng.randrange(20)), XSD_INTEGER)
    if roll < 0.8:
        return Literal(f"{rng.randrange(200) / 4:.2f}", XSD_DECIMAL)
    return Literal(rng.choice(["red", "green", "blue", "successful"]), XSD_STRING)


def random_select_query(rng: random.Random) -> SelectQuery:
    """A random query from the supported grammar, biased toward joins that
    stay tractable for the nested-loop oracle."""
    pool = [Variable(name) for name in ("a", "b", "c", "d")]

    def term_for(position: str):
        var_chance = 0.25 if position == "predicate" else 0.55
        if rng.random() < var_chance:
            return rng.choice(pool)
        if position == "object":
            return random_term(rng)
        return random_term(rng, iri_only=True)

    where = []
    for index in range(rng.randrange(1, 4)):
        parts = [term_for("subject"), term_for("predicate"), term_for("object")]
        seen_so_far = [v for pattern in where for v in pattern if isinstance(v, Variable)]
        if index and seen_so_far and rng.random() < 0.85:
            parts[rng.randrange(3)] = rng.choice(seen_so_far)
        where.append((parts[0], parts[1], parts[2]))

    used: list[Variable] = []
    for pattern in where:
        for term in pattern:
            if isinstance(term, Variable) and term not in used:
                used.append(term)
    if not used:
        v = Variable("s")
        used.append(v)
        where.append((v, Iri("urn:p0"), random_term(rng)))

    selected = rng.sample(used, k=rng.randrange(1, len(used) + 1))
    filters = []
    if rng.random() < 0.4:
        left = rng.choice(used)
        op = rng.choice(["=", "!=", "<", "<=", ">", ">="])
        if len(used) > 1 and rng.random() < 0.4:
            right = rng.choice([v for v in used if v != left])
        else:
            right = random_literal(rng)
        filters.append(FilterExpr(left, op, right))
    return SelectQuery(variables=[v.name for v in selected],
                       distinct=rng.random() < 0.5,
                       where=where, filters=filters)
