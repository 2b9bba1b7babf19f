"""In-memory triple store with pattern indexes.

The store keeps one canonical set of triples plus five lookup indexes
(s, p, o, sp, po). ``match`` answers any of the eight wildcard patterns
and, for ``rdf:type`` patterns with a concrete class, additionally reports
instances of transitive subclasses as entailed type triples, so a query
for resources also finds machines, robots, and buffers.

Graphs are passive: they do no locking. Writers (the runtime facade, the
API service, the simulator) serialise access themselves.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Iterator

from .schema import OntologySchema, RDF_TYPE, RDFS_SUBCLASS_OF, default_schema
from .terms import Iri, Term, Triple

Pattern = tuple[Iri | None, Iri | None, Term | None]


class Graph:
    """A set of triples with (s), (p), (o), (s,p), (p,o) indexes.

    ``tbox`` is the frozen schema triple set installed by :func:`new_graph`;
    the runtime facade uses it to refuse schema deletions. ``remove`` here
    is deliberately unguarded so tests and power tools can do anything.
    """

    def __init__(self, schema: OntologySchema | None = None):
        self._triples: set[Triple] = set()
        self._by_s: dict[Iri, set[Triple]] = defaultdict(set)
        self._by_p: dict[Iri, set[Triple]] = defaultdict(set)
        self._by_o: dict[Term, set[Triple]] = defaultdict(set)
        self._by_sp: dict[tuple[Iri, Iri], set[Triple]] = defaultdict(set)
        self._by_po: dict[tuple[Iri, Term], set[Triple]] = defaultdict(set)
        self.schema = schema
        self.tbox: frozenset[Triple] = frozenset()

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def triples(self) -> frozenset[Triple]:
        return frozenset(self._triples)

    def abox_size(self) -> int:
        """Number of instance-level triples (everything outside the TBox)."""
        return len(self._triples) - len(self.tbox & self._triples)

    def insert(self, triple: Triple) -> bool:
        """Add a triple. Returns False if it was already present."""
        if not isinstance(triple, Triple):
            triple = Triple(*triple)
        if triple in self._triples:
            return False
        self._triples.add(triple)
        s, p, o = triple.subject, triple.predicate, triple.object
        self._by_s[s].add(triple)
        self._by_p[p].add(triple)
        self._by_o[o].add(triple)
        self._by_sp[(s, p)].add(triple)
        self._by_po[(p, o)].add(triple)
        return True

    def insert_all(self, triples: Iterable[Triple]) -> int:
        return sum(1 for t in triples if self.insert(t))

    def _discard(self, triple: Triple) -> None:
        self._triples.discard(triple)
        s, p, o = triple.subject, triple.predicate, triple.object
        self._by_s[s].discard(triple)
        self._by_p[p].discard(triple)
        self._by_o[o].discard(triple)
        self._by_sp[(s, p)].discard(triple)
        self._by_po[(p, o)].discard(triple)

    def remove(self, subject: Iri | None = None, predicate: Iri | None = None,
               obj: Term | None = None) -> int:
        """Remove every triple matching the concrete/wildcard pattern.

        Matching is raw: no subclass entailment, so a pattern naming a
        superclass never deletes subclass instance triples. Returns the
        number of triples removed (0 for no match).
        """
        victims = list(self._candidates(subject, predicate, obj))
        for t in victims:
            self._discard(t)
        return len(victims)

    def _candidates(self, s: Iri | None, p: Iri | None, o: Term | None) -> Iterator[Triple]:
        """Index-backed scan of stored triples unifying with the pattern."""
        if s is not None and p is not None:
            pool = self._by_sp.get((s, p), ())
        elif p is not None and o is not None:
            pool = self._by_po.get((p, o), ())
        elif s is not None:
            pool = self._by_s.get(s, ())
        elif o is not None:
            pool = self._by_o.get(o, ())
        elif p is not None:
            pool = self._by_p.get(p, ())
        else:
            pool = self._triples
        for t in pool:
            if s is not None and t.subject != s:
                continue
            if p is not None and t.predicate != p:
                continue
            if o is not None and t.object != o:
                continue
            yield t

    def subclasses_of(self, cls: Iri) -> set[Iri]:
        """Transitive closure of rdfs:subClassOf below ``cls`` (inclusive)."""
        seen = {cls}
        frontier = [cls]
        while frontier:
            current = frontier.pop()
            for t in self._by_po.get((RDFS_SUBCLASS_OF, current), ()):
                sub = t.subject
                if sub not in seen:
                    seen.add(sub)
                    frontier.append(sub)
        return seen

    def match(self, subject: Iri | None = None, predicate: Iri | None = None,
              obj: Term | None = None, *, infer_types: bool = True) -> list[Triple]:
        """Triples unifying with the pattern, sorted by canonical text.

        With ``infer_types`` (the default), a pattern ``(s?, rdf:type, C)``
        with concrete class C also yields entailed ``(x, rdf:type, C)``
        triples for every x typed with a transitive subclass of C.
        """
        found = set(self._candidates(subject, predicate, obj))
        if (infer_types and predicate == RDF_TYPE and isinstance(obj, Iri)):
            for sub in self.subclasses_of(obj):
                if sub == obj:
                    continue
                for t in self._by_po.get((RDF_TYPE, sub), ()):
                    if subject is None or t.subject == subject:
                        found.add(Triple(t.subject, RDF_TYPE, obj))
        return sorted(found, key=Triple.sort_key)


def new_graph(schema: OntologySchema | None = None) -> Graph:
    """Create a graph preloaded with the schema's TBox triples."""
    schema = schema if schema is not None else default_schema()
    g = Graph(schema)
    tbox = schema.tbox_triples()
    g.insert_all(tbox)
    g.tbox = tbox
    return g
