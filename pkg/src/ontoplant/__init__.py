"""Ontology-backed knowledge base and runtime control for small plants.

The package is organised around a central RDF-style knowledge base:

- :mod:`ontoplant.terms`, :mod:`ontoplant.schema`, :mod:`ontoplant.graph`,
  :mod:`ontoplant.turtle` — the triple store, its fixed vocabulary, and
  Turtle persistence.
- :mod:`ontoplant.sparql` — the query/update engine (SELECT, INSERT DATA,
  DELETE/INSERT WHERE).
- :mod:`ontoplant.csvbuild` — CSV bundle ingestion that populates the
  instance level ("plug and produce").
- :mod:`ontoplant.runtime` — the typed facade implementing the process
  execution lifecycle and OEE reporting.
- :mod:`ontoplant.simulation` — the deterministic plant simulator with
  product and resource agents.
- :mod:`ontoplant.api` — the HTTP/JSON service.
- :mod:`ontoplant.cli` — build / serve / simulate / report entry points.
"""

__version__ = "0.1.0"
