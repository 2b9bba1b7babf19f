import random

import pytest

from ontoplant import schema as sc
from ontoplant.errors import (
    ProtectedTripleError, QuerySyntaxError, UnboundTemplateVariableError,
    UnsupportedFeatureError,
)
from ontoplant.graph import Graph, new_graph
from ontoplant.runtime import resource_history_query
from ontoplant.sparql import (
    SelectQuery, UpdateQuery, eval_select, eval_update, parse_query,
)
from ontoplant.terms import Iri, Literal, Triple
from ontoplant.turtle import dump_turtle

from oracles import naive_select, random_graph_triples, random_select_query

EX = "PREFIX ex: <http://example.org/manufacturing#>\n"


def _history_fixture() -> Graph:
    """Two successful and one errored execution on M1, one successful on M2."""
    g = new_graph()
    rows = [
        ("e1", "M1", "successful", "0", "100", "1", "T00:10", "T00:30"),
        ("e2", "M1", "successful", "2.5", "102", "0.9", "T00:40", "T00:55"),
        ("e3", "M1", "errored", "1", "50", "0.1", "T01:00", "T01:01"),
        ("e4", "M2", "successful", "0", "110", "1", "T00:05", "T00:23"),
    ]
    for exec_id, machine, status, emissions, energy, quality, start, end in rows:
        node = sc.ex(exec_id)
        perf = sc.ex(f"{exec_id}_real")
        g.insert_all([
            Triple(node, sc.RUNS_ON_RESOURCE, sc.ex(machine)),
            Triple(node, sc.HAS_STATUS, Literal.string(status)),
            Triple(node, sc.REAL_PERFORMANCE, perf),
            Triple(perf, sc.EMISSIONS, Literal.decimal(emissions)),
            Triple(perf, sc.ENERGY_COST, Literal.decimal(energy)),
            Triple(perf, sc.QUALITY, Literal.decimal(quality)),
            Triple(node, sc.REAL_START_TIME, Literal.date_time(f"2023-01-01{start}:00Z")),
            Triple(node, sc.REAL_END_TIME, Literal.date_time(f"2023-01-01{end}:00Z")),
        ])
    return g


class TestParse:
    def test_history_fixture_is_a_distinct_select_with_six_vars(self):
        query = parse_query(resource_history_query())
        assert isinstance(query, SelectQuery)
        assert query.distinct
        assert len(query.variables) == 6
        assert any(f.op == "=" and getattr(f.right, "text", "") == "successful"
                   for f in query.filters)

    def test_minimal_three_var_pattern(self):
        query = parse_query("SELECT ?s WHERE { ?s ?p ?o }")
        assert query.variables == ["s"]
        assert len(query.where) == 1

    def test_select_star(self):
        query = parse_query("SELECT * WHERE { ?s ?p ?o }")
        assert query.variables == ["s", "p", "o"]

    @pytest.mark.parametrize("text,keyword", [
        ("SELECT ?s WHERE { ?s ?p ?o } GROUP BY ?s", "GROUP BY"),
        ("SELECT ?s WHERE { ?s ?p ?o } ORDER BY ?s", "ORDER BY"),
        ("SELECT ?s WHERE { ?s ?p ?o } LIMIT 5", "LIMIT"),
        ("SELECT ?s WHERE { OPTIONAL { ?s ?p ?o } }", "OPTIONAL"),
        ("SELECT ?s WHERE { { ?s ?p ?o } UNION { ?s ?p ?o } }", None),
        ("CONSTRUCT { ?s ?p ?o } WHERE { ?s ?p ?o }", "CONSTRUCT"),
        ("SELECT ?s WHERE { ?s ?p ?o . SERVICE <urn:x> { ?s ?p ?o } }", "SERVICE"),
    ])
    def test_unsupported_keywords_rejected(self, text, keyword):
        with pytest.raises((UnsupportedFeatureError, QuerySyntaxError)) as err:
            parse_query(text)
        if keyword is not None:
            assert isinstance(err.value, UnsupportedFeatureError)
            assert err.value.keyword == keyword

    def test_syntax_error_carries_position_and_expectation(self):
        with pytest.raises(QuerySyntaxError) as err:
            parse_query("SELECT ?s FROM_NOWHERE { ?s ?p ?o }")
        assert err.value.line == 1
        assert err.value.expected == "WHERE"

    def test_selected_variable_must_occur_in_where(self):
        with pytest.raises(QuerySyntaxError):
            parse_query("SELECT ?missing WHERE { ?s ?p ?o }")

    def test_template_variable_must_occur_in_where(self):
        with pytest.raises(UnboundTemplateVariableError):
            parse_query(EX + "DELETE { ?x ex:hasStatus ?gone } WHERE { ?x ex:hasStatus \"a\" }")

    def test_insert_data_rejects_variables(self):
        with pytest.raises(QuerySyntaxError):
            parse_query(EX + "INSERT DATA { ?s ex:hasStatus \"planned\" }")

    def test_parse_update_shapes(self):
        query = parse_query(EX + """
            DELETE { ex:e1 ex:hasStatus ?old }
            INSERT { ex:e1 ex:hasStatus "running" }
            WHERE { ex:e1 ex:hasStatus ?old }""")
        assert isinstance(query, UpdateQuery)
        assert len(query.delete_patterns) == len(query.insert_templates) == 1
        only_insert = parse_query(EX + 'INSERT { ex:e1 ex:x "1" } WHERE { ex:e1 ?p ?o }')
        assert isinstance(only_insert, UpdateQuery) and not only_insert.delete_patterns


class TestEvalSelect:
    def test_history_query_returns_hand_joined_rows(self):
        g = _history_fixture()
        query = parse_query(resource_history_query(sc.ex("M1")))
        rows = eval_select(g, query)
        flat = [
            (r["executionId"].local, r["emissions"].text, r["costs"].text,
             r["quality"].text, r["realStartTime"].text, r["realEndTime"].text)
            for r in rows
        ]
        assert flat == [
            ("e1", "0", "100", "1", "2023-01-01T00:10:00Z", "2023-01-01T00:30:00Z"),
            ("e2", "2.5", "102", "0.9", "2023-01-01T00:40:00Z", "2023-01-01T00:55:00Z"),
        ]

    def test_history_query_on_empty_abox(self):
        g = new_graph()
        assert eval_select(g, parse_query(resource_history_query(sc.ex("M1")))) == []

    def test_distinct_deduplicates_rows(self):
        g = Graph()
        g.insert_all([
            Triple(Iri("urn:a"), Iri("urn:p"), Literal("v")),
            Triple(Iri("urn:b"), Iri("urn:p"), Literal("v")),
        ])
        dup = parse_query("SELECT ?v WHERE { ?s <urn:p> ?v }")
        assert len(eval_select(g, dup)) == 2
        distinct = parse_query("SELECT DISTINCT ?v WHERE { ?s <urn:p> ?v }")
        assert len(eval_select(g, distinct)) == 1

    def test_filter_never_grows_results(self):
        rng = random.Random(7)
        for _ in range(40):
            g = Graph()
            g.insert_all(random_graph_triples(rng, rng.randrange(3, 80)))
            query = random_select_query(rng)
            base = SelectQuery(variables=query.variables, distinct=query.distinct,
                               where=query.where, filters=[])
            with_filters = eval_select(g, query)
            without = eval_select(g, base)
            assert len(with_filters) <= len(without)

    @pytest.mark.parametrize("seed", range(30))
    def test_engine_matches_nested_loop_oracle(self, seed):
        rng = random.Random(seed)
        triples = random_graph_triples(rng, rng.randrange(5, 120))
        g = Graph()
        g.insert_all(triples)
        query = random_select_query(rng)
        assert eval_select(g, query) == naive_select(triples, query)


class TestEvalUpdate:
    def test_insert_data_for_planned_execution(self):
        g = new_graph()
        stats = eval_update(g, parse_query(EX + """
            INSERT DATA {
              ex:exec1 a ex:ProcessExecution .
              ex:part7 ex:hasProcessExecution ex:exec1 .
              ex:exec1 ex:plannedStartTime "2023-01-01T01:40:00Z"^^xsd:dateTime .
              ex:exec1 ex:plannedEndTime "2023-01-01T01:58:00Z"^^xsd:dateTime .
            }"""))
        assert stats.inserted >= 4 and stats.deleted == 0

    def test_status_rewrite_deletes_one_inserts_two(self):
        g = new_graph()
        g.insert(Triple(sc.ex("exec1"), sc.HAS_STATUS, Literal.string("planned")))
        stats = eval_update(g, parse_query(EX + """
            DELETE { ex:exec1 ex:hasStatus ?old }
            INSERT { ex:exec1 ex:hasStatus "running" .
                     ex:exec1 ex:realStartTime "2023-01-01T00:05:00Z"^^xsd:dateTime }
            WHERE { ex:exec1 ex:hasStatus ?old }"""))
        assert (stats.deleted, stats.inserted) == (1, 2)
        assert g.match(sc.ex("exec1"), sc.HAS_STATUS, None)[0].object.text == "running"

    def test_no_match_update_changes_nothing(self):
        g = new_graph()
        before = dump_turtle(g)
        stats = eval_update(g, parse_query(EX + """
            DELETE { ex:ghost ex:hasStatus ?old }
            INSERT { ex:ghost ex:hasStatus "running" }
            WHERE { ex:ghost ex:hasStatus ?old }"""))
        assert (stats.inserted, stats.deleted) == (0, 0)
        assert dump_turtle(g) == before

    def test_insert_data_is_idempotent_on_duplicates(self):
        g = Graph()
        text = EX + 'INSERT DATA { ex:a ex:hasStatus "x" }'
        assert eval_update(g, parse_query(text)).inserted == 1
        assert eval_update(g, parse_query(text)).inserted == 0

    def test_protected_triples_abort_atomically(self):
        g = new_graph()
        g.insert(Triple(sc.ex("M1"), sc.RDF_TYPE, sc.MACHINE))
        before = dump_turtle(g)
        query = parse_query(
            "PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n" + EX +
            "DELETE { ?sub rdfs:subClassOf ex:Resource } "
            "INSERT { ex:marker ex:hasStatus \"x\" } "
            "WHERE { ?sub rdfs:subClassOf ex:Resource }")
        with pytest.raises(ProtectedTripleError):
            eval_update(g, query, protected=g.tbox)
        assert dump_turtle(g) == before  # nothing applied, not even the insert
