from decimal import Decimal

import pytest

from ontoplant import schema as sc
from ontoplant.csvbuild import build_abox, parse_csv_bundle, render_csv_bundle
from ontoplant.errors import (
    CsvSyntaxError, DanglingReferenceError, DomainViolationError,
)
from ontoplant.graph import new_graph
from ontoplant.terms import Iri


def test_demo_bundle_counts(demo_bundle):
    plant = parse_csv_bundle(demo_bundle)
    assert len(plant.resources) == 9
    assert len(plant.process_plans) == 4
    machine_rows = {(p.id, p.machine) for p in plant.process_plans}
    assert machine_rows == {("P1", m) for m in ("M1", "M2", "M3", "M4")}


def test_table_values_parsed_exactly(demo_bundle):
    plant = parse_csv_bundle(demo_bundle)
    by_machine = {p.machine: p for p in plant.process_plans}
    assert by_machine["M1"].duration_min == Decimal(20)
    assert by_machine["M1"].energy_kwh == Decimal(100)
    assert by_machine["M3"].duration_min == Decimal(15)
    assert by_machine["M3"].energy_kwh == Decimal(120)


def _edit(bundle: dict[str, str], name: str, transform) -> dict[str, str]:
    out = dict(bundle)
    out[name] = transform(out[name])
    return out


def test_zero_duration_is_a_domain_violation(demo_bundle):
    bad = _edit(demo_bundle, "processes.csv",
                lambda text: text.replace("P1,F1,M1,20,", "P1,F1,M1,0,"))
    with pytest.raises(DomainViolationError) as err:
        parse_csv_bundle(bad)
    assert err.value.file == "processes.csv" and err.value.field == "durationMin"
    assert err.value.line == 2


def test_quality_outside_unit_interval_rejected(demo_bundle):
    bad = _edit(demo_bundle, "processes.csv",
                lambda text: text.replace("0,1.0", "0,1.5", 1))
    with pytest.raises(DomainViolationError):
        parse_csv_bundle(bad)


def test_undeclared_feature_reference(demo_bundle):
    bad = _edit(demo_bundle, "products.csv",
                lambda text: text.replace("part3,F1", "part3,F9"))
    with pytest.raises(DanglingReferenceError) as err:
        parse_csv_bundle(bad)
    assert err.value.ref == "F9" and err.value.file == "products.csv"


def test_capable_of_requires_matching_plan_row(demo_bundle):
    bad = _edit(demo_bundle, "resources.csv",
                lambda text: text.replace("R1,robot,", "R1,robot,P1"))
    with pytest.raises(DanglingReferenceError) as err:
        parse_csv_bundle(bad)
    assert err.value.ref == "P1@R1"


def test_missing_file_and_bad_header(demo_bundle):
    partial = {k: v for k, v in demo_bundle.items() if k != "features.csv"}
    with pytest.raises(CsvSyntaxError):
        parse_csv_bundle(partial)
    bad = _edit(demo_bundle, "resources.csv",
                lambda text: text.replace("id,kind,capableOf", "id,type,capableOf"))
    with pytest.raises(CsvSyntaxError) as err:
        parse_csv_bundle(bad)
    assert err.value.line == 1


def test_wrong_field_count_reports_line(demo_bundle):
    bad = _edit(demo_bundle, "features.csv", lambda text: text + "F2\n")
    with pytest.raises(CsvSyntaxError) as err:
        parse_csv_bundle(bad)
    assert err.value.line == 3


def test_render_parse_round_trip(demo_bundle):
    plant = parse_csv_bundle(demo_bundle)
    assert parse_csv_bundle(render_csv_bundle(plant)) == plant


def test_build_abox_links_and_idempotence(demo_bundle):
    plant = parse_csv_bundle(demo_bundle)
    g = new_graph()
    build_abox(g, plant)
    capable = g.match(None, sc.CAPABLE_OF, None)
    assert len(capable) == 4
    assert {t.subject.local for t in capable} == {"M1", "M2", "M3", "M4"}
    snapshot = g.triples()
    build_abox(g, plant)
    assert g.triples() == snapshot


def test_rebuild_replaces_changed_values(demo_bundle):
    plant = parse_csv_bundle(demo_bundle)
    g = new_graph()
    build_abox(g, plant)
    changed = parse_csv_bundle(_edit(demo_bundle, "processes.csv",
                                     lambda t: t.replace("P1,F1,M1,20,100", "P1,F1,M1,19,104")))
    build_abox(g, changed)
    perf = g.match(sc.ex("P1@M1_expected"), sc.DURATION, None)
    assert [t.object.text for t in perf] == ["19"]


def test_objective_coefficients_materialised():
    bundle = {
        "resources.csv": "id,kind,capableOf\nM1,machine,P1\n",
        "processes.csv": ("id,realizes,machine,durationMin,energyKwh,emissions,quality\n"
                          "P1,F1,M1,10,5,0,1\n"),
        "features.csv": "id,description\nF1,frame\n",
        "products.csv": ("id,features,deadline,objective\n"
                         "prod,F1,2023-01-02T00:00:00Z,completionTime=1;energyKwh=0.5\n"),
    }
    g = new_graph()
    build_abox(g, parse_csv_bundle(bundle))
    objectives = g.match(sc.ex("prod"), sc.HAS_OBJECTIVE_FUNCTION, None)
    assert len(objectives) == 1
    coefficients = g.match(objectives[0].object, sc.HAS_COEFFICIENT, None)
    assert len(coefficients) == 2
    for t in coefficients:
        assert g.match(t.object, sc.COEFFICIENT_FOR, None)
        assert g.match(t.object, sc.HAS_VALUE, None)


def test_vocabulary_closure(demo_bundle):
    """Every instance triple uses a declared predicate; every object of an
    object property is itself typed."""
    plant = parse_csv_bundle(demo_bundle)
    g = new_graph()
    build_abox(g, plant)
    schema = g.schema
    declared = set(schema.object_properties) | set(schema.datatype_properties) | {sc.RDF_TYPE}
    for t in g.triples() - g.tbox:
        assert t.predicate in declared, t
        if t.predicate in schema.object_properties and isinstance(t.object, Iri):
            assert g.match(t.object, sc.RDF_TYPE, None), f"untyped object in {t}"
