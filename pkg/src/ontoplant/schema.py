"""The fixed manufacturing vocabulary (TBox) and its triple rendering.

Everything the knowledge base ever asserts uses the classes and properties
declared here: products define features, process plans realize features,
resources are capable of plans, and process executions record runtime
history with planned/real times and performance metric bundles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .terms import Iri, Triple, XSD_DATETIME, XSD_DECIMAL, XSD_STRING

EX_NS = "http://example.org/manufacturing#"
RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"

RDF_TYPE = Iri(RDF_NS + "type")
RDFS_CLASS = Iri(RDFS_NS + "Class")
RDFS_SUBCLASS_OF = Iri(RDFS_NS + "subClassOf")
RDFS_SUBPROPERTY_OF = Iri(RDFS_NS + "subPropertyOf")
RDFS_DOMAIN = Iri(RDFS_NS + "domain")
RDFS_RANGE = Iri(RDFS_NS + "range")
RDF_PROPERTY = Iri(RDF_NS + "Property")

# Well-known prefixes used by the Turtle serialiser and the query parser.
PREFIXES: dict[str, str] = {
    "ex": EX_NS,
    "rdf": RDF_NS,
    "rdfs": RDFS_NS,
    "xsd": "http://www.w3.org/2001/XMLSchema#",
}


def ex(local: str) -> Iri:
    """Mint an IRI in the single instance namespace."""
    return Iri(EX_NS + local)


# Classes
PRODUCT = ex("Product")
SPECIFICATION = ex("Specification")
FEATURE = ex("Feature")
PROCESS = ex("Process")
PROCESS_PLAN = ex("ProcessPlan")
PROCESS_EXECUTION = ex("ProcessExecution")
RESOURCE = ex("Resource")
MACHINE = ex("Machine")
ROBOT = ex("Robot")
BUFFER = ex("Buffer")
PERFORMANCE = ex("Performance")
OBJECTIVE_FUNCTION = ex("ObjectiveFunction")
COEFFICIENT = ex("Coefficient")

# Object properties
CAPABLE_OF = ex("capableOf")
REALIZES = ex("realizes")
DEFINES = ex("defines")
HAS_OBJECTIVE_FUNCTION = ex("hasObjectiveFunction")
HAS_COEFFICIENT = ex("hasCoefficient")
HAS_PERFORMANCE = ex("hasPerformance")
EXPECTED_PERFORMANCE = ex("expectedPerformance")
REAL_PERFORMANCE = ex("realPerformance")
HAS_PROCESS_EXECUTION = ex("hasProcessExecution")
RUNS_ON_RESOURCE = ex("runsOnResource")
RUNS_PROCESS_PLAN = ex("runsProcessPlan")

# Datatype properties
HAS_VALUE = ex("hasValue")
COEFFICIENT_FOR = ex("coefficientFor")
DEADLINE = ex("deadline")
HAS_STATUS = ex("hasStatus")
HAS_ERROR_MESSAGE = ex("hasErrorMessage")
PLANNED_START_TIME = ex("plannedStartTime")
PLANNED_END_TIME = ex("plannedEndTime")
REAL_START_TIME = ex("realStartTime")
REAL_END_TIME = ex("realEndTime")
DURATION = ex("duration")
ENERGY_COST = ex("energyCost")
EMISSIONS = ex("emissions")
QUALITY = ex("quality")


@dataclass(frozen=True)
class OntologySchema:
    """Declarative TBox: classes, subclass facts, and property signatures.

    ``object_properties`` maps property -> (domain class, range class);
    ``datatype_properties`` maps property -> (domain class, XSD datatype).
    """

    classes: frozenset[Iri]
    subclass_of: tuple[tuple[Iri, Iri], ...]
    subproperty_of: tuple[tuple[Iri, Iri], ...]
    object_properties: dict[Iri, tuple[Iri, Iri]] = field(hash=False)
    datatype_properties: dict[Iri, tuple[Iri, str]] = field(hash=False)

    def tbox_triples(self) -> frozenset[Triple]:
        """All schema triples: declarations, hierarchy, domains, ranges."""
        out: set[Triple] = set()
        for cls in self.classes:
            out.add(Triple(cls, RDF_TYPE, RDFS_CLASS))
        for sub, sup in self.subclass_of:
            out.add(Triple(sub, RDFS_SUBCLASS_OF, sup))
        for sub, sup in self.subproperty_of:
            out.add(Triple(sub, RDFS_SUBPROPERTY_OF, sup))
        for prop, (dom, rng) in self.object_properties.items():
            out.add(Triple(prop, RDF_TYPE, RDF_PROPERTY))
            out.add(Triple(prop, RDFS_DOMAIN, dom))
            out.add(Triple(prop, RDFS_RANGE, rng))
        for prop, (dom, dtype) in self.datatype_properties.items():
            out.add(Triple(prop, RDF_TYPE, RDF_PROPERTY))
            out.add(Triple(prop, RDFS_DOMAIN, dom))
            out.add(Triple(prop, RDFS_RANGE, Iri(dtype)))
        return frozenset(out)


def default_schema() -> OntologySchema:
    """The manufacturing TBox used by every knowledge base in this package."""
    return OntologySchema(
        classes=frozenset({
            PRODUCT, SPECIFICATION, FEATURE, PROCESS, PROCESS_PLAN,
            PROCESS_EXECUTION, RESOURCE, MACHINE, ROBOT, BUFFER,
            PERFORMANCE, OBJECTIVE_FUNCTION, COEFFICIENT,
        }),
        subclass_of=(
            (MACHINE, RESOURCE),
            (ROBOT, RESOURCE),
            (BUFFER, RESOURCE),
            (PROCESS_PLAN, PROCESS),
            (PROCESS_EXECUTION, PROCESS),
        ),
        subproperty_of=(
            (EXPECTED_PERFORMANCE, HAS_PERFORMANCE),
            (REAL_PERFORMANCE, HAS_PERFORMANCE),
        ),
        object_properties={
            CAPABLE_OF: (RESOURCE, PROCESS_PLAN),
            REALIZES: (PROCESS_PLAN, FEATURE),
            DEFINES: (PRODUCT, FEATURE),
            HAS_OBJECTIVE_FUNCTION: (PRODUCT, OBJECTIVE_FUNCTION),
            HAS_COEFFICIENT: (OBJECTIVE_FUNCTION, COEFFICIENT),
            HAS_PERFORMANCE: (PROCESS, PERFORMANCE),
            EXPECTED_PERFORMANCE: (PROCESS_PLAN, PERFORMANCE),
            REAL_PERFORMANCE: (PROCESS_EXECUTION, PERFORMANCE),
            HAS_PROCESS_EXECUTION: (PRODUCT, PROCESS_EXECUTION),
            RUNS_ON_RESOURCE: (PROCESS_EXECUTION, RESOURCE),
            RUNS_PROCESS_PLAN: (PROCESS_EXECUTION, PROCESS_PLAN),
        },
        datatype_properties={
            HAS_VALUE: (COEFFICIENT, XSD_DECIMAL),
            COEFFICIENT_FOR: (COEFFICIENT, XSD_STRING),
            DEADLINE: (PRODUCT, XSD_DATETIME),
            HAS_STATUS: (PROCESS_EXECUTION, XSD_STRING),
            HAS_ERROR_MESSAGE: (PROCESS_EXECUTION, XSD_STRING),
            PLANNED_START_TIME: (PROCESS_EXECUTION, XSD_DATETIME),
            PLANNED_END_TIME: (PROCESS_EXECUTION, XSD_DATETIME),
            REAL_START_TIME: (PROCESS_EXECUTION, XSD_DATETIME),
            REAL_END_TIME: (PROCESS_EXECUTION, XSD_DATETIME),
            DURATION: (PERFORMANCE, XSD_DECIMAL),
            ENERGY_COST: (PERFORMANCE, XSD_DECIMAL),
            EMISSIONS: (PERFORMANCE, XSD_DECIMAL),
            QUALITY: (PERFORMANCE, XSD_DECIMAL),
        },
    )
