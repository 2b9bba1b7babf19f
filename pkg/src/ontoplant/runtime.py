"""Typed facade over the knowledge base: the process-execution lifecycle.

Every agent- or service-level touch of the graph goes through
:class:`KnowledgeBase`. The facade owns

- execution records and their status machine
  (proposed -> planned -> running -> successful | errored),
- the five interaction operations (add planned execution data, update
  execution data, product status, resource history, change resource
  performance),
- OEE reporting over a time window,
- the write lock and the monotonically increasing revision counter used
  by the HTTP service.

Timestamps cross the knowledge-base boundary as ISO-8601 UTC text.
Internally the plant clock counts whole minutes from the epoch
2023-01-01T00:00Z; helpers convert in both directions and facade methods
accept either form.

All mutations are issued as DELETE/INSERT updates through the query
engine and are atomic: a rejected patch leaves the graph byte-identical.
Schema (TBox) triples are protected from deletion here; only raw graph
access can remove them.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from importlib import resources as importlib_resources
from typing import Mapping

from . import schema as sc
from .csvbuild import PlantDescription, build_abox, parse_csv_bundle
from .errors import (
    DomainViolationError,
    EmptyWindowError,
    IllegalTransitionError,
    InvalidWindowError,
    MissingFieldError,
    UnknownEntityError,
)
from .graph import Graph, new_graph
from .schema import ex
from .sparql import (
    InsertDataQuery, Query, SelectQuery, UpdateQuery, UpdateStats,
    eval_select, eval_update, parse_query,
)
from .terms import Iri, Literal, Term, Triple
from .turtle import dump_turtle

PROPOSED = "proposed"
PLANNED = "planned"
RUNNING = "running"
SUCCESSFUL = "successful"
ERRORED = "errored"

STATUSES = (PROPOSED, PLANNED, RUNNING, SUCCESSFUL, ERRORED)

# Legal forward transitions; terminal states allow none.
TRANSITIONS: dict[str, frozenset[str]] = {
    PROPOSED: frozenset({PLANNED}),
    PLANNED: frozenset({RUNNING}),
    RUNNING: frozenset({SUCCESSFUL, ERRORED}),
    SUCCESSFUL: frozenset(),
    ERRORED: frozenset(),
}

SIM_EPOCH = datetime(2023, 1, 1, tzinfo=timezone.utc)

_ISO_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}(:\d{2})?Z$")


def sim_minutes_to_iso(minutes: int | float) -> str:
    """Render minutes since the plant epoch as ISO-8601 UTC text."""
    moment = SIM_EPOCH + timedelta(minutes=float(minutes))
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def iso_to_sim_minutes(text: str) -> float:
    """Minutes since the plant epoch for an ISO-8601 UTC timestamp."""
    if not _ISO_RE.match(text):
        raise InvalidWindowError(f"bad timestamp {text!r}; want e.g. 2023-01-01T00:10:00Z")
    fmt = "%Y-%m-%dT%H:%M:%SZ" if text.count(":") == 2 else "%Y-%m-%dT%H:%MZ"
    moment = datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
    return (moment - SIM_EPOCH).total_seconds() / 60.0


def to_iso(value: int | float | str) -> str:
    """Accept sim minutes or ISO text; return canonical ISO text.

    Text is normalised through the epoch so that the seconds-less form
    and the full form of the same instant store (and compare) equal."""
    if isinstance(value, str):
        return sim_minutes_to_iso(iso_to_sim_minutes(value))
    return sim_minutes_to_iso(value)


@dataclass(frozen=True)
class Performance:
    """Metric bundle attached to plans (expected) and executions (real)."""

    duration_min: Decimal
    energy_kwh: Decimal
    emissions: Decimal = Decimal(0)
    quality: Decimal = Decimal(1)

    def __post_init__(self):
        object.__setattr__(self, "duration_min", Decimal(str(self.duration_min)))
        object.__setattr__(self, "energy_kwh", Decimal(str(self.energy_kwh)))
        object.__setattr__(self, "emissions", Decimal(str(self.emissions)))
        object.__setattr__(self, "quality", Decimal(str(self.quality)))
        if self.duration_min <= 0:
            raise DomainViolationError("duration must be > 0 minutes", field="durationMin")
        if self.energy_kwh < 0:
            raise DomainViolationError("energy cost must be >= 0 kWh", field="energyKwh")
        if self.emissions < 0:
            raise DomainViolationError("emissions must be >= 0", field="emissions")
        if not 0 <= self.quality <= 1:
            raise DomainViolationError("quality must be within [0, 1]", field="quality")

    def value_triples(self, node: Iri) -> list[Triple]:
        return [
            Triple(node, sc.DURATION, Literal.decimal(self.duration_min)),
            Triple(node, sc.ENERGY_COST, Literal.decimal(self.energy_kwh)),
            Triple(node, sc.EMISSIONS, Literal.decimal(self.emissions)),
            Triple(node, sc.QUALITY, Literal.decimal(self.quality)),
        ]


@dataclass(frozen=True)
class ProcessExecution:
    """One run of a process plan, reconstructed from knowledge-base triples."""

    id: str
    product: str
    plan: str
    status: str
    planned_start: str
    planned_end: str
    resource: str | None = None
    real_start: str | None = None
    real_end: str | None = None
    real_performance: Performance | None = None
    error_message: str | None = None

    def validate(self):
        if self.status not in STATUSES:
            raise DomainViolationError(f"unknown status {self.status!r}", field="status")
        if self.planned_start > self.planned_end:
            raise InvalidWindowError(
                f"plannedStartTime {self.planned_start} is after plannedEndTime {self.planned_end}")
        if self.real_start and self.real_end and self.real_start > self.real_end:
            raise InvalidWindowError(
                f"realStartTime {self.real_start} is after realEndTime {self.real_end}")
        if self.status in (RUNNING, SUCCESSFUL, ERRORED):
            if self.resource is None:
                raise MissingFieldError(self.status, "resource")
            if self.real_start is None:
                raise MissingFieldError(self.status, "realStart")
        if self.status == SUCCESSFUL:
            if self.real_end is None:
                raise MissingFieldError(self.status, "realEnd")
            if self.real_performance is None:
                raise MissingFieldError(self.status, "realPerformance")
        if self.status == ERRORED and self.error_message is None:
            raise MissingFieldError(self.status, "errorMessage")


@dataclass(frozen=True)
class ExecutionSummary:
    id: str
    status: str
    planned_window: tuple[str, str]
    real_window: tuple[str | None, str | None]


@dataclass(frozen=True)
class ProductStatus:
    product: str
    features: tuple[str, ...]
    deadline: str | None
    executions: tuple[ExecutionSummary, ...]
    latest_status: str


@dataclass(frozen=True)
class HistoryRow:
    """One successful execution as reported by the resource-history query."""

    execution_id: str
    emissions: Decimal
    energy_kwh: Decimal
    quality: Decimal
    real_start: str
    real_end: str


@dataclass(frozen=True)
class OeeReport:
    """Per-resource effectiveness over a window.

    uptime          busy minutes (clipped execution spans) / window minutes
    perf_efficiency sum of expected durations / sum of real durations over
                    executions completed inside the window (1 when none)
    quality_rate    mean recorded quality of those executions (1 when none)
    oee             uptime * min(perf_efficiency, 1) * quality_rate
    """

    resource: str
    window_start: str
    window_end: str
    uptime: float
    perf_efficiency: float
    quality_rate: float
    oee: float


def resource_history_query(resource_iri: Iri | None = None,
                           status: str = SUCCESSFUL) -> str:
    """The shipped resource-history SELECT, optionally parameterised.

    The raw fixture carries the placeholder URI ``<resource>``; passing an
    IRI substitutes it, and ``status`` swaps the filtered status literal.
    """
    text = (importlib_resources.files("ontoplant") / "queries" / "resource_history.sparql"
            ).read_text(encoding="utf-8")
    if resource_iri is not None:
        text = text.replace("<resource>", f"<{resource_iri.text}>")
    if status != SUCCESSFUL:
        text = text.replace('"successful"', f'"{status}"')
    return text


class KnowledgeBase:
    """The shared plant knowledge base with serialised write access."""

    def __init__(self, graph: Graph | None = None):
        self.graph = graph if graph is not None else new_graph()
        self.lock = threading.RLock()
        self.revision = 0
        self._exec_counter = self._scan_exec_counter()

    # -- plumbing -----------------------------------------------------------

    def _scan_exec_counter(self) -> int:
        highest = 0
        for t in self.graph.match(None, sc.RDF_TYPE, sc.PROCESS_EXECUTION,
                                  infer_types=False):
            m = re.match(r"^exec-(\d+)$", t.subject.local)
            if m:
                highest = max(highest, int(m.group(1)))
        return highest

    def _apply(self, query: Query) -> UpdateStats:
        """Run a mutation with TBox protection and bump the revision."""
        stats = eval_update(self.graph, query, protected=self.graph.tbox)
        self.revision += 1
        return stats

    def _exists(self, entity_id: str, cls: Iri) -> bool:
        return bool(self.graph.match(ex(entity_id), sc.RDF_TYPE, cls))

    def _require(self, entity_id: str, cls: Iri):
        if not self._exists(entity_id, cls):
            raise UnknownEntityError(entity_id)

    def _object(self, subject: Iri, predicate: Iri) -> Term | None:
        found = self.graph.match(subject, predicate, None, infer_types=False)
        return found[0].object if found else None

    def _literal_text(self, subject: Iri, predicate: Iri) -> str | None:
        obj = self._object(subject, predicate)
        return obj.text if isinstance(obj, Literal) else None

    def _read_performance(self, node: Iri) -> Performance | None:
        duration = self._literal_text(node, sc.DURATION)
        if duration is None:
            return None
        return Performance(
            duration_min=Decimal(duration),
            energy_kwh=Decimal(self._literal_text(node, sc.ENERGY_COST) or "0"),
            emissions=Decimal(self._literal_text(node, sc.EMISSIONS) or "0"),
            quality=Decimal(self._literal_text(node, sc.QUALITY) or "1"),
        )

    def read_execution(self, execution_id: str) -> ProcessExecution:
        """Reconstruct an execution record from its triples."""
        with self.lock:
            node = ex(execution_id)
            if not self.graph.match(node, sc.RDF_TYPE, sc.PROCESS_EXECUTION,
                                    infer_types=False):
                raise UnknownEntityError(execution_id)
            owners = self.graph.match(None, sc.HAS_PROCESS_EXECUTION, node)
            plan = self._object(node, sc.RUNS_PROCESS_PLAN)
            resource = self._object(node, sc.RUNS_ON_RESOURCE)
            perf_node = self._object(node, sc.REAL_PERFORMANCE)
            return ProcessExecution(
                id=execution_id,
                product=owners[0].subject.local if owners else "",
                plan=plan.local if isinstance(plan, Iri) else "",
                status=self._literal_text(node, sc.HAS_STATUS) or PROPOSED,
                planned_start=self._literal_text(node, sc.PLANNED_START_TIME) or "",
                planned_end=self._literal_text(node, sc.PLANNED_END_TIME) or "",
                resource=resource.local if isinstance(resource, Iri) else None,
                real_start=self._literal_text(node, sc.REAL_START_TIME),
                real_end=self._literal_text(node, sc.REAL_END_TIME),
                real_performance=(self._read_performance(perf_node)
                                  if isinstance(perf_node, Iri) else None),
                error_message=self._literal_text(node, sc.HAS_ERROR_MESSAGE),
            )

    # -- the five interactions ---------------------------------------------

    def add_planned_execution_data(self, product: str, plan: str,
                                   planned_start: int | float | str,
                                   planned_end: int | float | str,
                                   resource: str | None = None) -> str:
        """Register a new execution; returns its id.

        The execution is created in status ``proposed`` and immediately
        acknowledged to ``planned`` when a resource is already agreed, so
        callers that pass a resource observe status ``planned``.
        """
        with self.lock:
            self._require(product, sc.PRODUCT)
            self._require(plan, sc.PROCESS_PLAN)
            if resource is not None:
                self._require(resource, sc.RESOURCE)
            start, end = to_iso(planned_start), to_iso(planned_end)
            if start > end:
                raise InvalidWindowError(
                    f"plannedStartTime {start} is after plannedEndTime {end}")
            self._exec_counter += 1
            exec_id = f"exec-{self._exec_counter:06d}"
            node = ex(exec_id)
            status = PLANNED if resource is not None else PROPOSED
            triples = [
                Triple(node, sc.RDF_TYPE, sc.PROCESS_EXECUTION),
                Triple(ex(product), sc.HAS_PROCESS_EXECUTION, node),
                Triple(node, sc.RUNS_PROCESS_PLAN, ex(plan)),
                Triple(node, sc.HAS_STATUS, Literal.string(status)),
                Triple(node, sc.PLANNED_START_TIME, Literal.date_time(start)),
                Triple(node, sc.PLANNED_END_TIME, Literal.date_time(end)),
            ]
            if resource is not None:
                triples.append(Triple(node, sc.RUNS_ON_RESOURCE, ex(resource)))
            self._apply(InsertDataQuery(triples=triples))
            return exec_id

    def update_execution_data(self, execution_id: str, *,
                              status: str | None = None,
                              resource: str | None = None,
                              plan: str | None = None,
                              planned_start: int | float | str | None = None,
                              planned_end: int | float | str | None = None,
                              real_start: int | float | str | None = None,
                              real_end: int | float | str | None = None,
                              real_performance: Performance | None = None,
                              error_message: str | None = None) -> ProcessExecution:
        """Patch an execution; validates the status machine, then rewrites
        the affected triples with one atomic DELETE/INSERT.

        ``plan`` may be repointed together with ``resource`` while the
        execution has not started, since plan instances are
        machine-specific pairings."""
        with self.lock:
            current = self.read_execution(execution_id)
            if status is not None and status != current.status:
                if status not in TRANSITIONS.get(current.status, frozenset()):
                    raise IllegalTransitionError(current.status, status)
            if resource is not None:
                self._require(resource, sc.RESOURCE)
            if plan is not None:
                self._require(plan, sc.PROCESS_PLAN)

            updated = replace(
                current,
                status=status if status is not None else current.status,
                plan=plan if plan is not None else current.plan,
                resource=resource if resource is not None else current.resource,
                planned_start=(to_iso(planned_start) if planned_start is not None
                               else current.planned_start),
                planned_end=(to_iso(planned_end) if planned_end is not None
                             else current.planned_end),
                real_start=(to_iso(real_start) if real_start is not None
                            else current.real_start),
                real_end=to_iso(real_end) if real_end is not None else current.real_end,
                real_performance=(real_performance if real_performance is not None
                                  else current.real_performance),
                error_message=(error_message if error_message is not None
                               else current.error_message),
            )
            updated.validate()

            node = ex(execution_id)
            deletes: list[Triple] = []
            inserts: list[Triple] = []

            def rewrite(predicate: Iri, old: Term | None, new: Term):
                if old == new:
                    return
                if old is not None:
                    deletes.append(Triple(node, predicate, old))
                inserts.append(Triple(node, predicate, new))

            if updated.status != current.status:
                rewrite(sc.HAS_STATUS, Literal.string(current.status),
                        Literal.string(updated.status))
            if updated.resource != current.resource:
                rewrite(sc.RUNS_ON_RESOURCE,
                        ex(current.resource) if current.resource else None,
                        ex(updated.resource))
            if updated.plan != current.plan:
                rewrite(sc.RUNS_PROCESS_PLAN,
                        ex(current.plan) if current.plan else None,
                        ex(updated.plan))
            for predicate, old, new in (
                (sc.PLANNED_START_TIME, current.planned_start, updated.planned_start),
                (sc.PLANNED_END_TIME, current.planned_end, updated.planned_end),
                (sc.REAL_START_TIME, current.real_start, updated.real_start),
                (sc.REAL_END_TIME, current.real_end, updated.real_end),
            ):
                if new != old and new is not None:
                    rewrite(predicate, Literal.date_time(old) if old else None,
                            Literal.date_time(new))
            if updated.error_message != current.error_message:
                rewrite(sc.HAS_ERROR_MESSAGE,
                        Literal.string(current.error_message) if current.error_message else None,
                        Literal.string(updated.error_message))
            if real_performance is not None and real_performance != current.real_performance:
                perf_node = ex(f"{execution_id}_real")
                if current.real_performance is not None:
                    deletes.extend(current.real_performance.value_triples(perf_node))
                else:
                    inserts.append(Triple(node, sc.REAL_PERFORMANCE, perf_node))
                    inserts.append(Triple(perf_node, sc.RDF_TYPE, sc.PERFORMANCE))
                inserts.extend(real_performance.value_triples(perf_node))

            if deletes or inserts:
                if deletes:
                    self._apply(UpdateQuery(delete_patterns=deletes,
                                            insert_templates=inserts,
                                            where=list(deletes), filters=[]))
                else:
                    self._apply(InsertDataQuery(triples=inserts))
            return updated

    def get_product_status(self, product_id: str) -> ProductStatus:
        """Aggregate a product's features, deadline, and execution history."""
        with self.lock:
            self._require(product_id, sc.PRODUCT)
            node = ex(product_id)
            features = tuple(sorted(
                t.object.local for t in self.graph.match(node, sc.DEFINES, None)
                if isinstance(t.object, Iri)))
            deadline = self._literal_text(node, sc.DEADLINE)
            records = [
                self.read_execution(t.object.local)
                for t in self.graph.match(node, sc.HAS_PROCESS_EXECUTION, None)
                if isinstance(t.object, Iri)
            ]
            records.sort(key=lambda r: (r.planned_start, r.id))
            executions = tuple(
                ExecutionSummary(id=r.id, status=r.status,
                                 planned_window=(r.planned_start, r.planned_end),
                                 real_window=(r.real_start, r.real_end))
                for r in records)
            latest = records[-1].status if records else "no-executions"
            return ProductStatus(product=product_id, features=features,
                                 deadline=deadline, executions=executions,
                                 latest_status=latest)

    def get_resource_history(self, resource_id: str,
                             status_filter: str = SUCCESSFUL) -> list[HistoryRow]:
        """Completed executions of a resource, via the shipped history query."""
        with self.lock:
            self._require(resource_id, sc.RESOURCE)
            query = parse_query(resource_history_query(ex(resource_id), status_filter))
            rows = [
                HistoryRow(
                    execution_id=binding["executionId"].local,
                    emissions=binding["emissions"].numeric_value(),
                    energy_kwh=binding["costs"].numeric_value(),
                    quality=binding["quality"].numeric_value(),
                    real_start=binding["realStartTime"].text,
                    real_end=binding["realEndTime"].text,
                )
                for binding in eval_select(self.graph, query)
            ]
            rows.sort(key=lambda r: (r.real_start, r.execution_id))
            return rows

    def change_resource_performance(self, resource_id: str, plan_id: str,
                                    performance: Performance) -> Performance:
        """Rewrite the expected performance of a (resource, plan) pairing."""
        with self.lock:
            self._require(resource_id, sc.RESOURCE)
            capable = {
                t.object.local: t.object
                for t in self.graph.match(ex(resource_id), sc.CAPABLE_OF, None)
                if isinstance(t.object, Iri)
            }
            pair = capable.get(plan_id) or capable.get(f"{plan_id}@{resource_id}")
            if pair is None:
                raise UnknownEntityError(f"{resource_id} has no plan {plan_id}")
            perf_node = self._object(pair, sc.EXPECTED_PERFORMANCE)
            if not isinstance(perf_node, Iri):
                raise UnknownEntityError(f"{pair.local} has no expected performance")
            old = self._read_performance(perf_node)
            deletes = old.value_triples(perf_node) if old else []
            inserts = performance.value_triples(perf_node)
            self._apply(UpdateQuery(delete_patterns=deletes,
                                    insert_templates=inserts,
                                    where=list(deletes), filters=[]))
            return performance

    def expected_performance(self, resource_id: str, plan_id: str) -> Performance:
        """Current expected performance of a (resource, plan) pairing."""
        with self.lock:
            capable = {
                t.object.local: t.object
                for t in self.graph.match(ex(resource_id), sc.CAPABLE_OF, None)
                if isinstance(t.object, Iri)
            }
            pair = capable.get(plan_id) or capable.get(f"{plan_id}@{resource_id}")
            if pair is None:
                raise UnknownEntityError(f"{resource_id} has no plan {plan_id}")
            perf_node = self._object(pair, sc.EXPECTED_PERFORMANCE)
            perf = self._read_performance(perf_node) if isinstance(perf_node, Iri) else None
            if perf is None:
                raise UnknownEntityError(f"{pair.local} has no expected performance")
            return perf

    # -- OEE ----------------------------------------------------------------

    def compute_oee(self, resource_id: str,
                    window: tuple[int | float | str, int | float | str]) -> OeeReport:
        """Effectiveness of a resource over ``window`` (start, end).

        Busy time counts every execution span clipped to the window; an
        execution still running (no real end yet) counts as busy through
        the window end. Performance efficiency and quality are taken over
        successful executions whose real end falls inside the window, so a
        report computed live at the window boundary equals one recomputed
        later from a dump.
        """
        start_raw, end_raw = window
        w0 = iso_to_sim_minutes(to_iso(start_raw))
        w1 = iso_to_sim_minutes(to_iso(end_raw))
        if w1 <= w0:
            raise EmptyWindowError(f"window [{start_raw}, {end_raw}] is empty")
        with self.lock:
            self._require(resource_id, sc.RESOURCE)
            busy = 0.0
            expected_sum = 0.0
            real_sum = 0.0
            qualities: list[float] = []
            for t in self.graph.match(None, sc.RUNS_ON_RESOURCE, ex(resource_id)):
                record = self.read_execution(t.subject.local)
                if record.real_start is None:
                    continue
                rs = iso_to_sim_minutes(record.real_start)
                re_ = iso_to_sim_minutes(record.real_end) if record.real_end else w1
                busy += max(0.0, min(re_, w1) - max(rs, w0))
                if record.status != SUCCESSFUL or record.real_end is None:
                    continue
                finished = iso_to_sim_minutes(record.real_end)
                if not (w0 < finished <= w1):
                    continue
                real_sum += finished - rs
                expected_sum += float(self.expected_performance(
                    record.resource, record.plan).duration_min)
                if record.real_performance is not None:
                    qualities.append(float(record.real_performance.quality))
            uptime = busy / (w1 - w0)
            perf_efficiency = expected_sum / real_sum if real_sum > 0 else 1.0
            quality_rate = sum(qualities) / len(qualities) if qualities else 1.0
            return OeeReport(
                resource=resource_id,
                window_start=to_iso(start_raw),
                window_end=to_iso(end_raw),
                uptime=uptime,
                perf_efficiency=perf_efficiency,
                quality_rate=quality_rate,
                oee=uptime * min(perf_efficiency, 1.0) * quality_rate,
            )

    # -- service-level helpers ----------------------------------------------

    def run_select(self, text: str) -> tuple[list[str], list[dict[str, Term]]]:
        query = parse_query(text)
        if not isinstance(query, SelectQuery):
            raise DomainViolationError("not a SELECT query")
        with self.lock:
            return query.variables, eval_select(self.graph, query)

    def run_update(self, text: str) -> UpdateStats:
        query = parse_query(text)
        if isinstance(query, SelectQuery):
            raise DomainViolationError("not an update")
        with self.lock:
            stats = eval_update(self.graph, query)
            self.revision += 1
            return stats

    def build_bundle(self, files: Mapping[str, str]) -> tuple[PlantDescription, int]:
        """Ingest a CSV bundle; returns the description and triples added."""
        plant = parse_csv_bundle(files)
        with self.lock:
            inserted = build_abox(self.graph, plant)
            self.revision += 1
            return plant, inserted

    def dump(self) -> str:
        with self.lock:
            return dump_turtle(self.graph)


def load_knowledge_base(turtle_text: str) -> KnowledgeBase:
    """Reconstruct a knowledge base from a Turtle snapshot."""
    from .turtle import load_turtle

    g = new_graph()
    tbox = g.tbox
    loaded = load_turtle(turtle_text, graph=g)
    loaded.tbox = tbox
    return KnowledgeBase(loaded)
