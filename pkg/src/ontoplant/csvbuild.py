"""CSV bundle ingestion: the "plug and produce" path into the knowledge base.

Engineers describe a plant in four CSV files (UTF-8, header row, commas,
quoted fields allowed):

- ``resources.csv``   ``id,kind,capableOf`` — kind is machine/robot/buffer,
  capableOf is a semicolon-separated list of plan ids.
- ``processes.csv``   ``id,realizes,machine,durationMin,energyKwh,emissions,quality``
  — one row per (plan, machine) pairing, so machine-specific expected
  performance is expressible. The pairing is materialised as its own plan
  instance named ``<plan>@<machine>``.
- ``features.csv``    ``id,description`` — the description stays at the CSV
  level; the knowledge base stores only declared vocabulary.
- ``products.csv``    ``id,features,deadline,objective`` — features is
  semicolon-separated, objective is ``metric=value`` pairs joined by
  semicolons.

Parsing validates field domains and cross-references before anything is
written, then :func:`build_abox` populates the instance level idempotently.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Mapping

from . import schema as sc
from .errors import CsvSyntaxError, DanglingReferenceError, DomainViolationError
from .graph import Graph
from .terms import Iri, Literal, Triple, canonical_decimal

REQUIRED_FILES = ("resources.csv", "processes.csv", "features.csv", "products.csv")

_HEADERS = {
    "resources.csv": ["id", "kind", "capableOf"],
    "processes.csv": ["id", "realizes", "machine", "durationMin", "energyKwh",
                      "emissions", "quality"],
    "features.csv": ["id", "description"],
    "products.csv": ["id", "features", "deadline", "objective"],
}

_KINDS = {"machine": sc.MACHINE, "robot": sc.ROBOT, "buffer": sc.BUFFER}

_ID_RE = re.compile(r'^[^\s<>"{}|\\^`]+$')
_DEADLINE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}(:\d{2})?Z$")


@dataclass(frozen=True)
class ResourceRow:
    id: str
    kind: str
    capable_of: tuple[str, ...]


@dataclass(frozen=True)
class PlanRow:
    id: str
    realizes: str
    machine: str
    duration_min: Decimal
    energy_kwh: Decimal
    emissions: Decimal
    quality: Decimal

    @property
    def pair_id(self) -> str:
        return f"{self.id}@{self.machine}"


@dataclass(frozen=True)
class FeatureRow:
    id: str
    description: str


@dataclass(frozen=True)
class CoefficientSpec:
    metric: str
    value: Decimal


@dataclass(frozen=True)
class ProductRow:
    id: str
    features: tuple[str, ...]
    deadline: str
    coefficients: tuple[CoefficientSpec, ...]


@dataclass(frozen=True)
class PlantDescription:
    resources: tuple[ResourceRow, ...]
    process_plans: tuple[PlanRow, ...]
    features: tuple[FeatureRow, ...]
    products: tuple[ProductRow, ...]


def _rows(name: str, text: str) -> list[tuple[int, list[str]]]:
    try:
        parsed = list(csv.reader(io.StringIO(text)))
    except csv.Error as exc:
        raise CsvSyntaxError(name, 0, f"unreadable CSV: {exc}")
    rows = [(i + 1, row) for i, row in enumerate(parsed) if row]
    if not rows:
        raise CsvSyntaxError(name, 1, "missing header row")
    header_line, header = rows[0]
    if [h.strip() for h in header] != _HEADERS[name]:
        raise CsvSyntaxError(name, header_line,
                             f"expected header {','.join(_HEADERS[name])}")
    body = []
    for line, row in rows[1:]:
        if len(row) != len(_HEADERS[name]):
            raise CsvSyntaxError(name, line,
                                 f"expected {len(_HEADERS[name])} fields, found {len(row)}")
        body.append((line, [f.strip() for f in row]))
    return body


def _check_id(name: str, line: int, value: str, field: str) -> str:
    if not _ID_RE.match(value):
        raise DomainViolationError(f"invalid id {value!r}", file=name, line=line, field=field)
    return value


def _decimal(name: str, line: int, value: str, field: str) -> Decimal:
    try:
        return Decimal(canonical_decimal(value))
    except (InvalidOperation, ValueError):
        raise DomainViolationError(f"not a decimal: {value!r}",
                                   file=name, line=line, field=field)


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(";") if part.strip())


def parse_csv_bundle(files: Mapping[str, str]) -> PlantDescription:
    """Parse and validate the four-file bundle into a plant description."""
    for name in REQUIRED_FILES:
        if name not in files:
            raise CsvSyntaxError(name, 0, "file missing from bundle")

    resources: list[ResourceRow] = []
    seen_ids: dict[str, int] = {}
    for line, (rid, kind, capable) in _rows("resources.csv", files["resources.csv"]):
        _check_id("resources.csv", line, rid, "id")
        if rid in seen_ids:
            raise CsvSyntaxError("resources.csv", line, f"duplicate resource id {rid!r}")
        seen_ids[rid] = line
        if kind not in _KINDS:
            raise DomainViolationError(f"unknown kind {kind!r}",
                                       file="resources.csv", line=line, field="kind")
        resources.append(ResourceRow(rid, kind, _split_list(capable)))

    plans: list[PlanRow] = []
    seen_pairs: set[tuple[str, str]] = set()
    for line, (pid, realizes, machine, dur, energy, emis, qual) in \
            _rows("processes.csv", files["processes.csv"]):
        _check_id("processes.csv", line, pid, "id")
        _check_id("processes.csv", line, machine, "machine")
        if (pid, machine) in seen_pairs:
            raise CsvSyntaxError("processes.csv", line,
                                 f"duplicate plan/machine pair {pid}@{machine}")
        seen_pairs.add((pid, machine))
        row = PlanRow(
            id=pid, realizes=realizes, machine=machine,
            duration_min=_decimal("processes.csv", line, dur, "durationMin"),
            energy_kwh=_decimal("processes.csv", line, energy, "energyKwh"),
            emissions=_decimal("processes.csv", line, emis, "emissions"),
            quality=_decimal("processes.csv", line, qual, "quality"),
        )
        if row.duration_min <= 0:
            raise DomainViolationError("durationMin must be > 0",
                                       file="processes.csv", line=line, field="durationMin")
        if row.energy_kwh < 0:
            raise DomainViolationError("energyKwh must be >= 0",
                                       file="processes.csv", line=line, field="energyKwh")
        if row.emissions < 0:
            raise DomainViolationError("emissions must be >= 0",
                                       file="processes.csv", line=line, field="emissions")
        if not 0 <= row.quality <= 1:
            raise DomainViolationError("quality must be within [0, 1]",
                                       file="processes.csv", line=line, field="quality")
        plans.append(row)

    features: list[FeatureRow] = []
    feature_ids: set[str] = set()
    for line, (fid, description) in _rows("features.csv", files["features.csv"]):
        _check_id("features.csv", line, fid, "id")
        if fid in feature_ids:
            raise CsvSyntaxError("features.csv", line, f"duplicate feature id {fid!r}")
        feature_ids.add(fid)
        features.append(FeatureRow(fid, description))

    products: list[ProductRow] = []
    product_ids: set[str] = set()
    for line, (pid, feats, deadline, objective) in _rows("products.csv", files["products.csv"]):
        _check_id("products.csv", line, pid, "id")
        if pid in product_ids:
            raise CsvSyntaxError("products.csv", line, f"duplicate product id {pid!r}")
        product_ids.add(pid)
        if not _DEADLINE_RE.match(deadline):
            raise DomainViolationError(
                f"deadline must be ISO-8601 UTC like 2023-01-02T00:00:00Z, got {deadline!r}",
                file="products.csv", line=line, field="deadline")
        coefficients = []
        for part in _split_list(objective):
            if "=" not in part:
                raise CsvSyntaxError("products.csv", line,
                                     f"objective entry {part!r} is not metric=value")
            metric, _, raw = part.partition("=")
            coefficients.append(CoefficientSpec(
                metric.strip(),
                _decimal("products.csv", line, raw.strip(), "objective")))
        products.append(ProductRow(pid, _split_list(feats), deadline, tuple(coefficients)))

    # Cross-reference checks, in file order for stable error reporting.
    plan_ids = {p.id for p in plans}
    pair_ids = {(p.id, p.machine) for p in plans}
    resource_ids = {r.id for r in resources}
    for line, (rid, _, capable) in _rows("resources.csv", files["resources.csv"]):
        for plan in _split_list(capable):
            if plan not in plan_ids:
                raise DanglingReferenceError("resources.csv", line, plan)
            if (plan, rid) not in pair_ids:
                raise DanglingReferenceError("resources.csv", line, f"{plan}@{rid}")
    for line, row in _rows("processes.csv", files["processes.csv"]):
        if row[1] not in feature_ids:
            raise DanglingReferenceError("processes.csv", line, row[1])
        if row[2] not in resource_ids:
            raise DanglingReferenceError("processes.csv", line, row[2])
    for line, row in _rows("products.csv", files["products.csv"]):
        for feat in _split_list(row[1]):
            if feat not in feature_ids:
                raise DanglingReferenceError("products.csv", line, feat)

    return PlantDescription(tuple(resources), tuple(plans), tuple(features), tuple(products))


def render_csv_bundle(plant: PlantDescription) -> dict[str, str]:
    """Render a plant description back to CSV text; inverse of parsing."""
    def write(header: list[str], rows: list[list[str]]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()

    return {
        "resources.csv": write(_HEADERS["resources.csv"], [
            [r.id, r.kind, ";".join(r.capable_of)] for r in plant.resources]),
        "processes.csv": write(_HEADERS["processes.csv"], [
            [p.id, p.realizes, p.machine, canonical_decimal(p.duration_min),
             canonical_decimal(p.energy_kwh), canonical_decimal(p.emissions),
             canonical_decimal(p.quality)] for p in plant.process_plans]),
        "features.csv": write(_HEADERS["features.csv"], [
            [f.id, f.description] for f in plant.features]),
        "products.csv": write(_HEADERS["products.csv"], [
            [p.id, ";".join(p.features), p.deadline,
             ";".join(f"{c.metric}={canonical_decimal(c.value)}" for c in p.coefficients)]
            for p in plant.products]),
    }


def _owned_subjects(plant: PlantDescription) -> list[Iri]:
    subjects: list[Iri] = []
    for r in plant.resources:
        subjects.append(sc.ex(r.id))
    for p in plant.process_plans:
        subjects.append(sc.ex(p.pair_id))
        subjects.append(sc.ex(f"{p.pair_id}_expected"))
    for f in plant.features:
        subjects.append(sc.ex(f.id))
    for prod in plant.products:
        subjects.append(sc.ex(prod.id))
        subjects.append(sc.ex(f"{prod.id}_objective"))
        for c in prod.coefficients:
            subjects.append(sc.ex(f"{prod.id}_objective_{c.metric}"))
    return subjects


def build_abox(graph: Graph, plant: PlantDescription) -> int:
    """Populate the instance level from a validated plant description.

    Rebuilding with the same description leaves the graph unchanged;
    rebuilding after edits replaces the owned entity descriptions (their
    subject triples) rather than accumulating duplicates. Returns the
    number of triples inserted.
    """
    for subject in _owned_subjects(plant):
        graph.remove(subject=subject)

    triples: list[Triple] = []
    for r in plant.resources:
        iri = sc.ex(r.id)
        triples.append(Triple(iri, sc.RDF_TYPE, _KINDS[r.kind]))
        for plan in r.capable_of:
            triples.append(Triple(iri, sc.CAPABLE_OF, sc.ex(f"{plan}@{r.id}")))
    for p in plant.process_plans:
        pair = sc.ex(p.pair_id)
        perf = sc.ex(f"{p.pair_id}_expected")
        triples.append(Triple(pair, sc.RDF_TYPE, sc.PROCESS_PLAN))
        triples.append(Triple(pair, sc.REALIZES, sc.ex(p.realizes)))
        triples.append(Triple(pair, sc.EXPECTED_PERFORMANCE, perf))
        triples.append(Triple(perf, sc.RDF_TYPE, sc.PERFORMANCE))
        triples.append(Triple(perf, sc.DURATION, Literal.decimal(p.duration_min)))
        triples.append(Triple(perf, sc.ENERGY_COST, Literal.decimal(p.energy_kwh)))
        triples.append(Triple(perf, sc.EMISSIONS, Literal.decimal(p.emissions)))
        triples.append(Triple(perf, sc.QUALITY, Literal.decimal(p.quality)))
    for f in plant.features:
        triples.append(Triple(sc.ex(f.id), sc.RDF_TYPE, sc.FEATURE))
    for prod in plant.products:
        iri = sc.ex(prod.id)
        triples.append(Triple(iri, sc.RDF_TYPE, sc.PRODUCT))
        for feat in prod.features:
            triples.append(Triple(iri, sc.DEFINES, sc.ex(feat)))
        triples.append(Triple(iri, sc.DEADLINE, Literal.date_time(prod.deadline)))
        if prod.coefficients:
            objective = sc.ex(f"{prod.id}_objective")
            triples.append(Triple(iri, sc.HAS_OBJECTIVE_FUNCTION, objective))
            triples.append(Triple(objective, sc.RDF_TYPE, sc.OBJECTIVE_FUNCTION))
            for c in prod.coefficients:
                coef = sc.ex(f"{prod.id}_objective_{c.metric}")
                triples.append(Triple(objective, sc.HAS_COEFFICIENT, coef))
                triples.append(Triple(coef, sc.RDF_TYPE, sc.COEFFICIENT))
                triples.append(Triple(coef, sc.COEFFICIENT_FOR, Literal.string(c.metric)))
                triples.append(Triple(coef, sc.HAS_VALUE, Literal.decimal(c.value)))
    return graph.insert_all(triples)


def load_csv_dir(path) -> dict[str, str]:
    """Read the four bundle files from a directory."""
    from pathlib import Path
    base = Path(path)
    out = {}
    for name in REQUIRED_FILES:
        f = base / name
        if f.exists():
            out[name] = f.read_text(encoding="utf-8")
    return out
