"""HTTP/JSON service exposing the knowledge base to agents and engineers.

Response envelope (bit-exact, shared by every endpoint):

    success  {"ok": true,  "data": {...}}
    failure  {"ok": false, "error": {"code": "<kind>", "message": "<text>"}}

Error codes are the ``code`` attributes of the domain exceptions, so the
HTTP surface maps one-to-one onto runtime errors. Successful mutations
echo the affected entity id plus the knowledge-base revision counter,
which increases by exactly one per applied write. Timestamps are ISO-8601
UTC strings; metric values are JSON numbers.

Raw queries go to ``POST /query`` with the query text as the body;
updates additionally require the header ``X-Write: true``.
"""

from __future__ import annotations

from decimal import Decimal
from typing import Any

from fastapi import FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from .errors import (
    CsvSyntaxError, DanglingReferenceError, DomainViolationError,
    EmptyWindowError, IllegalTransitionError, InvalidWindowError,
    MissingFieldError, OntoplantError, ProtectedTripleError,
    QuerySyntaxError, UnboundTemplateVariableError, UnknownEntityError,
    UnsupportedFeatureError,
)
from .runtime import KnowledgeBase, Performance, ProcessExecution
from .sparql import SelectQuery, parse_query
from .terms import canonical_text

_STATUS_BY_ERROR: list[tuple[type[OntoplantError], int]] = [
    (UnknownEntityError, 404),
    (IllegalTransitionError, 409),
    (ProtectedTripleError, 409),
    (QuerySyntaxError, 400),
    (UnsupportedFeatureError, 400),
    (UnboundTemplateVariableError, 400),
    (InvalidWindowError, 422),
    (EmptyWindowError, 422),
    (MissingFieldError, 422),
    (DomainViolationError, 422),
    (CsvSyntaxError, 422),
    (DanglingReferenceError, 422),
]


def _ok(data: dict[str, Any], status: int = 200) -> JSONResponse:
    return JSONResponse({"ok": True, "data": data}, status_code=status)


def _fail(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"ok": False, "error": {"code": code, "message": message}},
                        status_code=status)


def _number(value: Decimal) -> float:
    return float(value)


def _execution_json(record: ProcessExecution) -> dict[str, Any]:
    perf = None
    if record.real_performance is not None:
        perf = {
            "durationMin": _number(record.real_performance.duration_min),
            "energyKwh": _number(record.real_performance.energy_kwh),
            "emissions": _number(record.real_performance.emissions),
            "quality": _number(record.real_performance.quality),
        }
    return {
        "executionId": record.id,
        "product": record.product,
        "plan": record.plan,
        "resource": record.resource,
        "status": record.status,
        "plannedStart": record.planned_start,
        "plannedEnd": record.planned_end,
        "realStart": record.real_start,
        "realEnd": record.real_end,
        "realPerformance": perf,
        "errorMessage": record.error_message,
    }


def _performance_from(body: dict[str, Any]) -> Performance:
    if not isinstance(body, dict) or "durationMin" not in body or "energyKwh" not in body:
        raise DomainViolationError("performance needs durationMin and energyKwh")
    return Performance(
        duration_min=Decimal(str(body["durationMin"])),
        energy_kwh=Decimal(str(body["energyKwh"])),
        emissions=Decimal(str(body.get("emissions", 0))),
        quality=Decimal(str(body.get("quality", 1))),
    )


def create_app(kb: KnowledgeBase) -> FastAPI:
    app = FastAPI(title="ontoplant knowledge base", docs_url=None, redoc_url=None)

    @app.exception_handler(OntoplantError)
    def domain_error(_request: Request, exc: OntoplantError) -> JSONResponse:
        for error_type, status in _STATUS_BY_ERROR:
            if isinstance(exc, error_type):
                return _fail(status, exc.code, str(exc))
        return _fail(500, exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    def invalid_request(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return _fail(400, "invalid-request", str(exc))

    @app.exception_handler(Exception)
    def unexpected_error(_request: Request, exc: Exception) -> JSONResponse:
        # Same envelope as domain errors, with no internal detail leaked.
        return _fail(500, "internal", "internal error")

    @app.post("/executions")
    def add_execution(body: dict) -> JSONResponse:
        for field in ("product", "plan", "plannedStart", "plannedEnd"):
            if field not in body:
                raise DomainViolationError(f"missing field {field!r}", field=field)
        execution_id = kb.add_planned_execution_data(
            product=str(body["product"]),
            plan=str(body["plan"]),
            planned_start=body["plannedStart"],
            planned_end=body["plannedEnd"],
            resource=str(body["resource"]) if body.get("resource") is not None else None,
        )
        return _ok({"executionId": execution_id, "revision": kb.revision}, status=201)

    @app.patch("/executions/{execution_id}")
    def patch_execution(execution_id: str, body: dict) -> JSONResponse:
        kwargs: dict[str, Any] = {}
        for json_name, kwarg in (("status", "status"), ("resource", "resource"),
                                 ("plan", "plan"),
                                 ("plannedStart", "planned_start"),
                                 ("plannedEnd", "planned_end"),
                                 ("realStart", "real_start"), ("realEnd", "real_end"),
                                 ("errorMessage", "error_message")):
            if body.get(json_name) is not None:
                kwargs[kwarg] = body[json_name]
        if body.get("realPerformance") is not None:
            kwargs["real_performance"] = _performance_from(body["realPerformance"])
        record = kb.update_execution_data(execution_id, **kwargs)
        return _ok({"execution": _execution_json(record), "revision": kb.revision})

    @app.get("/products/{product_id}/status")
    def product_status(product_id: str) -> JSONResponse:
        status = kb.get_product_status(product_id)
        return _ok({
            "product": status.product,
            "features": list(status.features),
            "deadline": status.deadline,
            "latestStatus": status.latest_status,
            "executions": [
                {
                    "executionId": e.id,
                    "status": e.status,
                    "plannedWindow": list(e.planned_window),
                    "realWindow": list(e.real_window),
                }
                for e in status.executions
            ],
        })

    @app.get("/resources/{resource_id}/history")
    def resource_history(resource_id: str, status: str = "successful") -> JSONResponse:
        rows = kb.get_resource_history(resource_id, status_filter=status)
        return _ok({
            "resource": resource_id,
            "rows": [
                {
                    "executionId": r.execution_id,
                    "emissions": _number(r.emissions),
                    "energyKwh": _number(r.energy_kwh),
                    "quality": _number(r.quality),
                    "realStart": r.real_start,
                    "realEnd": r.real_end,
                }
                for r in rows
            ],
        })

    @app.patch("/resources/{resource_id}/performance")
    def patch_performance(resource_id: str, body: dict) -> JSONResponse:
        if "plan" not in body:
            raise DomainViolationError("missing field 'plan'", field="plan")
        performance = kb.change_resource_performance(
            resource_id, str(body["plan"]), _performance_from(body))
        return _ok({
            "resource": resource_id,
            "plan": str(body["plan"]),
            "performance": {
                "durationMin": _number(performance.duration_min),
                "energyKwh": _number(performance.energy_kwh),
                "emissions": _number(performance.emissions),
                "quality": _number(performance.quality),
            },
            "revision": kb.revision,
        })

    @app.post("/query")
    async def query(request: Request) -> JSONResponse:
        text = (await request.body()).decode("utf-8")
        parsed = parse_query(text)
        if isinstance(parsed, SelectQuery):
            variables, rows = kb.run_select(text)
            return _ok({
                "vars": variables,
                "rows": [
                    {name: canonical_text(binding[name]) for name in variables}
                    for binding in rows
                ],
            })
        if request.headers.get("X-Write", "").lower() != "true":
            return _fail(403, "write-not-allowed",
                         "updates require the header 'X-Write: true'")
        stats = kb.run_update(text)
        return _ok({"inserted": stats.inserted, "deleted": stats.deleted,
                    "revision": kb.revision})

    @app.post("/build")
    async def build(files: list[UploadFile]) -> JSONResponse:
        bundle: dict[str, str] = {}
        for upload in files:
            name = upload.filename or ""
            raw = await upload.read()
            try:
                bundle[name] = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise CsvSyntaxError(name, 0, "file is not valid UTF-8")
        plant, inserted = kb.build_bundle(bundle)
        return _ok({
            "resources": len(plant.resources),
            "processPlans": len(plant.process_plans),
            "features": len(plant.features),
            "products": len(plant.products),
            "insertedTriples": inserted,
            "revision": kb.revision,
        })

    @app.get("/dump")
    def dump() -> PlainTextResponse:
        return PlainTextResponse(kb.dump(), media_type="text/turtle")

    return app
