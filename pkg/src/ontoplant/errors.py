"""Exception hierarchy shared by every ontoplant layer.

Each error carries a stable ``code`` used verbatim by the HTTP facade, so
adding an exception type here is an API-visible change.
"""

from __future__ import annotations


class OntoplantError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "internal"


class MalformedIriError(OntoplantError):
    code = "malformed-iri"


class MalformedTripleError(OntoplantError):
    code = "malformed-triple"


class TurtleParseError(OntoplantError):
    """Turtle input rejected; ``line`` and ``col`` are 1-based."""

    code = "turtle-parse"

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class QuerySyntaxError(OntoplantError):
    """Query text rejected; ``expected`` describes what the parser wanted."""

    code = "syntax-error"

    def __init__(self, message: str, line: int, col: int, expected: str = ""):
        detail = f"line {line}, col {col}: {message}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)
        self.line = line
        self.col = col
        self.expected = expected


class UnsupportedFeatureError(OntoplantError):
    """Query uses a keyword outside the supported subset."""

    code = "unsupported-feature"

    def __init__(self, keyword: str):
        super().__init__(f"unsupported query feature: {keyword}")
        self.keyword = keyword


class UnboundTemplateVariableError(OntoplantError):
    code = "unbound-template-variable"

    def __init__(self, variable: str):
        super().__init__(f"template variable ?{variable} is not bound by WHERE")
        self.variable = variable


class ProtectedTripleError(OntoplantError):
    """An update tried to delete a schema (TBox) triple through the facade."""

    code = "protected-triple"


class CsvSyntaxError(OntoplantError):
    code = "csv-syntax"

    def __init__(self, file: str, line: int, message: str):
        super().__init__(f"{file}:{line}: {message}")
        self.file = file
        self.line = line


class DanglingReferenceError(OntoplantError):
    code = "dangling-reference"

    def __init__(self, file: str, line: int, ref: str):
        super().__init__(f"{file}:{line}: reference to undeclared id {ref!r}")
        self.file = file
        self.line = line
        self.ref = ref


class DomainViolationError(OntoplantError):
    code = "domain-violation"

    def __init__(self, message: str, file: str | None = None, line: int | None = None,
                 field: str | None = None):
        prefix = f"{file}:{line}: " if file is not None else ""
        super().__init__(prefix + message)
        self.file = file
        self.line = line
        self.field = field


class UnknownEntityError(OntoplantError):
    code = "unknown-entity"

    def __init__(self, entity: str):
        super().__init__(f"unknown entity: {entity}")
        self.entity = entity


class InvalidWindowError(OntoplantError):
    code = "invalid-window"


class EmptyWindowError(OntoplantError):
    code = "empty-window"


class IllegalTransitionError(OntoplantError):
    code = "illegal-transition"

    def __init__(self, current: str, target: str):
        super().__init__(f"illegal status transition: {current} -> {target}")
        self.current = current
        self.target = target


class MissingFieldError(OntoplantError):
    code = "missing-field"

    def __init__(self, status: str, field: str):
        super().__init__(f"status {status!r} requires field {field!r}")
        self.status = status
        self.field = field


class NoCapableResourceError(OntoplantError):
    code = "no-capable-resource"

    def __init__(self, product: str):
        super().__init__(f"no resource is capable of processing {product}")
        self.product = product


class BudgetInfeasibleError(OntoplantError):
    code = "budget-infeasible"


class ConfigError(OntoplantError):
    code = "config-error"
