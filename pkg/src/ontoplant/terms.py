"""RDF terms: IRIs, typed literals, and triples.

Literals are stored in a canonical lexical form so that equality, hashing,
set semantics, and serialisation all agree. Decimals are canonicalised with
:class:`decimal.Decimal`, which keeps values such as 110.25 exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .errors import MalformedIriError, MalformedTripleError

XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD + "string"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_BOOLEAN = XSD + "boolean"
XSD_DATETIME = XSD + "dateTime"

_NUMERIC_DATATYPES = (XSD_INTEGER, XSD_DECIMAL)


def canonical_decimal(value: Decimal | int | str) -> str:
    """Render a decimal without exponent, sign noise, or trailing zeros.

    ``110.2500`` -> ``110.25``; ``20.0`` -> ``20``; ``-0`` -> ``0``.
    At least four fractional digits survive canonicalisation untouched, so
    every value used in this package round-trips exactly.
    """
    try:
        dec = value if isinstance(value, Decimal) else Decimal(str(value))
    except InvalidOperation as exc:
        raise ValueError(f"not a decimal: {value!r}") from exc
    if not dec.is_finite():
        raise ValueError(f"not a finite decimal: {value!r}")
    text = format(dec, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("", "-", "-0"):
        text = "0"
    return text


@dataclass(frozen=True)
class Iri:
    """An IRI reference. Must be non-empty and free of whitespace."""

    text: str

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise MalformedIriError(f"invalid IRI: {self.text!r}")

    @property
    def local(self) -> str:
        """Fragment / last path segment, used as the short entity id."""
        for sep in ("#", "/"):
            if sep in self.text:
                return self.text.rsplit(sep, 1)[1]
        return self.text

    def __repr__(self):
        return f"Iri({self.text!r})"


@dataclass(frozen=True)
class Literal:
    """A typed literal with canonical lexical form."""

    text: str
    datatype: str = XSD_STRING

    def __post_init__(self):
        if self.datatype == XSD_INTEGER:
            try:
                canon = str(int(self.text))
            except ValueError as exc:
                raise ValueError(f"bad integer literal: {self.text!r}") from exc
        elif self.datatype == XSD_DECIMAL:
            canon = canonical_decimal(self.text)
        elif self.datatype == XSD_BOOLEAN:
            if self.text not in ("true", "false"):
                raise ValueError(f"bad boolean literal: {self.text!r}")
            canon = self.text
        else:
            canon = self.text
        object.__setattr__(self, "text", canon)

    @classmethod
    def string(cls, value: str) -> "Literal":
        return cls(value, XSD_STRING)

    @classmethod
    def integer(cls, value: int) -> "Literal":
        return cls(str(int(value)), XSD_INTEGER)

    @classmethod
    def decimal(cls, value: Decimal | int | str) -> "Literal":
        return cls(canonical_decimal(value), XSD_DECIMAL)

    @classmethod
    def boolean(cls, value: bool) -> "Literal":
        return cls("true" if value else "false", XSD_BOOLEAN)

    @classmethod
    def date_time(cls, iso_text: str) -> "Literal":
        return cls(iso_text, XSD_DATETIME)

    @property
    def is_numeric(self) -> bool:
        return self.datatype in _NUMERIC_DATATYPES

    def numeric_value(self) -> Decimal:
        if not self.is_numeric:
            raise ValueError(f"not a numeric literal: {self!r}")
        return Decimal(self.text)

    def __repr__(self):
        if self.datatype == XSD_STRING:
            return f"Literal({self.text!r})"
        return f"Literal({self.text!r}, {self.datatype.rsplit('#', 1)[1]})"


Term = Iri | Literal


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def canonical_text(term: Term) -> str:
    """Deterministic text form used for sorting and result tables."""
    if isinstance(term, Iri):
        return f"<{term.text}>"
    if term.datatype == XSD_STRING:
        return f'"{_escape(term.text)}"'
    return f'"{_escape(term.text)}"^^<{term.datatype}>'


@dataclass(frozen=True)
class Triple:
    """Subject-predicate-object statement; subject and predicate are IRIs."""

    subject: Iri
    predicate: Iri
    object: Term

    def __post_init__(self):
        if not isinstance(self.subject, Iri):
            raise MalformedTripleError(f"triple subject must be an IRI: {self.subject!r}")
        if not isinstance(self.predicate, Iri):
            raise MalformedTripleError(f"triple predicate must be an IRI: {self.predicate!r}")
        if not isinstance(self.object, (Iri, Literal)):
            raise MalformedTripleError(f"triple object must be a term: {self.object!r}")

    def __iter__(self):
        """Triples unpack as (subject, predicate, object), so a concrete
        triple can stand in wherever a pattern is expected."""
        yield self.subject
        yield self.predicate
        yield self.object

    def sort_key(self) -> tuple[str, str, str]:
        return (
            canonical_text(self.subject),
            canonical_text(self.predicate),
            canonical_text(self.object),
        )
