"""Reading and writing datasets in the Attribute Relation File Format (ARFF).

Supported dialect: ``%`` comment lines, ``@relation``, ``@attribute`` with
``numeric``/``real``/``integer`` (all stored as 64-bit float), ``string``, or a
``{v1,v2,...}`` nominal specification, then ``@data`` with comma-separated
rows. ``?`` denotes a missing value. Keywords are case-insensitive; names and
nominal values may be single-quoted (embedded commas and spaces preserved,
``\\'`` escapes a quote). Date, relational and sparse-ARFF syntax are rejected
as unsupported.

Cell values are plain Python values: float for numeric, int (index into the
attribute's category list) for nominal, str for string, and None for missing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Union

NUMERIC = "numeric"
NOMINAL = "nominal"
STRING = "string"

#: Cell marker for a missing value.
MISSING = None

Cell = Union[float, int, str, None]


class ArffError(ValueError):
    """Raised for any syntactic or semantic problem in an ARFF document."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class AttributeDecl:
    name: str
    kind: str  # NUMERIC, NOMINAL or STRING
    categories: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if not self.name:
            raise ArffError("attribute name must be non-empty")
        if self.kind not in (NUMERIC, NOMINAL, STRING):
            raise ArffError(f"unknown attribute kind {self.kind!r}")
        if self.kind == NOMINAL:
            if not self.categories:
                raise ArffError(f"nominal attribute {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise ArffError(f"nominal attribute {self.name!r} has duplicate categories")
        elif self.categories is not None:
            raise ArffError(f"attribute {self.name!r}: categories only allowed for nominal kind")


@dataclass
class ArffRelation:
    relation_name: str
    attributes: list[AttributeDecl]
    rows: list[list[Cell]]

    def validate(self) -> None:
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ArffError("duplicate attribute names")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.attributes):
                raise ArffError(f"row {i} has {len(row)} values, expected {len(self.attributes)}")
            for attr, value in zip(self.attributes, row):
                _check_cell(attr, value)


def _check_cell(attr: AttributeDecl, value: Cell) -> None:
    if value is MISSING:
        return
    if attr.kind == NUMERIC:
        if not isinstance(value, float) or not math.isfinite(value):
            raise ArffError(f"attribute {attr.name!r}: expected finite float, got {value!r}")
    elif attr.kind == NOMINAL:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ArffError(f"attribute {attr.name!r}: expected category index, got {value!r}")
        if not 0 <= value < len(attr.categories):
            raise ArffError(f"attribute {attr.name!r}: category index {value} out of range")
    else:
        if not isinstance(value, str):
            raise ArffError(f"attribute {attr.name!r}: expected string, got {value!r}")


# ---------------------------------------------------------------------------
# parsing


def _split_quoted(text: str, lineno: int, sep: str = ",") -> list[tuple[str, bool]]:
    """Split on `sep` outside single quotes; returns (token, was_quoted) pairs."""
    out: list[tuple[str, bool]] = []
    buf: list[str] = []
    quoted = False
    in_quote = False
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if in_quote:
            if c == "\\" and i + 1 < n and text[i + 1] in ("'", "\\"):
                buf.append(text[i + 1])
                i += 2
                continue
            if c == "'":
                in_quote = False
                i += 1
                continue
            buf.append(c)
            i += 1
        else:
            if c == "'":
                in_quote = True
                quoted = True
                i += 1
            elif c == sep:
                out.append(("".join(buf) if quoted else "".join(buf).strip(), quoted))
                buf = []
                quoted = False
                i += 1
            else:
                buf.append(c)
                i += 1
    if in_quote:
        raise ArffError("unterminated quote", lineno)
    out.append(("".join(buf) if quoted else "".join(buf).strip(), quoted))
    return out


def _parse_name_and_rest(text: str, lineno: int) -> tuple[str, str]:
    """Parse a possibly-quoted leading token, return (token, remainder)."""
    text = text.lstrip()
    if text.startswith("'"):
        buf = []
        i = 1
        while i < len(text):
            c = text[i]
            if c == "\\" and i + 1 < len(text) and text[i + 1] in ("'", "\\"):
                buf.append(text[i + 1])
                i += 2
                continue
            if c == "'":
                return "".join(buf), text[i + 1:]
            buf.append(c)
            i += 1
        raise ArffError("unterminated quote", lineno)
    parts = text.split(None, 1)
    if not parts:
        raise ArffError("expected a name", lineno)
    return parts[0], parts[1] if len(parts) > 1 else ""


def _parse_attribute(rest: str, lineno: int) -> AttributeDecl:
    name, type_text = _parse_name_and_rest(rest, lineno)
    if not name:
        raise ArffError("empty attribute name", lineno)
    type_text = type_text.strip()
    if not type_text:
        raise ArffError(f"attribute {name!r} has no type", lineno)
    if type_text.startswith("{"):
        if not type_text.endswith("}"):
            raise ArffError(f"attribute {name!r}: unterminated nominal specification", lineno)
        inner = type_text[1:-1]
        cats = [tok for tok, _ in _split_quoted(inner, lineno)]
        if any(c == "" for c in cats):
            raise ArffError(f"attribute {name!r}: empty nominal category", lineno)
        if len(set(cats)) != len(cats):
            raise ArffError(f"attribute {name!r}: duplicate nominal categories", lineno)
        return AttributeDecl(name, NOMINAL, tuple(cats))
    keyword = type_text.split()[0].lower()
    if keyword in ("numeric", "real", "integer"):
        return AttributeDecl(name, NUMERIC)
    if keyword == "string":
        return AttributeDecl(name, STRING)
    if keyword == "date":
        raise ArffError(f"attribute {name!r}: date attributes are unsupported", lineno)
    if keyword == "relational":
        raise ArffError(f"attribute {name!r}: relational attributes are unsupported", lineno)
    raise ArffError(f"attribute {name!r}: unknown type {type_text!r}", lineno)


def _parse_data_row(line: str, attributes: list[AttributeDecl], lineno: int) -> list[Cell]:
    if line.lstrip().startswith("{"):
        raise ArffError("sparse ARFF data rows are unsupported", lineno)
    tokens = _split_quoted(line, lineno)
    if len(tokens) != len(attributes):
        raise ArffError(
            f"row has {len(tokens)} values but {len(attributes)} attributes are declared", lineno
        )
    row: list[Cell] = []
    for attr, (tok, quoted) in zip(attributes, tokens):
        if not quoted and tok == "?":
            row.append(MISSING)
            continue
        if attr.kind == NUMERIC:
            try:
                value = float(tok)
            except ValueError:
                raise ArffError(f"attribute {attr.name!r}: invalid numeric value {tok!r}", lineno)
            if not math.isfinite(value):
                raise ArffError(f"attribute {attr.name!r}: non-finite value {tok!r}", lineno)
            row.append(value)
        elif attr.kind == NOMINAL:
            try:
                row.append(attr.categories.index(tok))
            except ValueError:
                raise ArffError(
                    f"attribute {attr.name!r}: value {tok!r} not in declared categories", lineno
                )
        else:
            row.append(tok)
    return row


def parse_arff(source: Union[str, IO[str], Iterable[str]]) -> ArffRelation:
    """Parse an ARFF document into an :class:`ArffRelation`.

    `source` may be a string, an open text file, or an iterable of lines.
    Raises :class:`ArffError` with a line number on any malformed input.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = [ln.rstrip("\r\n") for ln in source]

    relation_name: Optional[str] = None
    attributes: list[AttributeDecl] = []
    rows: list[list[Cell]] = []
    in_data = False

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n").strip()
        if not line or line.startswith("%"):
            continue
        if in_data:
            rows.append(_parse_data_row(line, attributes, lineno))
            continue
        lower = line.lower()
        if lower.startswith("@relation"):
            if relation_name is not None:
                raise ArffError("duplicate @relation declaration", lineno)
            name, rest = _parse_name_and_rest(line[len("@relation"):], lineno)
            if rest.strip():
                raise ArffError(f"unexpected text after relation name: {rest.strip()!r}", lineno)
            relation_name = name
        elif lower.startswith("@attribute"):
            if relation_name is None:
                raise ArffError("@attribute before @relation", lineno)
            attr = _parse_attribute(line[len("@attribute"):], lineno)
            if attr.name in {a.name for a in attributes}:
                raise ArffError(f"duplicate attribute name {attr.name!r}", lineno)
            attributes.append(attr)
        elif lower.startswith("@data"):
            if relation_name is None:
                raise ArffError("@data before @relation", lineno)
            if not attributes:
                raise ArffError("@data with no attributes declared", lineno)
            if line[len("@data"):].strip():
                raise ArffError("unexpected text after @data", lineno)
            in_data = True
        else:
            raise ArffError(f"unrecognized declaration: {line!r}", lineno)

    if relation_name is None:
        raise ArffError("missing @relation declaration")
    if not in_data:
        raise ArffError("missing @data section")
    return ArffRelation(relation_name, attributes, rows)


# ---------------------------------------------------------------------------
# writing


def _quote(text: str) -> str:
    needs = text == "" or text == "?" or any(c in text for c in " \t,'%{}")
    if not needs:
        return text
    return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _format_cell(attr: AttributeDecl, value: Cell) -> str:
    if value is MISSING:
        return "?"
    if attr.kind == NUMERIC:
        return repr(value)
    if attr.kind == NOMINAL:
        return _quote(attr.categories[value])
    return _quote(value)


def write_arff(relation: ArffRelation) -> str:
    """Serialize a relation so that :func:`parse_arff` round-trips it exactly."""
    relation.validate()
    out = [f"@relation {_quote(relation.relation_name)}"]
    for attr in relation.attributes:
        if attr.kind == NOMINAL:
            spec = "{" + ",".join(_quote(c) for c in attr.categories) + "}"
        else:
            spec = attr.kind
        out.append(f"@attribute {_quote(attr.name)} {spec}")
    out.append("@data")
    for row in relation.rows:
        out.append(",".join(_format_cell(a, v) for a, v in zip(relation.attributes, row)))
    return "\n".join(out) + "\n"
