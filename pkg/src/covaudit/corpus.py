"""Load, validate, subset and field-classify the local publication list.

The corpus file is a delimiter-separated UTF-8 table, one record per line,
with a header row. Fixed columns::

    record_id  title  doi  year  doc_type  language  access
    institutes  author_count  journal  volume  issue  first_page

``institutes`` is ``|``-separated. Per benchmark database two more columns
may appear: ``covered_<db>`` (boolean) and ``cites_<db>`` (non-negative
integer, empty when unknown). Unknown columns are ignored with a warning.

Ingestion is pure and single threaded; the resulting Corpus is immutable
and safe to share across workers.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

logger = logging.getLogger(__name__)

__all__ = [
    "DocumentType",
    "MAIN_DOCUMENT_TYPES",
    "AccessStatus",
    "BenchmarkEntry",
    "PublicationRecord",
    "Corpus",
    "CorpusFilter",
    "SubsetReport",
    "FosField",
    "FieldMapping",
    "FieldAssignment",
    "CorpusError",
    "CorpusFormatError",
    "DuplicateRecordIdError",
    "MissingColumnsError",
    "load_corpus",
    "derive_subset",
    "subset_report",
    "assign_fields",
]


class DocumentType(str, Enum):
    JOURNAL_ARTICLE = "journal_article"
    MONOGRAPH = "monograph"
    EDITED_VOLUME = "edited_volume"
    BOOK_SECTION = "book_section"
    CONFERENCE_ITEM = "conference_item"
    WORKING_PAPER = "working_paper"
    NEWSPAPER_ARTICLE = "newspaper_article"
    DISSERTATION = "dissertation"
    HABILITATION = "habilitation"
    RESEARCH_REPORT = "research_report"
    OTHER = "other"

    @property
    def is_main_type(self) -> bool:
        """Whether this is one of the five types used in evaluative analyses."""
        return self in MAIN_DOCUMENT_TYPES


MAIN_DOCUMENT_TYPES = frozenset(
    {
        DocumentType.JOURNAL_ARTICLE,
        DocumentType.CONFERENCE_ITEM,
        DocumentType.MONOGRAPH,
        DocumentType.BOOK_SECTION,
        DocumentType.EDITED_VOLUME,
    }
)


class AccessStatus(str, Enum):
    PUBLIC = "public"
    NOT_PUBLIC = "not_public"
    NO_TEXT_DEPOSITED = "no_text_deposited"


class CorpusError(Exception):
    """Base class for corpus ingestion problems."""


class CorpusFormatError(CorpusError):
    """A value could not be parsed; message carries the line number."""


class DuplicateRecordIdError(CorpusError):
    def __init__(self, record_id: str, line: int):
        super().__init__(f"duplicate record_id {record_id!r} (line {line})")
        self.record_id = record_id


class MissingColumnsError(CorpusError):
    def __init__(self, columns: Sequence[str]):
        super().__init__(f"missing required columns: {', '.join(columns)}")
        self.columns = tuple(columns)


@dataclass(frozen=True)
class BenchmarkEntry:
    """Coverage flag and citation count supplied for one benchmark database."""

    covered: bool
    citation_count: Optional[int] = None

    def __post_init__(self):
        if self.citation_count is not None:
            if self.citation_count < 0:
                raise ValueError("citation_count must be non-negative")
            if not self.covered:
                raise ValueError("citation_count given for an uncovered record")


@dataclass(frozen=True)
class PublicationRecord:
    """One verified local publication."""

    record_id: str
    title: str
    document_type: DocumentType
    access_status: AccessStatus
    publication_year: Optional[int] = None
    doi: Optional[str] = None
    language: Optional[str] = None
    institute_ids: tuple[str, ...] = ()
    author_count: Optional[int] = None
    journal_title: Optional[str] = None
    volume: Optional[str] = None
    issue: Optional[str] = None
    first_page: Optional[str] = None
    benchmark: Mapping[str, BenchmarkEntry] = field(default_factory=dict)

    def __post_init__(self):
        if not self.record_id:
            raise ValueError("record_id must be non-empty")
        if not self.title.strip():
            raise ValueError(f"record {self.record_id}: title is empty")
        if self.author_count is not None and self.author_count < 0:
            raise ValueError(f"record {self.record_id}: negative author_count")


@dataclass(frozen=True)
class Corpus:
    """An ordered, validated collection of publication records."""

    records: tuple[PublicationRecord, ...]
    benchmark_names: tuple[str, ...] = ()
    ignored_columns: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PublicationRecord]:
        return iter(self.records)

    @cached_property
    def by_id(self) -> Mapping[str, PublicationRecord]:
        return {record.record_id: record for record in self.records}

    def get(self, record_id: str) -> Optional[PublicationRecord]:
        return self.by_id.get(record_id)


_REQUIRED_COLUMNS = ("record_id", "title", "year", "doc_type", "access")
_OPTIONAL_COLUMNS = (
    "doi",
    "language",
    "institutes",
    "author_count",
    "journal",
    "volume",
    "issue",
    "first_page",
)
_TRUE_VALUES = {"1", "true", "yes", "y"}
_FALSE_VALUES = {"0", "false", "no", "n", ""}
_DELIMITERS = {"tsv": "\t", "csv": ","}


def _parse_bool(value: str, column: str, line: int) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE_VALUES:
        return True
    if lowered in _FALSE_VALUES:
        return False
    raise CorpusFormatError(f"line {line}: {column}: not a boolean: {value!r}")


def _parse_int(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise CorpusFormatError(
            f"line {line}: {column}: not an integer: {value!r}"
        ) from None


def load_corpus(path: str | Path, format: str = "tsv") -> Corpus:
    """Read and validate a corpus file.

    ``format`` selects the delimiter variant of the documented schema
    ("tsv" or "csv"). Duplicate record ids, missing required columns and
    unparseable values raise; unknown columns are ignored with a warning.
    """
    if format not in _DELIMITERS:
        raise ValueError(f"unsupported corpus format: {format!r}")
    path = Path(path)

    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle, delimiter=_DELIMITERS[format])
        header = reader.fieldnames or []
        missing = [col for col in _REQUIRED_COLUMNS if col not in header]
        if missing:
            raise MissingColumnsError(missing)

        benchmark_names = [
            col[len("covered_"):] for col in header if col.startswith("covered_")
        ]
        cites_without_flag = [
            col
            for col in header
            if col.startswith("cites_")
            and col[len("cites_"):] not in benchmark_names
        ]
        if cites_without_flag:
            raise MissingColumnsError(
                [f"covered_{col[len('cites_'):]}" for col in cites_without_flag]
            )

        known = set(_REQUIRED_COLUMNS) | set(_OPTIONAL_COLUMNS)
        known.update(f"covered_{name}" for name in benchmark_names)
        known.update(f"cites_{name}" for name in benchmark_names)
        ignored = tuple(col for col in header if col not in known)
        if ignored:
            logger.warning("%s: ignoring unknown columns: %s", path, ", ".join(ignored))

        records: list[PublicationRecord] = []
        seen: dict[str, int] = {}
        for row in reader:
            line = reader.line_num
            if row.get(None):
                raise CorpusFormatError(f"line {line}: more fields than columns")

            def cell(column: str) -> Optional[str]:
                value = row.get(column)
                if value is None:
                    return None
                value = value.strip()
                return value or None

            record_id = cell("record_id") or ""
            if not record_id:
                raise CorpusFormatError(f"line {line}: record_id is empty")
            if record_id in seen:
                raise DuplicateRecordIdError(record_id, line)
            seen[record_id] = line

            title = cell("title") or ""
            if not title:
                raise CorpusFormatError(f"line {line}: {record_id}: title is empty")

            year_raw = cell("year")
            year = _parse_int(year_raw, "year", line) if year_raw else None

            doc_raw = cell("doc_type") or ""
            try:
                doc_type = DocumentType(doc_raw)
            except ValueError:
                raise CorpusFormatError(
                    f"line {line}: doc_type: unknown value {doc_raw!r}"
                ) from None

            access_raw = cell("access") or ""
            try:
                access = AccessStatus(access_raw)
            except ValueError:
                raise CorpusFormatError(
                    f"line {line}: access: unknown value {access_raw!r}"
                ) from None

            institutes_raw = cell("institutes")
            institutes = tuple(
                part.strip()
                for part in (institutes_raw or "").split("|")
                if part.strip()
            )

            count_raw = cell("author_count")
            author_count = (
                _parse_int(count_raw, "author_count", line) if count_raw else None
            )

            benchmark: dict[str, BenchmarkEntry] = {}
            for name in benchmark_names:
                covered = _parse_bool(
                    row.get(f"covered_{name}", "") or "", f"covered_{name}", line
                )
                cites_raw = cell(f"cites_{name}")
                cites = (
                    _parse_int(cites_raw, f"cites_{name}", line)
                    if cites_raw is not None
                    else None
                )
                try:
                    benchmark[name] = BenchmarkEntry(covered, cites)
                except ValueError as exc:
                    raise CorpusFormatError(f"line {line}: {name}: {exc}") from None

            try:
                record = PublicationRecord(
                    record_id=record_id,
                    title=title,
                    document_type=doc_type,
                    access_status=access,
                    publication_year=year,
                    doi=cell("doi"),
                    language=cell("language"),
                    institute_ids=institutes,
                    author_count=author_count,
                    journal_title=cell("journal"),
                    volume=cell("volume"),
                    issue=cell("issue"),
                    first_page=cell("first_page"),
                    benchmark=benchmark,
                )
            except ValueError as exc:
                raise CorpusFormatError(f"line {line}: {exc}") from None
            records.append(record)

    return Corpus(
        records=tuple(records),
        benchmark_names=tuple(benchmark_names),
        ignored_columns=ignored,
    )


@dataclass(frozen=True)
class CorpusFilter:
    """Subset rules: year window, institute requirement, document types."""

    year_min: int
    year_max: int
    require_institute: bool = False
    allowed_document_types: frozenset[DocumentType] = frozenset(DocumentType)

    def __post_init__(self):
        if self.year_min > self.year_max:
            raise ValueError("year_min must not exceed year_max")

    def keeps(self, record: PublicationRecord) -> bool:
        return self._drop_reason(record) is None

    def _drop_reason(self, record: PublicationRecord) -> Optional[str]:
        # Precedence: year before institute before document type.
        if record.publication_year is None:
            return "missing_year"
        if not self.year_min <= record.publication_year <= self.year_max:
            return "year_range"
        if self.require_institute and not record.institute_ids:
            return "no_institute"
        if record.document_type not in self.allowed_document_types:
            return "document_type"
        return None


@dataclass(frozen=True)
class SubsetReport:
    """Per-rule drop tallies for one filter application."""

    kept: int
    dropped_missing_year: int
    dropped_year_range: int
    dropped_no_institute: int
    dropped_document_type: int

    @property
    def dropped(self) -> int:
        return (
            self.dropped_missing_year
            + self.dropped_year_range
            + self.dropped_no_institute
            + self.dropped_document_type
        )


def derive_subset(corpus: Corpus, filter: CorpusFilter) -> Corpus:
    """Keep records passing every filter rule, preserving input order.

    Records without a publication year never pass a year-bounded filter;
    subset_report counts them separately.
    """
    kept = tuple(record for record in corpus if filter.keeps(record))
    return Corpus(
        records=kept,
        benchmark_names=corpus.benchmark_names,
        ignored_columns=corpus.ignored_columns,
    )


def subset_report(corpus: Corpus, filter: CorpusFilter) -> SubsetReport:
    """Tally why records were dropped; each record counts under the first
    failing rule (year, then institute, then document type)."""
    counts = {
        "missing_year": 0,
        "year_range": 0,
        "no_institute": 0,
        "document_type": 0,
    }
    kept = 0
    for record in corpus:
        reason = filter._drop_reason(record)
        if reason is None:
            kept += 1
        else:
            counts[reason] += 1
    return SubsetReport(
        kept=kept,
        dropped_missing_year=counts["missing_year"],
        dropped_year_range=counts["year_range"],
        dropped_no_institute=counts["no_institute"],
        dropped_document_type=counts["document_type"],
    )


@dataclass(frozen=True, order=True)
class FosField:
    """A research-field category: major field plus subfield."""

    major: str
    sub: str


@dataclass(frozen=True)
class FieldMapping:
    """institute_id -> field category, exactly one per institute."""

    by_institute: Mapping[str, FosField]

    @classmethod
    def load(cls, path: str | Path, delimiter: str = ",") -> "FieldMapping":
        """Read the mapping file (columns institute_id, major_field, subfield)."""
        mapping: dict[str, FosField] = {}
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle, delimiter=delimiter)
            header = reader.fieldnames or []
            required = ("institute_id", "major_field", "subfield")
            missing = [col for col in required if col not in header]
            if missing:
                raise MissingColumnsError(missing)
            for row in reader:
                institute = (row["institute_id"] or "").strip()
                if not institute:
                    raise CorpusFormatError(
                        f"line {reader.line_num}: institute_id is empty"
                    )
                if institute in mapping:
                    raise CorpusFormatError(
                        f"line {reader.line_num}: duplicate institute {institute!r}"
                    )
                mapping[institute] = FosField(
                    major=(row["major_field"] or "").strip(),
                    sub=(row["subfield"] or "").strip(),
                )
        return cls(by_institute=mapping)


@dataclass(frozen=True)
class FieldAssignment:
    """Per-record field sets derived from institute affiliations.

    A record assigned to several institutes of the same field carries that
    field once. Records whose every institute is unmapped get an empty
    tuple; the offending institute ids are collected, never dropped.
    ``mean_fields_per_record`` is total assignments over total records.
    """

    fields_by_record: Mapping[str, tuple[FosField, ...]]
    unmapped_institutes: tuple[str, ...]
    mean_fields_per_record: float

    def majors(self, record_id: str) -> tuple[str, ...]:
        seen: list[str] = []
        for fos in self.fields_by_record.get(record_id, ()):
            if fos.major not in seen:
                seen.append(fos.major)
        return tuple(seen)


def assign_fields(corpus: Corpus, mapping: FieldMapping) -> FieldAssignment:
    """Resolve each record's institutes to a de-duplicated set of fields."""
    fields_by_record: dict[str, tuple[FosField, ...]] = {}
    unmapped: set[str] = set()
    assignments = 0
    for record in corpus:
        resolved: set[FosField] = set()
        for institute in record.institute_ids:
            fos = mapping.by_institute.get(institute)
            if fos is None:
                unmapped.add(institute)
            else:
                resolved.add(fos)
        ordered = tuple(sorted(resolved))
        fields_by_record[record.record_id] = ordered
        assignments += len(ordered)
    if unmapped:
        logger.warning(
            "unmapped institutes: %s", ", ".join(sorted(unmapped))
        )
    mean = assignments / len(corpus) if len(corpus) else 0.0
    return FieldAssignment(
        fields_by_record=fields_by_record,
        unmapped_institutes=tuple(sorted(unmapped)),
        mean_fields_per_record=mean,
    )
