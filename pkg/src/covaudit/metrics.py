"""Retrieval scores, coverage breakdowns and metadata-quality histograms.

Everything here is pure aggregation over immutable inputs. Percentages are
displayed with one decimal, half-up; the raw fractions are kept alongside
for machine consumption.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Iterable, Mapping, Optional, Sequence

from .corpus import AccessStatus, Corpus, DocumentType, FieldAssignment
from .matching import CrossModeStatus, MatchResult, MergedMatch
from .queries import RetrievalMode

__all__ = [
    "recall",
    "precision",
    "f1",
    "ModeTally",
    "RetrievalScore",
    "retrieval_score_table",
    "CrossModeTable",
    "cross_mode_table",
    "QualityHistogram",
    "delta_histogram",
    "year_delta_histogram",
    "author_delta_histogram",
    "CoverageRow",
    "overall_coverage",
    "unique_coverage",
    "CoverageCategory",
    "CoverageTable",
    "coverage_breakdown",
    "DoiFieldRow",
    "DoiAvailability",
    "doi_availability",
    "LANGUAGE_CLASSES",
    "language_class",
]

COMBINED_LABEL = "combined"


def recall(matched: int, corpus_size: int) -> float:
    """Fraction of the verified list that was retrieved and matched."""
    if corpus_size <= 0:
        raise ValueError("corpus_size must be positive")
    if matched > corpus_size:
        raise ValueError("matched exceeds corpus size")
    return matched / corpus_size

def precision(matched: int, returned: float) -> float:
    """Fraction of returned items that matched.

    An upper estimate whenever the per-query result count is capped; the
    report notes this. ``returned`` may be fractional (the combined row
    averages the per-mode returned counts).
    """
    if returned < matched:
        raise ValueError("returned must be >= matched")
    if returned == 0:
        return 0.0
    return matched / returned

def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if not 0 <= p <= 1 or not 0 <= r <= 1:
        raise ValueError("precision and recall must be within [0, 1]")
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


@dataclass(frozen=True)
class ModeTally:
    """Raw per-mode counts: matched records and total returned entities."""

    matched: int
    returned: int


@dataclass(frozen=True)
class RetrievalScore:
    mode: str
    matched: int
    corrected_matched: int
    returned: float
    recall: float
    precision: float
    precision_corrected: float
    f1_corrected: float


def retrieval_score_table(
    corpus_size: int,
    tallies: Mapping[RetrievalMode, ModeTally],
    union_matched: int,
    false_positives: int,
) -> list[RetrievalScore]:
    """Build the per-mode score rows plus a combined row when both ran.

    ``false_positives`` is the number of records whose two modes matched
    different entities; it is subtracted from every matched count to form
    the corrected figures. The combined row's returned count is the mean of
    the per-mode returned counts (a reporting convention, not a principled
    denominator; flagged in the serialized output).
    """
    rows = []

    def score(label: str, matched: int, returned: float) -> RetrievalScore:
        corrected = matched - false_positives
        if corrected < 0:
            raise ValueError("false positives exceed matched count")
        r = recall(matched, corpus_size)
        return RetrievalScore(
            mode=label,
            matched=matched,
            corrected_matched=corrected,
            returned=returned,
            recall=r,
            precision=precision(matched, returned),
            precision_corrected=precision(corrected, returned),
            f1_corrected=f1(precision(corrected, returned), r),
        )

    for mode in (RetrievalMode.TITLE_EXACT, RetrievalMode.TITLE_WORDS):
        if mode in tallies:
            tally = tallies[mode]
            rows.append(score(mode.value, tally.matched, tally.returned))
    if len(tallies) == 2:
        mean_returned = sum(t.returned for t in tallies.values()) / 2
        rows.append(score(COMBINED_LABEL, union_matched, mean_returned))
    return rows


@dataclass(frozen=True)
class CrossModeTable:
    """Agreement between the modes over records matched by both.

    Cell naming: ``<match type agreement>_<entity id agreement>``. Records
    in the two different-id cells are false-positive candidates and form
    the corrected-match subtraction.
    """

    same_type_same_id: int
    same_type_different_id: int
    different_type_same_id: int
    different_type_different_id: int
    doi_duplicate_candidates: int

    @property
    def both_matched(self) -> int:
        return (
            self.same_type_same_id
            + self.same_type_different_id
            + self.different_type_same_id
            + self.different_type_different_id
        )

    @property
    def subtracted(self) -> int:
        return self.same_type_different_id + self.different_type_different_id

    def percent(self, cell: int) -> float:
        if self.both_matched == 0:
            return 0.0
        return 100.0 * cell / self.both_matched


def cross_mode_table(merged: Iterable[MergedMatch]) -> CrossModeTable:
    cells = {"ss": 0, "sd": 0, "ds": 0, "dd": 0}
    duplicates = 0
    for match in merged:
        verdict = match.verdict
        if verdict.status not in (
            CrossModeStatus.BOTH_SAME_ID,
            CrossModeStatus.BOTH_DIFFERENT_ID,
        ):
            continue
        same_type = verdict.exact_match_type is verdict.words_match_type
        same_id = verdict.status is CrossModeStatus.BOTH_SAME_ID
        key = ("s" if same_type else "d") + ("s" if same_id else "d")
        cells[key] += 1
        if verdict.doi_duplicate_candidate:
            duplicates += 1
    return CrossModeTable(
        same_type_same_id=cells["ss"],
        same_type_different_id=cells["sd"],
        different_type_same_id=cells["ds"],
        different_type_different_id=cells["dd"],
        doi_duplicate_candidates=duplicates,
    )


_BUCKETS = ("exact", "plus_one", "minus_one", "greater_plus_one", "less_minus_one")


@dataclass(frozen=True)
class QualityHistogram:
    """Deltas between matched-entity and local metadata, bucketed."""

    counts: Mapping[str, int]
    total: int

    BUCKETS = _BUCKETS

    def percent(self, bucket: str) -> float:
        if self.total == 0:
            return 0.0
        return 100.0 * self.counts[bucket] / self.total


def delta_histogram(deltas: Iterable[int]) -> QualityHistogram:
    """Bucket entity-minus-local deltas: 0, +1, -1, >+1, <-1."""
    counts = dict.fromkeys(_BUCKETS, 0)
    total = 0
    for delta in deltas:
        total += 1
        if delta == 0:
            counts["exact"] += 1
        elif delta == 1:
            counts["plus_one"] += 1
        elif delta == -1:
            counts["minus_one"] += 1
        elif delta > 1:
            counts["greater_plus_one"] += 1
        else:
            counts["less_minus_one"] += 1
    return QualityHistogram(counts=counts, total=total)


def year_delta_histogram(
    corpus: Corpus, representative: Mapping[str, MatchResult]
) -> QualityHistogram:
    """Publication-year deltas over matched records with both years known."""
    deltas = []
    for record in corpus:
        match = representative.get(record.record_id)
        if match is None:
            continue
        if match.matched_year is None or record.publication_year is None:
            continue
        deltas.append(match.matched_year - record.publication_year)
    return delta_histogram(deltas)


def author_delta_histogram(
    corpus: Corpus, representative: Mapping[str, MatchResult]
) -> QualityHistogram:
    """Author-count deltas, journal articles only (the one type with
    reliable local author counts)."""
    deltas = []
    for record in corpus:
        if record.document_type is not DocumentType.JOURNAL_ARTICLE:
            continue
        match = representative.get(record.record_id)
        if match is None:
            continue
        if match.matched_author_count is None or record.author_count is None:
            continue
        deltas.append(match.matched_author_count - record.author_count)
    return delta_histogram(deltas)


@dataclass(frozen=True)
class CoverageRow:
    database: str
    covered: int
    covered_fraction: float
    unique: int
    unique_fraction: float


def unique_coverage(
    record_ids: Sequence[str], covered: Mapping[str, AbstractSet[str]]
) -> dict[str, int]:
    """Per database: records covered by it and by no other database."""
    if len(covered) < 2:
        raise ValueError("unique coverage needs at least two databases")
    counts = dict.fromkeys(covered, 0)
    for record_id in record_ids:
        holders = [db for db, ids in covered.items() if record_id in ids]
        if len(holders) == 1:
            counts[holders[0]] += 1
    return counts


def overall_coverage(
    record_ids: Sequence[str],
    covered: Mapping[str, AbstractSet[str]],
    database_order: Sequence[str],
) -> list[CoverageRow]:
    """Overall and unique coverage per database over the given records."""
    n = len(record_ids)
    if n == 0:
        raise ValueError("empty record set")
    uniques = unique_coverage(record_ids, covered) if len(covered) >= 2 else {}
    rows = []
    for db in database_order:
        ids = covered[db]
        hit = sum(1 for record_id in record_ids if record_id in ids)
        unique = uniques.get(db, 0)
        rows.append(
            CoverageRow(
                database=db,
                covered=hit,
                covered_fraction=hit / n,
                unique=unique,
                unique_fraction=unique / n,
            )
        )
    return rows


LANGUAGE_CLASSES = ("english", "non_english", "missing")


def language_class(
    language: Optional[str], english_tags: AbstractSet[str]
) -> str:
    """Trichotomy: english / non_english / missing, by exact tag match."""
    if language is None or not language.strip():
        return "missing"
    return "english" if language.strip().lower() in english_tags else "non_english"


@dataclass(frozen=True)
class CoverageCategory:
    category: str
    n: int
    covered: Mapping[str, int]

    def fraction(self, database: str) -> float:
        return self.covered[database] / self.n if self.n else 0.0


@dataclass(frozen=True)
class CoverageTable:
    dimension: str
    databases: tuple[str, ...]
    rows: tuple[CoverageCategory, ...]


_DIMENSIONS = (
    "document_type",
    "language_class",
    "access_status",
    "year",
    "fos_major",
    "fos_sub",
)
UNASSIGNED_FIELD = "(unassigned)"
MISSING_YEAR = "(missing)"


def coverage_breakdown(
    corpus: Corpus,
    covered: Mapping[str, AbstractSet[str]],
    dimension: str,
    *,
    assignment: Optional[FieldAssignment] = None,
    english_tags: AbstractSet[str] = frozenset({"en", "eng", "english"}),
    database_order: Optional[Sequence[str]] = None,
) -> CoverageTable:
    """Per-category record counts and per-database coverage.

    Field dimensions require a FieldAssignment; records carrying several
    fields are counted once in each. Categories observed in the corpus
    appear in a stable order (declaration order for enums, ascending for
    years, lexicographic for fields).
    """
    if dimension not in _DIMENSIONS:
        raise ValueError(f"unsupported dimension: {dimension!r}")
    if dimension in ("fos_major", "fos_sub") and assignment is None:
        raise ValueError(f"dimension {dimension!r} requires a field assignment")

    def categories_for(record) -> tuple[str, ...]:
        if dimension == "document_type":
            return (record.document_type.value,)
        if dimension == "language_class":
            return (language_class(record.language, english_tags),)
        if dimension == "access_status":
            return (record.access_status.value,)
        if dimension == "year":
            if record.publication_year is None:
                return (MISSING_YEAR,)
            return (str(record.publication_year),)
        fields = assignment.fields_by_record.get(record.record_id, ())
        if not fields:
            return (UNASSIGNED_FIELD,)
        if dimension == "fos_major":
            return assignment.majors(record.record_id)
        return tuple(sorted({f"{fos.major}/{fos.sub}" for fos in fields}))

    databases = tuple(database_order or sorted(covered))
    totals: dict[str, int] = {}
    hits: dict[str, dict[str, int]] = {}
    for record in corpus:
        for category in categories_for(record):
            totals[category] = totals.get(category, 0) + 1
            per_db = hits.setdefault(category, dict.fromkeys(databases, 0))
            for db in databases:
                if record.record_id in covered[db]:
                    per_db[db] += 1

    rows = tuple(
        CoverageCategory(category=cat, n=totals[cat], covered=hits[cat])
        for cat in _ordered_categories(dimension, totals)
    )
    return CoverageTable(dimension=dimension, databases=databases, rows=rows)


def _ordered_categories(dimension: str, totals: Mapping[str, int]) -> list[str]:
    present = set(totals)
    if dimension == "document_type":
        return [dt.value for dt in DocumentType if dt.value in present]
    if dimension == "language_class":
        return [cls for cls in LANGUAGE_CLASSES if cls in present]
    if dimension == "access_status":
        return [status.value for status in AccessStatus if status.value in present]
    if dimension == "year":
        years = sorted(cat for cat in present if cat != MISSING_YEAR)
        return years + ([MISSING_YEAR] if MISSING_YEAR in present else [])
    named = sorted(cat for cat in present if cat != UNASSIGNED_FIELD)
    return named + ([UNASSIGNED_FIELD] if UNASSIGNED_FIELD in present else [])


@dataclass(frozen=True)
class DoiFieldRow:
    field: str
    n_records: int
    records_with_doi: int
    n_matched: int
    matched_with_doi: int

    @property
    def record_doi_fraction(self) -> float:
        return self.records_with_doi / self.n_records if self.n_records else 0.0

    @property
    def matched_doi_fraction(self) -> float:
        return self.matched_with_doi / self.n_matched if self.n_matched else 0.0


@dataclass(frozen=True)
class DoiAvailability:
    """DOI presence locally and on matched entities, by major field.

    ``local_doi_entity_missing`` counts matched records that carry a local
    DOI while the matched entity has none. ``invalid_prefix`` counts
    matched-entity DOIs not starting with "10" (the validity check).
    """

    rows: tuple[DoiFieldRow, ...]
    total: DoiFieldRow
    matched_with_local_doi: int
    local_doi_entity_missing: int
    invalid_prefix: int

    @property
    def local_doi_entity_missing_fraction(self) -> float:
        if self.matched_with_local_doi == 0:
            return 0.0
        return self.local_doi_entity_missing / self.matched_with_local_doi


def doi_availability(
    corpus: Corpus,
    representative: Mapping[str, MatchResult],
    assignment: FieldAssignment,
) -> DoiAvailability:
    per_field: dict[str, list[int]] = {}

    def bump(field: str, record_has_doi: bool, match: Optional[MatchResult]) -> None:
        row = per_field.setdefault(field, [0, 0, 0, 0])
        row[0] += 1
        row[1] += 1 if record_has_doi else 0
        if match is not None:
            row[2] += 1
            row[3] += 1 if match.matched_doi else 0

    total = [0, 0, 0, 0]
    matched_with_local_doi = 0
    local_doi_entity_missing = 0
    invalid_prefix = 0
    for record in corpus:
        match = representative.get(record.record_id)
        has_doi = bool(record.doi)
        majors = assignment.majors(record.record_id) or (UNASSIGNED_FIELD,)
        for major in majors:
            bump(major, has_doi, match)
        total[0] += 1
        total[1] += 1 if has_doi else 0
        if match is not None:
            total[2] += 1
            total[3] += 1 if match.matched_doi else 0
            if has_doi:
                matched_with_local_doi += 1
                if not match.matched_doi:
                    local_doi_entity_missing += 1
            if match.matched_doi and not match.matched_doi.strip().startswith("10"):
                invalid_prefix += 1

    ordered = _ordered_categories("fos_major", per_field)
    rows = tuple(
        DoiFieldRow(field, *per_field[field]) for field in ordered
    )
    return DoiAvailability(
        rows=rows,
        total=DoiFieldRow("total", *total),
        matched_with_local_doi=matched_with_local_doi,
        local_doi_entity_missing=local_doi_entity_missing,
        invalid_prefix=invalid_prefix,
    )
