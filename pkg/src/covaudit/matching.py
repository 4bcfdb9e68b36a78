"""Link returned entities to local records and reconcile retrieval modes.

Three match rules apply, in decreasing reliability:

* ``doi``   - both DOIs present and equal (case-insensitive, trimmed)
* ``title`` - both titles equal after the exact-title cleaning rule
* ``bib``   - journal title, volume, issue and first page all present on
  both sides and equal after case-insensitive trim

select_best picks the highest-priority achievable rule; among entities
achieving it the lowest rank wins. Records whose two modes selected
different entities are false-positive candidates and are excluded from
corrected match counts.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .client import ResultSet, ReturnedEntity
from .corpus import PublicationRecord
from .queries import QueryBuildError, RetrievalMode, normalize_exact_title

__all__ = [
    "MatchType",
    "MATCH_PRIORITY",
    "MatchResult",
    "CrossModeStatus",
    "CrossModeVerdict",
    "MergedMatch",
    "match_entity",
    "select_best",
    "reconcile_modes",
    "merge_mode_results",
]


class MatchType(str, Enum):
    DOI = "doi"
    TITLE = "title"
    BIB = "bib"


# Fixed reliability order, most reliable first.
MATCH_PRIORITY = (MatchType.DOI, MatchType.TITLE, MatchType.BIB)


@dataclass(frozen=True)
class MatchResult:
    """The selected linkage between a local record and a returned entity."""

    record_id: str
    entity_id: str
    match_type: MatchType
    rank: int
    mode: RetrievalMode
    matched_year: Optional[int] = None
    matched_author_count: Optional[int] = None
    matched_doi: Optional[str] = None
    matched_citation_count: Optional[int] = None


class CrossModeStatus(str, Enum):
    BOTH_SAME_ID = "both_same_id"
    BOTH_DIFFERENT_ID = "both_different_id"
    ONLY_EXACT = "only_exact"
    ONLY_WORDS = "only_words"
    NEITHER = "neither"


@dataclass(frozen=True)
class CrossModeVerdict:
    """How the two retrieval modes agree for one record."""

    record_id: str
    status: CrossModeStatus
    exact_match_type: Optional[MatchType] = None
    words_match_type: Optional[MatchType] = None
    exact_entity_id: Optional[str] = None
    words_entity_id: Optional[str] = None

    @property
    def false_positive_candidate(self) -> bool:
        return self.status is CrossModeStatus.BOTH_DIFFERENT_ID

    @property
    def doi_duplicate_candidate(self) -> bool:
        """Different entities, both found via DOI equality: the remote
        database most likely stores duplicate records."""
        return (
            self.status is CrossModeStatus.BOTH_DIFFERENT_ID
            and self.exact_match_type is MatchType.DOI
            and self.words_match_type is MatchType.DOI
        )


def _normalize_doi(doi: str) -> str:
    return doi.strip().lower()


def _cleaned_title(title: Optional[str]) -> Optional[str]:
    if not title:
        return None
    try:
        return normalize_exact_title(title)
    except QueryBuildError:
        return None


def _bib_tuple(
    journal: Optional[str],
    volume: Optional[str],
    issue: Optional[str],
    first_page: Optional[str],
) -> Optional[tuple[str, str, str, str]]:
    parts = (journal, volume, issue, first_page)
    if any(part is None or not part.strip() for part in parts):
        return None
    return tuple(part.strip().casefold() for part in parts)  # type: ignore[return-value]


def match_entity(
    record: PublicationRecord, entity: ReturnedEntity
) -> frozenset[MatchType]:
    """All match rules satisfied by this (record, entity) pair.

    Absent fields simply disable the corresponding rule. Both titles go
    through the same cleaning, so the comparison is symmetric.
    """
    found = set()
    if record.doi and entity.doi:
        if _normalize_doi(record.doi) == _normalize_doi(entity.doi):
            found.add(MatchType.DOI)
    local_title = _cleaned_title(record.title)
    entity_title = _cleaned_title(entity.ma_title)
    if local_title and entity_title and local_title == entity_title:
        found.add(MatchType.TITLE)
    local_bib = _bib_tuple(
        record.journal_title, record.volume, record.issue, record.first_page
    )
    entity_bib = _bib_tuple(
        entity.journal_name, entity.volume, entity.issue, entity.first_page
    )
    if local_bib and entity_bib and local_bib == entity_bib:
        found.add(MatchType.BIB)
    return frozenset(found)


def select_best(
    record: PublicationRecord, results: ResultSet, mode: RetrievalMode
) -> Optional[MatchResult]:
    """Pick the most reliable match in a result set, or None.

    Priority beats rank: a doi match at rank 3 wins over a title match at
    rank 1. Within one match type the lowest rank wins (ranks are unique,
    so no further tie-break is needed).
    """
    matched = [
        (entity, types)
        for entity in results.entities
        if (types := match_entity(record, entity))
    ]
    for match_type in MATCH_PRIORITY:
        candidates = [entity for entity, types in matched if match_type in types]
        if not candidates:
            continue
        best = min(candidates, key=lambda entity: entity.rank)
        return MatchResult(
            record_id=record.record_id,
            entity_id=best.entity_id,
            match_type=match_type,
            rank=best.rank,
            mode=mode,
            matched_year=best.year,
            matched_author_count=best.author_count,
            matched_doi=best.doi,
            matched_citation_count=best.citation_count,
        )
    return None


def reconcile_modes(
    record_id: str,
    exact: Optional[MatchResult],
    words: Optional[MatchResult],
) -> CrossModeVerdict:
    """Classify the agreement between the two modes for one record."""
    for result, expected in ((exact, RetrievalMode.TITLE_EXACT),
                             (words, RetrievalMode.TITLE_WORDS)):
        if result is None:
            continue
        if result.record_id != record_id:
            raise ValueError(
                f"match for {result.record_id!r} passed while reconciling {record_id!r}"
            )
        if result.mode is not expected:
            raise ValueError(f"{result.mode.value} result in the {expected.value} slot")

    if exact is None and words is None:
        status = CrossModeStatus.NEITHER
    elif exact is None:
        status = CrossModeStatus.ONLY_WORDS
    elif words is None:
        status = CrossModeStatus.ONLY_EXACT
    elif exact.entity_id == words.entity_id:
        status = CrossModeStatus.BOTH_SAME_ID
    else:
        status = CrossModeStatus.BOTH_DIFFERENT_ID
    return CrossModeVerdict(
        record_id=record_id,
        status=status,
        exact_match_type=exact.match_type if exact else None,
        words_match_type=words.match_type if words else None,
        exact_entity_id=exact.entity_id if exact else None,
        words_entity_id=words.entity_id if words else None,
    )


@dataclass(frozen=True)
class MergedMatch:
    """Union bookkeeping across the two modes for one record."""

    record_id: str
    exact: Optional[MatchResult]
    words: Optional[MatchResult]
    verdict: CrossModeVerdict

    @property
    def matched(self) -> bool:
        """Matched overall: found in either mode."""
        return self.exact is not None or self.words is not None

    @property
    def corrected(self) -> bool:
        """Matched and not a cross-mode false-positive candidate."""
        return self.matched and not self.verdict.false_positive_candidate

    @property
    def representative(self) -> Optional[MatchResult]:
        """The match used for metadata-quality comparisons; the exact-title
        mode is preferred when both modes matched."""
        return self.exact if self.exact is not None else self.words


def merge_mode_results(
    record_id: str,
    exact: Optional[MatchResult],
    words: Optional[MatchResult],
) -> MergedMatch:
    return MergedMatch(
        record_id=record_id,
        exact=exact,
        words=words,
        verdict=reconcile_modes(record_id, exact, words),
    )
