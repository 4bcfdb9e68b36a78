"""Citation statistics: per-publication averages, uncitedness, and rank
correlations between databases.

Correlations are computed on raw counts (not log-transformed). Records
covered by two databases at once form a CitationVectorPair; covered items
whose count is unknown on either side are excluded and the exclusion is
reported, never silently absorbed as zero.

The rank kernels (mean ranks with ties, tie-corrected Kendall) come from
covaudit.kernels, which prefers the compiled backend when built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet, Mapping, Optional, Sequence

from . import kernels

__all__ = [
    "CitationVectorPair",
    "DatabaseCitations",
    "CorrelationCell",
    "CorrelationTable",
    "citations_per_publication",
    "uncited_share",
    "pearson",
    "spearman_mean_rank",
    "kendall_tau_b",
    "paired_counts",
    "correlation_report",
    "ALL_FIELDS_LABEL",
]

ALL_FIELDS_LABEL = "all_fields"


@dataclass(frozen=True)
class CitationVectorPair:
    """Aligned citation counts for records covered in both databases."""

    database_a: str
    database_b: str
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise ValueError("citation vectors differ in length")

    @property
    def n(self) -> int:
        return len(self.a)


def citations_per_publication(citations: Sequence[float], n: int) -> float:
    """Total citations divided by the covered-item count ``n``."""
    if n <= 0:
        raise ValueError("covered-item count must be positive")
    return sum(citations) / n


def uncited_share(citations: Sequence[float]) -> float:
    """Fraction of covered items with zero citations."""
    if not citations:
        raise ValueError("empty citation vector")
    return sum(1 for count in citations if count == 0) / len(citations)


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ValueError("vectors differ in length")
    n = len(x)
    if n < 2:
        raise ValueError("need at least two observations")
    mean_x = math.fsum(x) / n
    mean_y = math.fsum(y) / n
    sxy = math.fsum((a - mean_x) * (b - mean_y) for a, b in zip(x, y))
    sxx = math.fsum((a - mean_x) ** 2 for a in x)
    syy = math.fsum((b - mean_y) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance on one side")
    return sxy / math.sqrt(sxx * syy)


def pearson(pair: CitationVectorPair) -> float:
    """Product-moment correlation of the raw counts."""
    return _pearson(pair.a, pair.b)


def spearman_mean_rank(pair: CitationVectorPair) -> float:
    """Pearson applied to mean ranks; ties share the mean of their rank
    positions. Raises when either side is entirely tied."""
    try:
        return _pearson(kernels.midrank(pair.a), kernels.midrank(pair.b))
    except ValueError as exc:
        raise ValueError(f"spearman undefined: {exc}") from None


def kendall_tau_b(pair: CitationVectorPair) -> float:
    """Tie-corrected Kendall rank correlation."""
    return kernels.kendall_tau_b(pair.a, pair.b)


@dataclass(frozen=True)
class DatabaseCitations:
    """One database's view of the analyzed records.

    ``covered`` holds every covered record id; ``counts`` the subset whose
    citation count is known. Covered-without-count records are legal input
    and end up in the exclusion tallies.
    """

    name: str
    covered: frozenset[str]
    counts: Mapping[str, int]

    def __post_init__(self):
        stray = [rid for rid in self.counts if rid not in self.covered]
        if stray:
            raise ValueError(
                f"{self.name}: citation counts for uncovered records: {stray[:5]}"
            )


def paired_counts(
    a: DatabaseCitations,
    b: DatabaseCitations,
    *,
    within: Optional[AbstractSet[str]] = None,
) -> tuple[list[tuple[str, int, int]], int]:
    """Records covered by both databases with counts on both sides.

    Returns (sorted (record_id, count_a, count_b) triples, number of
    co-covered records excluded for a missing count).
    """
    both = a.covered & b.covered
    if within is not None:
        both &= within
    triples = []
    excluded = 0
    for record_id in sorted(both):
        if record_id in a.counts and record_id in b.counts:
            triples.append((record_id, a.counts[record_id], b.counts[record_id]))
        else:
            excluded += 1
    return triples, excluded


@dataclass(frozen=True)
class CorrelationCell:
    field: str
    database_a: str
    database_b: str
    n: int
    excluded: int
    pearson: Optional[float]
    spearman: Optional[float]
    kendall: Optional[float]
    note: Optional[str] = None


@dataclass(frozen=True)
class CorrelationTable:
    cells: tuple[CorrelationCell, ...]


def correlation_report(
    databases: Sequence[DatabaseCitations],
    *,
    field_members: Optional[Mapping[str, AbstractSet[str]]] = None,
) -> CorrelationTable:
    """Correlation cells per database pair, overall and per field.

    ``field_members`` maps a field label to the record ids counted in it
    (records carrying several fields appear in each). The overall row is
    always present, labeled ``all_fields``. Cells with fewer than two
    usable observations carry a note instead of coefficients, as do cells
    where a coefficient is undefined (all-tied side).
    """
    if len(databases) < 2:
        raise ValueError("correlation report needs at least two databases")
    scopes: list[tuple[str, Optional[AbstractSet[str]]]] = [(ALL_FIELDS_LABEL, None)]
    if field_members:
        scopes.extend((field, field_members[field]) for field in sorted(field_members))

    cells = []
    for field, within in scopes:
        for i, db_a in enumerate(databases):
            for db_b in databases[i + 1 :]:
                triples, excluded = paired_counts(db_a, db_b, within=within)
                if len(triples) < 2:
                    cells.append(
                        CorrelationCell(
                            field, db_a.name, db_b.name,
                            n=len(triples), excluded=excluded,
                            pearson=None, spearman=None, kendall=None,
                            note="fewer than two paired observations",
                        )
                    )
                    continue
                pair = CitationVectorPair(
                    database_a=db_a.name,
                    database_b=db_b.name,
                    a=tuple(float(t[1]) for t in triples),
                    b=tuple(float(t[2]) for t in triples),
                )
                note = None
                try:
                    r = pearson(pair)
                    rho = spearman_mean_rank(pair)
                    tau = kendall_tau_b(pair)
                except ValueError as exc:
                    r = rho = tau = None
                    note = str(exc)
                cells.append(
                    CorrelationCell(
                        field, db_a.name, db_b.name,
                        n=pair.n, excluded=excluded,
                        pearson=r, spearman=rho, kendall=tau, note=note,
                    )
                )
    return CorrelationTable(cells=tuple(cells))
