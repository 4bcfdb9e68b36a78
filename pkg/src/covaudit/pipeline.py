"""End-to-end orchestration: retrieve, match, aggregate, write reports.

A run has two phases. The retrieval phase drives the corpus through every
configured mode, archiving each raw response under ``raw/<mode>/`` and
checkpointing under ``state/`` so an interrupted run resumes cleanly. The
report phase is a pure function of (corpus, config, archive): it re-reads
the archived bodies, links entities to records and writes the bundle under
``reports/``. Anything the report phase needs is recomputed from those
inputs, never from retrieval-phase state, which is what makes an
interrupted-and-resumed run byte-identical to an uninterrupted one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional

from . import citations as cite
from . import metrics
from .client import (
    Checkpoint,
    EvaluateRequest,
    MalformedPayloadError,
    Transport,
    parse_result_set,
    run_batch,
)
from .config import ConfigError, RunConfig
from .corpus import (
    Corpus,
    FieldAssignment,
    FieldMapping,
    SubsetReport,
    assign_fields,
    derive_subset,
    load_corpus,
    subset_report,
)
from .matching import MatchResult, MergedMatch, merge_mode_results, select_best
from .queries import QueryBuildError, RetrievalMode, StopwordList, build_query
from .reports import (
    COMBINED_RETURNED_NOTE,
    PRECISION_NOTE,
    fnum,
    format_percent,
    write_json,
    write_table,
)

logger = logging.getLogger(__name__)

__all__ = ["PipelineError", "run_pipeline", "recompute_reports", "analyze_archive"]

_DIMENSIONS = (
    "document_type",
    "language_class",
    "access_status",
    "year",
    "fos_major",
    "fos_sub",
)


class PipelineError(Exception):
    """Unrecoverable problem while assembling reports."""


@dataclass
class ModeOutcome:
    """Per (record, mode) report-phase result."""

    record_id: str
    mode: RetrievalMode
    status: str  # matched | unmatched | error
    match: Optional[MatchResult] = None
    returned: int = 0
    error: Optional[str] = None
    warnings: tuple[str, ...] = ()


@dataclass
class ReportData:
    corpus: Corpus
    config: RunConfig
    outcomes: list[ModeOutcome]
    merged: dict[str, MergedMatch]
    assignment: FieldAssignment
    scores: list[metrics.RetrievalScore]
    cross_mode: metrics.CrossModeTable
    year_quality: metrics.QualityHistogram
    author_quality: metrics.QualityHistogram
    doi_table: metrics.DoiAvailability
    subset: Corpus
    subset_drop: Optional[SubsetReport]
    database_order: list[str]
    coverage_rows: list[metrics.CoverageRow]
    breakdowns: dict[str, metrics.CoverageTable]
    citation_dbs: list[cite.DatabaseCitations]
    citation_excluded: dict[str, int]
    correlations: cite.CorrelationTable
    scatter: dict[tuple[str, str], list[tuple[str, int, int]]]


def _load_stopwords(config: RunConfig) -> StopwordList:
    if config.stopword_path is not None:
        return StopwordList.from_file(config.stopword_path)
    return StopwordList.default()


def _benchmark_names(config: RunConfig, corpus: Corpus) -> list[str]:
    if config.benchmark_databases is None:
        names = list(corpus.benchmark_names)
    else:
        unknown = [
            name for name in config.benchmark_databases
            if name not in corpus.benchmark_names
        ]
        if unknown:
            raise ConfigError(
                [
                    f"benchmark_databases: {name!r} has no covered_{name} column "
                    f"in the corpus"
                    for name in unknown
                ]
            )
        names = list(config.benchmark_databases)
    if config.target_database in names:
        raise ConfigError(
            [f"target_database: {config.target_database!r} collides with a "
             f"benchmark database name"]
        )
    return names


def analyze_archive(
    corpus: Corpus,
    config: RunConfig,
    stopwords: StopwordList,
    archive_dir: Path,
    mapping: Optional[FieldMapping],
) -> ReportData:
    """Compute every report table from the archived raw responses."""
    benchmark_names = _benchmark_names(config, corpus)
    assignment = assign_fields(corpus, mapping or FieldMapping(by_institute={}))

    request_defaults = EvaluateRequest(
        expr="-",
        count=config.request.count,
        model=config.request.model,
        offset=config.request.offset,
        attributes=config.request.attributes,
    )

    outcomes: list[ModeOutcome] = []
    per_mode_match: dict[RetrievalMode, dict[str, MatchResult]] = {
        mode: {} for mode in config.modes
    }
    per_mode_returned = dict.fromkeys(config.modes, 0)
    for record in corpus:
        for mode in config.modes:
            outcome = _analyze_one(
                record, mode, stopwords, archive_dir, request_defaults
            )
            outcomes.append(outcome)
            per_mode_returned[mode] += outcome.returned
            if outcome.match is not None:
                per_mode_match[mode][record.record_id] = outcome.match
    outcomes.sort(key=lambda o: (o.record_id, o.mode.value))

    exact_matches = per_mode_match.get(RetrievalMode.TITLE_EXACT, {})
    words_matches = per_mode_match.get(RetrievalMode.TITLE_WORDS, {})
    merged = {
        record.record_id: merge_mode_results(
            record.record_id,
            exact_matches.get(record.record_id),
            words_matches.get(record.record_id),
        )
        for record in corpus
    }

    cross = metrics.cross_mode_table(merged.values())
    union_matched = sum(1 for m in merged.values() if m.matched)
    tallies = {
        mode: metrics.ModeTally(
            matched=len(per_mode_match[mode]), returned=per_mode_returned[mode]
        )
        for mode in config.modes
    }
    scores = metrics.retrieval_score_table(
        corpus_size=len(corpus),
        tallies=tallies,
        union_matched=union_matched,
        false_positives=cross.subtracted,
    ) if len(corpus) else []

    representative = {
        record_id: m.representative
        for record_id, m in merged.items()
        if m.representative is not None
    }
    year_quality = metrics.year_delta_histogram(corpus, representative)
    author_quality = metrics.author_delta_histogram(corpus, representative)
    doi_table = metrics.doi_availability(corpus, representative, assignment)

    # coverage and citations run on the configured subset
    subset = derive_subset(corpus, config.subset) if config.subset else corpus
    subset_drop = subset_report(corpus, config.subset) if config.subset else None
    subset_ids = [record.record_id for record in subset]

    target = config.target_database
    covered: dict[str, set[str]] = {
        target: {rid for rid in subset_ids if merged[rid].matched}
    }
    for name in benchmark_names:
        covered[name] = {
            record.record_id
            for record in subset
            if (entry := record.benchmark.get(name)) is not None and entry.covered
        }
    database_order = [target] + benchmark_names

    coverage_rows: list[metrics.CoverageRow] = []
    breakdowns: dict[str, metrics.CoverageTable] = {}
    if subset_ids:
        if len(database_order) >= 2:
            coverage_rows = metrics.overall_coverage(
                subset_ids, covered, database_order
            )
        for dimension in _DIMENSIONS:
            if dimension.startswith("fos_") and mapping is None:
                continue
            breakdowns[dimension] = metrics.coverage_breakdown(
                subset,
                covered,
                dimension,
                assignment=assignment,
                english_tags=frozenset(config.english_tags),
                database_order=database_order,
            )

    citation_dbs: list[cite.DatabaseCitations] = []
    citation_excluded: dict[str, int] = {}
    target_counts = {}
    for rid in sorted(covered[target]):
        match = merged[rid].representative
        if match is not None and match.matched_citation_count is not None:
            target_counts[rid] = match.matched_citation_count
    citation_excluded[target] = len(covered[target]) - len(target_counts)
    citation_dbs.append(
        cite.DatabaseCitations(
            name=target, covered=frozenset(covered[target]), counts=target_counts
        )
    )
    for name in benchmark_names:
        counts = {
            record.record_id: record.benchmark[name].citation_count
            for record in subset
            if record.record_id in covered[name]
            and record.benchmark[name].citation_count is not None
        }
        citation_excluded[name] = len(covered[name]) - len(counts)
        citation_dbs.append(
            cite.DatabaseCitations(
                name=name, covered=frozenset(covered[name]), counts=counts
            )
        )

    field_members: dict[str, set[str]] = {}
    if mapping is not None:
        for record in subset:
            for major in assignment.majors(record.record_id):
                field_members.setdefault(major, set()).add(record.record_id)

    correlations = cite.correlation_report(
        citation_dbs, field_members=field_members or None
    ) if len(citation_dbs) >= 2 and subset_ids else cite.CorrelationTable(cells=())

    scatter: dict[tuple[str, str], list[tuple[str, int, int]]] = {}
    for i, db_a in enumerate(citation_dbs):
        for db_b in citation_dbs[i + 1:]:
            triples, _ = cite.paired_counts(db_a, db_b)
            scatter[(db_a.name, db_b.name)] = triples

    return ReportData(
        corpus=corpus,
        config=config,
        outcomes=outcomes,
        merged=merged,
        assignment=assignment,
        scores=scores,
        cross_mode=cross,
        year_quality=year_quality,
        author_quality=author_quality,
        doi_table=doi_table,
        subset=subset,
        subset_drop=subset_drop,
        database_order=database_order,
        coverage_rows=coverage_rows,
        breakdowns=breakdowns,
        citation_dbs=citation_dbs,
        citation_excluded=citation_excluded,
        correlations=correlations,
        scatter=scatter,
    )


def _analyze_one(
    record,
    mode: RetrievalMode,
    stopwords: StopwordList,
    archive_dir: Path,
    request_defaults: EvaluateRequest,
) -> ModeOutcome:
    record_id = record.record_id
    try:
        expr = build_query(record.title, mode, stopwords)
    except QueryBuildError as exc:
        return ModeOutcome(record_id, mode, "error", error=f"query: {exc}")
    path = archive_dir / mode.value / f"{record_id}.json"
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        return ModeOutcome(record_id, mode, "error", error="no archived response")
    try:
        result = parse_result_set(raw, replace(request_defaults, expr=expr.text))
    except MalformedPayloadError as exc:
        return ModeOutcome(record_id, mode, "error", error=f"payload: {exc}")
    match = select_best(record, result, mode)
    return ModeOutcome(
        record_id,
        mode,
        "matched" if match else "unmatched",
        match=match,
        returned=len(result.entities),
        warnings=result.warnings,
    )


# ---------------------------------------------------------------- writers


def write_reports(data: ReportData, reports_dir: Path) -> None:
    reports_dir.mkdir(parents=True, exist_ok=True)
    _write_match_log(data, reports_dir / "match_log.csv")
    _write_scores(data, reports_dir / "retrieval_scores.csv")
    _write_cross_mode(data, reports_dir / "cross_mode.csv")
    _write_histogram(
        data.year_quality, reports_dir / "quality_publication_year.csv",
        "publication-year delta (matched entity minus local record)",
    )
    _write_histogram(
        data.author_quality, reports_dir / "quality_author_count.csv",
        "author-count delta over matched journal articles",
    )
    _write_doi(data, reports_dir / "doi_availability.csv")
    _write_coverage_overall(data, reports_dir / "coverage_overall.csv")
    for dimension, table in sorted(data.breakdowns.items()):
        _write_breakdown(table, reports_dir / f"coverage_{dimension}.csv")
    _write_citation_summary(data, reports_dir / "citation_summary.csv")
    _write_correlations(data, reports_dir / "correlations.csv")
    for (name_a, name_b), triples in sorted(data.scatter.items()):
        _write_scatter(
            name_a, name_b, triples,
            reports_dir / f"scatter_{name_a}__{name_b}.csv",
        )
    _write_run_report(data, reports_dir / "run_report.json")
    _write_summary(data, reports_dir / "summary.txt")


def _write_match_log(data: ReportData, path: Path) -> None:
    rows = []
    for outcome in data.outcomes:
        match = outcome.match
        rows.append(
            {
                "record_id": outcome.record_id,
                "mode": outcome.mode.value,
                "status": outcome.status,
                "match_type": match.match_type.value if match else "",
                "entity_id": match.entity_id if match else "",
                "rank": match.rank if match else "",
                "returned": outcome.returned,
                "error": outcome.error or "",
            }
        )
    write_table(
        path,
        ["record_id", "mode", "status", "match_type", "entity_id", "rank",
         "returned", "error"],
        rows,
    )


def _write_scores(data: ReportData, path: Path) -> None:
    rows = [
        {
            "mode": score.mode,
            "matched": score.matched,
            "corrected_matched": score.corrected_matched,
            "returned": fnum(score.returned),
            "recall": fnum(score.recall),
            "precision": fnum(score.precision),
            "precision_corrected": fnum(score.precision_corrected),
            "f1_corrected": fnum(score.f1_corrected),
        }
        for score in data.scores
    ]
    write_table(
        path,
        ["mode", "matched", "corrected_matched", "returned", "recall",
         "precision", "precision_corrected", "f1_corrected"],
        rows,
        notes=[PRECISION_NOTE, COMBINED_RETURNED_NOTE],
    )


def _write_cross_mode(data: ReportData, path: Path) -> None:
    table = data.cross_mode
    cells = [
        ("same", "same", table.same_type_same_id),
        ("same", "different", table.same_type_different_id),
        ("different", "same", table.different_type_same_id),
        ("different", "different", table.different_type_different_id),
    ]
    rows = [
        {
            "match_type_agreement": type_label,
            "entity_id_agreement": id_label,
            "n": count,
            "pct_of_both_matched": format_percent(
                count / table.both_matched if table.both_matched else 0.0
            ),
        }
        for type_label, id_label, count in cells
    ]
    write_table(
        path,
        ["match_type_agreement", "entity_id_agreement", "n", "pct_of_both_matched"],
        rows,
        notes=[
            f"records matched by both modes: {table.both_matched}",
            f"false-positive candidates (different entity ids), subtracted "
            f"from corrected matched counts: {table.subtracted}",
            f"doi-duplicate candidates: {table.doi_duplicate_candidates}",
        ],
    )


def _write_histogram(histogram, path: Path, description: str) -> None:
    rows = [
        {
            "bucket": bucket,
            "n": histogram.counts[bucket],
            "pct": format_percent(
                histogram.counts[bucket] / histogram.total if histogram.total else 0.0
            ),
            "fraction": fnum(
                histogram.counts[bucket] / histogram.total if histogram.total else 0.0
            ),
        }
        for bucket in histogram.BUCKETS
    ]
    write_table(
        path,
        ["bucket", "n", "pct", "fraction"],
        rows,
        notes=[description, f"compared pairs: {histogram.total}"],
    )


def _write_doi(data: ReportData, path: Path) -> None:
    table = data.doi_table
    rows = []
    for row in list(table.rows) + [table.total]:
        rows.append(
            {
                "field": row.field,
                "n_records": row.n_records,
                "records_with_doi": row.records_with_doi,
                "pct_records_with_doi": format_percent(row.record_doi_fraction),
                "n_matched": row.n_matched,
                "matched_with_doi": row.matched_with_doi,
                "pct_matched_with_doi": format_percent(row.matched_doi_fraction),
            }
        )
    write_table(
        path,
        ["field", "n_records", "records_with_doi", "pct_records_with_doi",
         "n_matched", "matched_with_doi", "pct_matched_with_doi"],
        rows,
        notes=[
            f"matched records with a local DOI: {table.matched_with_local_doi}",
            f"of those, entity DOI missing: {table.local_doi_entity_missing} "
            f"({format_percent(table.local_doi_entity_missing_fraction)}%)",
            f"matched entity DOIs without the '10' prefix: {table.invalid_prefix}",
        ],
    )


def _write_coverage_overall(data: ReportData, path: Path) -> None:
    rows = [
        {
            "database": row.database,
            "covered": row.covered,
            "covered_pct": format_percent(row.covered_fraction),
            "covered_fraction": fnum(row.covered_fraction),
            "unique": row.unique,
            "unique_pct": format_percent(row.unique_fraction),
            "unique_fraction": fnum(row.unique_fraction),
        }
        for row in data.coverage_rows
    ]
    write_table(
        path,
        ["database", "covered", "covered_pct", "covered_fraction",
         "unique", "unique_pct", "unique_fraction"],
        rows,
        notes=[f"analyzed records: {len(data.subset)}"],
    )


def _write_breakdown(table, path: Path) -> None:
    fieldnames = ["category", "n"]
    for db in table.databases:
        fieldnames += [f"{db}_covered", f"{db}_pct", f"{db}_fraction"]
    rows = []
    for row in table.rows:
        cells = {"category": row.category, "n": row.n}
        for db in table.databases:
            cells[f"{db}_covered"] = row.covered[db]
            cells[f"{db}_pct"] = format_percent(row.fraction(db))
            cells[f"{db}_fraction"] = fnum(row.fraction(db))
        rows.append(cells)
    write_table(path, fieldnames, rows, notes=[f"dimension: {table.dimension}"])


def _write_citation_summary(data: ReportData, path: Path) -> None:
    rows = []
    for db in data.citation_dbs:
        counts = [db.counts[rid] for rid in sorted(db.counts)]
        covered_n = len(db.covered)
        with_counts = len(counts)
        total = sum(counts)
        rows.append(
            {
                "database": db.name,
                "covered": covered_n,
                "with_counts": with_counts,
                "excluded_missing_count": data.citation_excluded.get(db.name, 0),
                "total_citations": total,
                "cpp": fnum(
                    cite.citations_per_publication(counts, with_counts)
                ) if with_counts else "",
                "uncited": sum(1 for c in counts if c == 0),
                "uncited_share": fnum(cite.uncited_share(counts)) if counts else "",
            }
        )
    write_table(
        path,
        ["database", "covered", "with_counts", "excluded_missing_count",
         "total_citations", "cpp", "uncited", "uncited_share"],
        rows,
        notes=["cpp and uncited_share are computed over items with known counts"],
    )


def _write_correlations(data: ReportData, path: Path) -> None:
    rows = [
        {
            "field": cell.field,
            "database_a": cell.database_a,
            "database_b": cell.database_b,
            "n": cell.n,
            "excluded_missing_count": cell.excluded,
            "pearson": fnum(cell.pearson),
            "spearman": fnum(cell.spearman),
            "kendall_tau_b": fnum(cell.kendall),
            "note": cell.note or "",
        }
        for cell in data.correlations.cells
    ]
    write_table(
        path,
        ["field", "database_a", "database_b", "n", "excluded_missing_count",
         "pearson", "spearman", "kendall_tau_b", "note"],
        rows,
        notes=["correlations computed on raw citation counts (not log-scaled)"],
    )


def _write_scatter(name_a: str, name_b: str, triples, path: Path) -> None:
    rows = [
        {"record_id": rid, name_a: x, name_b: y} for rid, x, y in triples
    ]
    write_table(
        path,
        ["record_id", name_a, name_b],
        rows,
        notes=["plotting hint: cap the displayed counts (e.g. at 1050) to keep axes readable"],
    )


def _write_run_report(data: ReportData, path: Path) -> None:
    errors = [
        {"record_id": o.record_id, "mode": o.mode.value, "error": o.error}
        for o in data.outcomes
        if o.status == "error"
    ]
    warnings = [
        {"record_id": o.record_id, "mode": o.mode.value, "warning": w}
        for o in data.outcomes
        for w in o.warnings
    ]
    subset_block = None
    if data.subset_drop is not None:
        drop = data.subset_drop
        subset_block = {
            "kept": drop.kept,
            "dropped_missing_year": drop.dropped_missing_year,
            "dropped_year_range": drop.dropped_year_range,
            "dropped_no_institute": drop.dropped_no_institute,
            "dropped_document_type": drop.dropped_document_type,
        }
    payload = {
        "corpus_size": len(data.corpus),
        "benchmark_databases": sorted(data.database_order[1:]),
        "target_database": data.config.target_database,
        "modes": [mode.value for mode in data.config.modes],
        "request": {
            "count": data.config.request.count,
            "model": data.config.request.model,
            "offset": data.config.request.offset,
            "attributes": list(data.config.request.attributes),
        },
        "matched_overall": sum(1 for m in data.merged.values() if m.matched),
        "matched_corrected": sum(1 for m in data.merged.values() if m.corrected),
        "field_assignment": {
            "mean_fields_per_record": data.assignment.mean_fields_per_record,
            "unmapped_institutes": list(data.assignment.unmapped_institutes),
        },
        "subset": subset_block,
        "ignored_corpus_columns": list(data.corpus.ignored_columns),
        "citation_exclusions": data.citation_excluded,
        "errors": errors,
        "parse_warnings": warnings,
    }
    write_json(path, payload)


def _write_summary(data: ReportData, path: Path) -> None:
    lines: list[str] = []
    lines.append("retrieval scores")
    lines.append(
        f"  {'mode':<14}{'matched':>9}{'corrected':>11}{'returned':>11}"
        f"{'R':>8}{'P':>8}{'P_corr':>8}{'F1_corr':>9}"
    )
    for score in data.scores:
        lines.append(
            f"  {score.mode:<14}{score.matched:>9}{score.corrected_matched:>11}"
            f"{score.returned:>11.1f}"
            f"{score.recall:>8.3f}{score.precision:>8.3f}"
            f"{score.precision_corrected:>8.3f}{score.f1_corrected:>9.3f}"
        )
    table = data.cross_mode
    lines.append("")
    lines.append(f"cross-mode agreement (both modes matched: {table.both_matched})")
    for label, count in (
        ("same type, same entity", table.same_type_same_id),
        ("same type, different entity", table.same_type_different_id),
        ("different type, same entity", table.different_type_same_id),
        ("different type, different entity", table.different_type_different_id),
    ):
        lines.append(
            f"  {label:<34}{count:>7}  {format_percent(count / table.both_matched if table.both_matched else 0):>6}%"
        )
    lines.append(f"  subtracted as false-positive candidates: {table.subtracted}")
    lines.append("")
    lines.append(f"coverage over {len(data.subset)} analyzed records")
    for row in data.coverage_rows:
        lines.append(
            f"  {row.database:<10}{row.covered:>7} covered "
            f"({format_percent(row.covered_fraction):>6}%){row.unique:>7} unique "
            f"({format_percent(row.unique_fraction):>6}%)"
        )
    for title, histogram in (
        ("publication-year deltas", data.year_quality),
        ("author-count deltas (journal articles)", data.author_quality),
    ):
        lines.append("")
        lines.append(f"{title} over {histogram.total} pairs")
        for bucket in histogram.BUCKETS:
            lines.append(
                f"  {bucket:<18}{histogram.counts[bucket]:>7}  "
                f"{format_percent(histogram.counts[bucket] / histogram.total if histogram.total else 0):>6}%"
            )
    lines.append("")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines), encoding="utf-8")


# ------------------------------------------------------------ entry points


def _load_inputs(config: RunConfig, id_filter: Optional[Iterable[str]]):
    corpus = load_corpus(config.corpus_path, config.corpus_format)
    if id_filter is not None:
        wanted = list(dict.fromkeys(id_filter))
        unknown = [rid for rid in wanted if corpus.get(rid) is None]
        if unknown:
            raise ConfigError(
                [f"ids: unknown record id {rid!r}" for rid in unknown]
            )
        wanted_set = set(wanted)
        corpus = Corpus(
            records=tuple(r for r in corpus if r.record_id in wanted_set),
            benchmark_names=corpus.benchmark_names,
            ignored_columns=corpus.ignored_columns,
        )
    stopwords = _load_stopwords(config)
    mapping = (
        FieldMapping.load(config.field_mapping_path)
        if config.field_mapping_path is not None
        else None
    )
    return corpus, stopwords, mapping


def run_pipeline(
    config: RunConfig,
    *,
    id_filter: Optional[Iterable[str]] = None,
    resume: bool = False,
    transport: Optional[Transport] = None,
    output_dir: Optional[Path] = None,
) -> Path:
    """Retrieve every selected record in every configured mode, then write
    the full report bundle. Returns the output directory.

    With ``resume`` the checkpoint under ``state/`` is honored and already
    archived records are not re-queried; otherwise the run starts fresh.
    A fatal transport error propagates after the checkpoint is durable, so
    the same command with ``resume=True`` continues where it stopped.
    """
    corpus, stopwords, mapping = _load_inputs(config, id_filter)
    out = Path(output_dir) if output_dir is not None else config.output_dir
    raw_dir = out / "raw"
    state_dir = out / "state"
    state_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = Checkpoint(state_dir / "checkpoint.jsonl", fresh=not resume)
    active_transport = transport if transport is not None else config.make_transport()

    request_defaults = EvaluateRequest(
        expr="-",
        count=config.request.count,
        model=config.request.model,
        offset=config.request.offset,
        attributes=config.request.attributes,
    )
    for mode in config.modes:
        fetched = errors = 0
        for item in run_batch(
            corpus,
            mode,
            active_transport,
            checkpoint,
            stopwords=stopwords,
            request_defaults=request_defaults,
            archive_dir=raw_dir,
            parallelism=config.parallelism,
        ):
            if item.error:
                errors += 1
            else:
                fetched += 1
        logger.info(
            "%s: %d responses archived, %d records with errors",
            mode.value, fetched, errors,
        )

    data = analyze_archive(corpus, config, stopwords, raw_dir, mapping)
    write_reports(data, out / "reports")
    return out


def recompute_reports(
    config: RunConfig,
    *,
    archive_dir: Optional[Path] = None,
    output_dir: Optional[Path] = None,
    id_filter: Optional[Iterable[str]] = None,
) -> Path:
    """Rebuild the report bundle from an existing raw archive without
    touching the transport."""
    corpus, stopwords, mapping = _load_inputs(config, id_filter)
    out = Path(output_dir) if output_dir is not None else config.output_dir
    raw = Path(archive_dir) if archive_dir is not None else out / "raw"
    if not raw.is_dir():
        raise PipelineError(f"no raw archive at {raw}")
    data = analyze_archive(corpus, config, stopwords, raw, mapping)
    write_reports(data, out / "reports")
    return out
