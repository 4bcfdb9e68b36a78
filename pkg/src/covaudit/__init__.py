"""covaudit: audit a scholarly graph database's coverage of a verified
institutional publication list.

The pipeline builds title-based query expressions, retrieves candidate
entities from an Evaluate-style API (live or replayed from fixtures),
links them to local records by prioritized match rules, and writes
coverage, metadata-quality and citation-correlation reports.
"""
from .corpus import (
    AccessStatus,
    BenchmarkEntry,
    Corpus,
    CorpusFilter,
    DocumentType,
    FieldMapping,
    PublicationRecord,
    assign_fields,
    derive_subset,
    load_corpus,
)
from .queries import (
    QueryExpression,
    RetrievalMode,
    StopwordList,
    build_exact_query,
    build_query,
    build_words_query,
    normalize_exact_title,
    tokenize_for_words,
)
from .client import (
    EvaluateRequest,
    FixtureTransport,
    LiveTransport,
    ResultSet,
    ReturnedEntity,
    evaluate,
    run_batch,
)
from .matching import (
    MatchResult,
    MatchType,
    match_entity,
    merge_mode_results,
    reconcile_modes,
    select_best,
)

__version__ = "0.1.0"
