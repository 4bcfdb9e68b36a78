"""Run configuration: JSON file, validation, transport construction.

Paths inside the file are resolved relative to the file's directory. The
API key for a live transport is named by ``transport.key_env`` and read
from the environment only; it never appears in the config or on the
command line.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .client import DEFAULT_ATTRIBUTES, FixtureTransport, LiveTransport, Transport
from .corpus import MAIN_DOCUMENT_TYPES, CorpusFilter, DocumentType
from .queries import RetrievalMode

__all__ = [
    "ConfigError",
    "TransportConfig",
    "RequestConfig",
    "RunConfig",
    "validate_config",
]

DEFAULT_ENGLISH_TAGS = ("en", "eng", "english")


class ConfigError(Exception):
    """Carries every problem found, each with a field locator."""

    def __init__(self, problems: Sequence[str]):
        self.problems = tuple(problems)
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class TransportConfig:
    type: str  # "fixtures" | "live"
    fixture_dir: Optional[Path] = None
    endpoint: Optional[str] = None
    key_env: str = "COVAUDIT_API_KEY"
    key_header: str = "Ocp-Apim-Subscription-Key"
    requests_per_second: float = 3.0
    max_retries: int = 4


@dataclass(frozen=True)
class RequestConfig:
    count: int = 10
    model: str = "latest"
    offset: int = 0
    attributes: tuple[str, ...] = DEFAULT_ATTRIBUTES


@dataclass(frozen=True)
class RunConfig:
    corpus_path: Path
    corpus_format: str
    field_mapping_path: Optional[Path]
    stopword_path: Optional[Path]
    transport: TransportConfig
    request: RequestConfig
    modes: tuple[RetrievalMode, ...]
    parallelism: int
    output_dir: Path
    target_database: str
    benchmark_databases: Optional[tuple[str, ...]]
    english_tags: tuple[str, ...]
    subset: Optional[CorpusFilter]

    def make_transport(self) -> Transport:
        if self.transport.type == "fixtures":
            return FixtureTransport(self.transport.fixture_dir)
        return LiveTransport(
            self.transport.endpoint,
            self.transport.key_env,
            key_header=self.transport.key_header,
            requests_per_second=self.transport.requests_per_second,
            max_retries=self.transport.max_retries,
        )


_KNOWN_KEYS = {
    "corpus", "field_mapping", "stopwords", "transport", "request", "modes",
    "parallelism", "output_dir", "target_database", "benchmark_databases",
    "english_tags", "subset",
}


def validate_config(path: str | Path) -> RunConfig:
    """Load and validate a config file; raises ConfigError listing every
    problem with its field locator. Defaults: count=10, model=latest,
    offset=0, modes=both, parallelism=1."""
    path = Path(path)
    problems: list[str] = []
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([f"config: file not found: {path}"]) from None
    except ValueError as exc:
        raise ConfigError([f"config: invalid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be an object"])

    base = path.parent

    def resolve(value: str) -> Path:
        candidate = Path(value)
        return candidate if candidate.is_absolute() else (base / candidate)

    for key in sorted(set(raw) - _KNOWN_KEYS):
        problems.append(f"{key}: unknown setting")

    # corpus
    corpus_raw = raw.get("corpus")
    corpus_path = Path("corpus.tsv")
    corpus_format = "tsv"
    if not isinstance(corpus_raw, dict) or "path" not in corpus_raw:
        problems.append("corpus.path: required")
    else:
        corpus_path = resolve(str(corpus_raw["path"]))
        corpus_format = str(corpus_raw.get("format", "tsv"))
        if corpus_format not in ("tsv", "csv"):
            problems.append(f"corpus.format: unsupported: {corpus_format!r}")
        if not corpus_path.is_file():
            problems.append(f"corpus.path: file not found: {corpus_path}")

    # optional files
    field_mapping_path = None
    if raw.get("field_mapping") is not None:
        field_mapping_path = resolve(str(raw["field_mapping"]))
        if not field_mapping_path.is_file():
            problems.append(f"field_mapping: file not found: {field_mapping_path}")
    stopword_path = None
    if raw.get("stopwords") is not None:
        stopword_path = resolve(str(raw["stopwords"]))
        if not stopword_path.is_file():
            problems.append(f"stopwords: file not found: {stopword_path}")

    # transport
    transport_raw = raw.get("transport")
    transport = TransportConfig(type="fixtures", fixture_dir=base)
    if not isinstance(transport_raw, dict) or "type" not in transport_raw:
        problems.append("transport.type: required ('fixtures' or 'live')")
    else:
        kind = str(transport_raw["type"])
        if kind == "fixtures":
            fixture_dir = transport_raw.get("fixture_dir")
            if not fixture_dir:
                problems.append("transport.fixture_dir: required for fixtures")
            else:
                fixture_dir = resolve(str(fixture_dir))
                if not fixture_dir.is_dir():
                    problems.append(
                        f"transport.fixture_dir: directory not found: {fixture_dir}"
                    )
                transport = TransportConfig(type="fixtures", fixture_dir=fixture_dir)
        elif kind == "live":
            endpoint = transport_raw.get("endpoint")
            key_env = str(transport_raw.get("key_env", "COVAUDIT_API_KEY"))
            if not endpoint:
                problems.append("transport.endpoint: required for live transport")
            if not os.environ.get(key_env):
                problems.append(
                    f"transport.key_env: environment variable {key_env} is not set"
                )
            rps = transport_raw.get("requests_per_second", 3.0)
            retries = transport_raw.get("max_retries", 4)
            if not isinstance(rps, (int, float)) or rps <= 0:
                problems.append("transport.requests_per_second: must be positive")
            if not isinstance(retries, int) or retries < 0:
                problems.append("transport.max_retries: must be a non-negative integer")
            transport = TransportConfig(
                type="live",
                endpoint=str(endpoint),
                key_env=key_env,
                key_header=str(
                    transport_raw.get("key_header", "Ocp-Apim-Subscription-Key")
                ),
                requests_per_second=float(rps) if isinstance(rps, (int, float)) else 3.0,
                max_retries=retries if isinstance(retries, int) else 4,
            )
        else:
            problems.append(f"transport.type: unknown value {kind!r}")

    # request parameters
    request_raw = raw.get("request") or {}
    request = RequestConfig()
    if not isinstance(request_raw, dict):
        problems.append("request: must be an object")
    else:
        count = request_raw.get("count", 10)
        offset = request_raw.get("offset", 0)
        if not isinstance(count, int) or count < 1:
            problems.append("request.count: must be an integer >= 1")
            count = 10
        if not isinstance(offset, int) or offset < 0:
            problems.append("request.offset: must be an integer >= 0")
            offset = 0
        attributes = request_raw.get("attributes")
        if attributes is None:
            attributes = DEFAULT_ATTRIBUTES
        elif (
            not isinstance(attributes, list)
            or not attributes
            or not all(isinstance(a, str) for a in attributes)
        ):
            problems.append("request.attributes: must be a non-empty list of strings")
            attributes = DEFAULT_ATTRIBUTES
        request = RequestConfig(
            count=count,
            model=str(request_raw.get("model", "latest")),
            offset=offset,
            attributes=tuple(attributes),
        )

    # modes
    modes_raw = raw.get("modes", [m.value for m in RetrievalMode])
    modes: list[RetrievalMode] = []
    if not isinstance(modes_raw, list) or not modes_raw:
        problems.append("modes: must be a non-empty list")
    else:
        for value in modes_raw:
            try:
                mode = RetrievalMode(value)
            except ValueError:
                problems.append(f"modes: unknown mode {value!r}")
                continue
            if mode not in modes:
                modes.append(mode)

    parallelism = raw.get("parallelism", 1)
    if not isinstance(parallelism, int) or parallelism < 1:
        problems.append("parallelism: must be an integer >= 1")
        parallelism = 1

    output_dir = resolve(str(raw.get("output_dir", "out")))

    benchmark_databases = raw.get("benchmark_databases")
    if benchmark_databases is not None:
        if not isinstance(benchmark_databases, list) or not all(
            isinstance(name, str) for name in benchmark_databases
        ):
            problems.append("benchmark_databases: must be a list of strings")
            benchmark_databases = None
        else:
            benchmark_databases = tuple(benchmark_databases)

    english_tags_raw = raw.get("english_tags", list(DEFAULT_ENGLISH_TAGS))
    if not isinstance(english_tags_raw, list) or not all(
        isinstance(tag, str) for tag in english_tags_raw
    ):
        problems.append("english_tags: must be a list of strings")
        english_tags_raw = list(DEFAULT_ENGLISH_TAGS)

    subset = None
    subset_raw = raw.get("subset")
    if subset_raw is not None:
        if not isinstance(subset_raw, dict):
            problems.append("subset: must be an object")
        else:
            try:
                subset = _parse_subset(subset_raw)
            except ValueError as exc:
                problems.append(f"subset: {exc}")

    if problems:
        raise ConfigError(problems)
    return RunConfig(
        corpus_path=corpus_path,
        corpus_format=corpus_format,
        field_mapping_path=field_mapping_path,
        stopword_path=stopword_path,
        transport=transport,
        request=request,
        modes=tuple(modes),
        parallelism=parallelism,
        output_dir=output_dir,
        target_database=str(raw.get("target_database", "target")),
        benchmark_databases=benchmark_databases,
        english_tags=tuple(tag.lower() for tag in english_tags_raw),
        subset=subset,
    )


def _parse_subset(raw: dict) -> CorpusFilter:
    try:
        year_min = int(raw["year_min"])
        year_max = int(raw["year_max"])
    except (KeyError, TypeError, ValueError):
        raise ValueError("year_min and year_max must be integers") from None
    types_raw = raw.get("document_types", "main")
    if types_raw == "main":
        allowed = MAIN_DOCUMENT_TYPES
    elif isinstance(types_raw, list):
        try:
            allowed = frozenset(DocumentType(value) for value in types_raw)
        except ValueError as exc:
            raise ValueError(f"document_types: {exc}") from None
    else:
        raise ValueError("document_types: list of types or 'main'")
    return CorpusFilter(
        year_min=year_min,
        year_max=year_max,
        require_institute=bool(raw.get("require_institute", False)),
        allowed_document_types=allowed,
    )
