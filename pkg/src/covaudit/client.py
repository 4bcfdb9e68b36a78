"""Evaluate-endpoint client: transports, response parsing, batch driver.

A Transport turns one request into the raw JSON body of an Evaluate
response. Two implementations exist: LiveTransport speaks HTTPS to the
real service; FixtureTransport replays recorded bodies from a directory
tree (``<root>/<mode>/<record_id>.json``), which makes every downstream
computation runnable and testable offline.

run_batch drives a whole corpus through one retrieval mode, archiving raw
bodies and checkpointing progress so an interrupted run can resume without
re-querying finished records.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Protocol

from .corpus import Corpus, PublicationRecord
from .queries import QueryBuildError, RetrievalMode, StopwordList, build_query

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_ATTRIBUTES",
    "EvaluateRequest",
    "EntityAuthor",
    "FieldOfStudy",
    "ReturnedEntity",
    "ResultSet",
    "TransportError",
    "FatalTransportError",
    "RecordFetchError",
    "MissingFixtureError",
    "MalformedPayloadError",
    "Transport",
    "FixtureTransport",
    "LiveTransport",
    "Checkpoint",
    "BatchItem",
    "evaluate",
    "run_batch",
    "parse_result_set",
]

# Entity attributes requested by default; E carries the extended metadata
# payload (DOI, volume, issue, first page among others).
DEFAULT_ATTRIBUTES = (
    "Id", "Ti", "Y", "D", "CC", "ECC",
    "AA.AuN", "AA.AuId", "AA.AfN", "AA.AfId",
    "F.FN", "F.FId", "J.JN", "J.JId", "C.CN", "C.CId",
    "RId", "E",
)


@dataclass(frozen=True)
class EvaluateRequest:
    """Parameters of one Evaluate call."""

    expr: str
    count: int = 10
    model: str = "latest"
    offset: int = 0
    attributes: tuple[str, ...] = DEFAULT_ATTRIBUTES

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.offset < 0:
            raise ValueError("offset must be >= 0")
        if not self.attributes:
            raise ValueError("attributes must be non-empty")


@dataclass(frozen=True)
class EntityAuthor:
    name: Optional[str] = None
    author_id: Optional[str] = None
    affiliation_name: Optional[str] = None
    affiliation_id: Optional[str] = None


@dataclass(frozen=True)
class FieldOfStudy:
    name: Optional[str] = None
    field_id: Optional[str] = None


@dataclass(frozen=True)
class ReturnedEntity:
    """One candidate entity from a result set, rank assigned by position."""

    entity_id: str
    rank: int
    ma_title: Optional[str] = None
    year: Optional[int] = None
    date: Optional[str] = None
    citation_count: Optional[int] = None
    estimated_citation_count: Optional[int] = None
    log_probability: Optional[float] = None
    authors: tuple[EntityAuthor, ...] = ()
    author_count: Optional[int] = None
    fields_of_study: tuple[FieldOfStudy, ...] = ()
    journal_name: Optional[str] = None
    journal_id: Optional[str] = None
    conference_name: Optional[str] = None
    conference_id: Optional[str] = None
    reference_ids: tuple[str, ...] = ()
    doi: Optional[str] = None
    volume: Optional[str] = None
    issue: Optional[str] = None
    first_page: Optional[str] = None


@dataclass(frozen=True)
class ResultSet:
    """Parsed response: ordered entities plus the raw body for archiving."""

    request: EvaluateRequest
    entities: tuple[ReturnedEntity, ...]
    raw: bytes
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entities)


class TransportError(Exception):
    """Base class for transport-level failures."""


class FatalTransportError(TransportError):
    """Stops the whole run (auth/quota rejection, retries exhausted)."""


class RecordFetchError(TransportError):
    """Affects a single record; recorded in the run report, record skipped."""


class MissingFixtureError(RecordFetchError):
    pass


class MalformedPayloadError(Exception):
    """The response body cannot be interpreted as an Evaluate result."""


class Transport(Protocol):
    def fetch(
        self, request: EvaluateRequest, *, record_id: str, mode: RetrievalMode
    ) -> bytes: ...


class FixtureTransport:
    """Replay raw JSON bodies from ``<root>/<mode>/<record_id>.json``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch(
        self, request: EvaluateRequest, *, record_id: str, mode: RetrievalMode
    ) -> bytes:
        path = self.root / mode.value / f"{record_id}.json"
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise MissingFixtureError(f"no fixture at {path}") from None


class _TokenBucket:
    """Simple thread-safe request pacing: ``rate`` tokens per second."""

    def __init__(self, rate: float):
        self.rate = rate
        self.capacity = max(1.0, rate)
        self._tokens = self.capacity
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(
                    self.capacity, self._tokens + (now - self._stamp) * self.rate
                )
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait_for = (1.0 - self._tokens) / self.rate
            time.sleep(wait_for)


class LiveTransport:
    """HTTPS transport with pacing and bounded exponential-backoff retries.

    The API key is read from the environment (never passed on the command
    line) and sent in a configurable header. 401/403 and exhausted retries
    are fatal for the run; other client errors affect only the record.
    """

    RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        endpoint: str,
        key_env: str,
        *,
        key_header: str = "Ocp-Apim-Subscription-Key",
        requests_per_second: float = 3.0,
        max_retries: int = 4,
        backoff_base: float = 0.5,
        backoff_cap: float = 30.0,
        timeout: float = 30.0,
        session=None,
    ):
        key = os.environ.get(key_env)
        if not key:
            raise ValueError(f"environment variable {key_env} is not set")
        if session is None:
            import requests

            session = requests.Session()
        self.endpoint = endpoint
        self._headers = {key_header: key, "Accept": "application/json"}
        self._session = session
        self._bucket = _TokenBucket(requests_per_second)
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.timeout = timeout

    def fetch(
        self, request: EvaluateRequest, *, record_id: str, mode: RetrievalMode
    ) -> bytes:
        import requests

        params = {
            "expr": request.expr,
            "model": request.model,
            "count": str(request.count),
            "offset": str(request.offset),
            "attributes": ",".join(request.attributes),
        }
        last_error = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = min(self.backoff_cap, self.backoff_base * 2 ** (attempt - 1))
                time.sleep(delay)
            self._bucket.acquire()
            try:
                response = self._session.get(
                    self.endpoint,
                    params=params,
                    headers=self._headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"network error: {exc}"
                logger.warning("%s/%s: %s", record_id, mode.value, last_error)
                continue
            if response.status_code == 200:
                return response.content
            if response.status_code in (401, 403):
                raise FatalTransportError(
                    f"rejected with HTTP {response.status_code}: check API key/quota"
                )
            if response.status_code in self.RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                logger.warning("%s/%s: %s, retrying", record_id, mode.value, last_error)
                continue
            raise RecordFetchError(f"HTTP {response.status_code}")
        raise FatalTransportError(
            f"giving up after {self.max_retries + 1} attempts ({last_error})"
        )


class Checkpoint:
    """Append-only progress log, one JSON line per completed (record, mode).

    Loading tolerates a torn final line from a crashed run. Marking is
    serialized; resuming never re-processes a completed record.
    """

    def __init__(self, path: str | Path, fresh: bool = False):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._done: set[tuple[str, str]] = set()
        if fresh:
            self.path.unlink(missing_ok=True)
        elif self.path.exists():
            with open(self.path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                        self._done.add((entry["record_id"], entry["mode"]))
                    except (ValueError, KeyError, TypeError):
                        logger.warning("checkpoint: skipping torn line %r", line[:80])

    def is_done(self, record_id: str, mode: RetrievalMode) -> bool:
        return (record_id, mode.value) in self._done

    def mark_done(self, record_id: str, mode: RetrievalMode) -> None:
        with self._lock:
            if (record_id, mode.value) in self._done:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(
                    json.dumps({"record_id": record_id, "mode": mode.value}) + "\n"
                )
                handle.flush()
            self._done.add((record_id, mode.value))

    def __len__(self) -> int:
        return len(self._done)


def _opt_int(payload: Mapping, key: str) -> Optional[int]:
    value = payload.get(key)
    if value is None:
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        raise MalformedPayloadError(f"{key}: not an integer: {value!r}") from None


def _opt_str(payload: Mapping, key: str) -> Optional[str]:
    value = payload.get(key)
    if value is None:
        return None
    return str(value)


def _parse_entity(item, rank: int, warnings: list[str]) -> ReturnedEntity:
    if not isinstance(item, dict):
        raise MalformedPayloadError(f"entity at rank {rank} is not an object")
    if "Id" not in item:
        raise MalformedPayloadError(f"entity at rank {rank} has no Id")
    entity_id = str(item["Id"])

    logprob = item.get("logprob")
    if logprob is None:
        warnings.append(f"entity {entity_id}: missing logprob")
    else:
        logprob = float(logprob)

    authors: tuple[EntityAuthor, ...] = ()
    author_count: Optional[int] = None
    if "AA" in item:
        aa = item["AA"]
        if not isinstance(aa, list) or not all(isinstance(a, dict) for a in aa):
            raise MalformedPayloadError(
                f"entity {entity_id}: AA is not a list of objects"
            )
        authors = tuple(
            EntityAuthor(
                name=_opt_str(a, "AuN"),
                author_id=_opt_str(a, "AuId"),
                affiliation_name=_opt_str(a, "AfN"),
                affiliation_id=_opt_str(a, "AfId"),
            )
            for a in aa
        )
        author_count = len(authors)

    fos_raw = item.get("F", [])
    if not isinstance(fos_raw, list) or not all(
        isinstance(f, dict) for f in fos_raw
    ):
        raise MalformedPayloadError(f"entity {entity_id}: F is not a list of objects")
    fos = tuple(
        FieldOfStudy(name=_opt_str(f, "FN"), field_id=_opt_str(f, "FId"))
        for f in fos_raw
    )
    journal = item.get("J") or {}
    conference = item.get("C") or {}
    if not isinstance(journal, dict) or not isinstance(conference, dict):
        raise MalformedPayloadError(f"entity {entity_id}: J/C is not an object")
    references = item.get("RId", [])
    if not isinstance(references, list):
        raise MalformedPayloadError(f"entity {entity_id}: RId is not a list")

    doi = volume = issue = first_page = None
    extended = item.get("E")
    if extended is not None:
        if isinstance(extended, str):
            try:
                extended = json.loads(extended)
            except ValueError:
                warnings.append(f"entity {entity_id}: unparseable extended metadata")
                extended = None
        if extended is not None and not isinstance(extended, dict):
            warnings.append(f"entity {entity_id}: extended metadata is not an object")
            extended = None
        if extended:
            doi = _opt_str(extended, "DOI")
            volume = _opt_str(extended, "V")
            issue = _opt_str(extended, "I")
            first_page = _opt_str(extended, "FP")

    return ReturnedEntity(
        entity_id=entity_id,
        rank=rank,
        ma_title=_opt_str(item, "Ti"),
        year=_opt_int(item, "Y"),
        date=_opt_str(item, "D"),
        citation_count=_opt_int(item, "CC"),
        estimated_citation_count=_opt_int(item, "ECC"),
        log_probability=logprob,
        authors=authors,
        author_count=author_count,
        fields_of_study=fos,
        journal_name=_opt_str(journal, "JN"),
        journal_id=_opt_str(journal, "JId"),
        conference_name=_opt_str(conference, "CN"),
        conference_id=_opt_str(conference, "CId"),
        reference_ids=tuple(str(r) for r in references),
        doi=doi,
        volume=volume,
        issue=issue,
        first_page=first_page,
    )


def parse_result_set(raw: bytes | str, request: EvaluateRequest) -> ResultSet:
    """Parse a raw Evaluate response body.

    Ranks are assigned by response order (1-based). An empty entity list is
    a valid result. Log probabilities out of rank order only produce a
    warning; structural problems raise MalformedPayloadError.
    """
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedPayloadError(f"invalid JSON: {exc}") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("entities"), list):
        raise MalformedPayloadError("response has no 'entities' list")

    items = payload["entities"]
    if len(items) > request.count:
        raise MalformedPayloadError(
            f"{len(items)} entities exceed requested count={request.count}"
        )

    warnings: list[str] = []
    entities = tuple(
        _parse_entity(item, rank, warnings)
        for rank, item in enumerate(items, start=1)
    )
    previous: Optional[float] = None
    for entity in entities:
        if entity.log_probability is None:
            continue
        if previous is not None and entity.log_probability > previous:
            warnings.append(
                f"log probabilities out of rank order at rank {entity.rank}"
            )
            break
        previous = entity.log_probability

    return ResultSet(
        request=request, entities=entities, raw=raw, warnings=tuple(warnings)
    )


def evaluate(
    request: EvaluateRequest,
    transport: Transport,
    *,
    record_id: str = "",
    mode: RetrievalMode = RetrievalMode.TITLE_EXACT,
) -> ResultSet:
    """Submit one request over the given transport and parse the response."""
    raw = transport.fetch(request, record_id=record_id, mode=mode)
    return parse_result_set(raw, request)


@dataclass(frozen=True)
class BatchItem:
    """Outcome for one (record, mode): a result set or a recorded error."""

    record_id: str
    mode: RetrievalMode
    result: Optional[ResultSet] = None
    error: Optional[str] = None


def run_batch(
    corpus: Corpus,
    mode: RetrievalMode,
    transport: Transport,
    checkpoint: Optional[Checkpoint] = None,
    *,
    stopwords: StopwordList,
    request_defaults: Optional[EvaluateRequest] = None,
    archive_dir: Optional[str | Path] = None,
    id_filter: Optional[Iterable[str]] = None,
    parallelism: int = 1,
) -> Iterator[BatchItem]:
    """Query every selected record in one mode, yielding items as they
    complete (corpus order when parallelism is 1).

    Raw bodies are archived under ``<archive_dir>/<mode>/<record_id>.json``
    before the checkpoint advances, so a resumed run re-queries nothing it
    already persisted and never yields a completed record twice. Per-record
    problems become BatchItem.error; FatalTransportError aborts the run
    after in-flight requests drain, leaving a resumable checkpoint.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    defaults = request_defaults or EvaluateRequest(expr="-")
    wanted = set(id_filter) if id_filter is not None else None
    archive_root = Path(archive_dir) / mode.value if archive_dir else None
    if archive_root:
        archive_root.mkdir(parents=True, exist_ok=True)

    todo = [
        record
        for record in corpus
        if (wanted is None or record.record_id in wanted)
        and not (checkpoint is not None and checkpoint.is_done(record.record_id, mode))
    ]

    def worker(record: PublicationRecord) -> BatchItem:
        try:
            expr = build_query(record.title, mode, stopwords)
        except QueryBuildError as exc:
            item = BatchItem(record.record_id, mode, error=f"query: {exc}")
            if checkpoint is not None:
                checkpoint.mark_done(record.record_id, mode)
            return item
        request = replace(defaults, expr=expr.text)
        try:
            raw = transport.fetch(request, record_id=record.record_id, mode=mode)
        except RecordFetchError as exc:
            item = BatchItem(record.record_id, mode, error=f"fetch: {exc}")
            if checkpoint is not None:
                checkpoint.mark_done(record.record_id, mode)
            return item
        if archive_root:
            (archive_root / f"{record.record_id}.json").write_bytes(raw)
        if checkpoint is not None:
            checkpoint.mark_done(record.record_id, mode)
        try:
            result = parse_result_set(raw, request)
        except MalformedPayloadError as exc:
            return BatchItem(record.record_id, mode, error=f"payload: {exc}")
        return BatchItem(record.record_id, mode, result=result)

    if parallelism == 1:
        for record in todo:
            yield worker(record)
        return

    fatal: Optional[FatalTransportError] = None
    iterator = iter(todo)
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        pending: set = set()
        while True:
            while fatal is None and len(pending) < parallelism:
                record = next(iterator, None)
                if record is None:
                    break
                pending.add(pool.submit(worker, record))
            if not pending:
                break
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for future in done:
                try:
                    yield future.result()
                except FatalTransportError as exc:
                    fatal = exc
    if fatal is not None:
        raise fatal
