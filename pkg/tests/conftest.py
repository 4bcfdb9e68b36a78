from pathlib import Path

import pytest

from covaudit.corpus import (
    AccessStatus,
    BenchmarkEntry,
    DocumentType,
    PublicationRecord,
)

DESK_DIR = Path(__file__).parent / "data" / "desk"


@pytest.fixture(scope="session")
def desk_dir() -> Path:
    return DESK_DIR


def make_record(record_id="r1", title="A sample title", **overrides):
    """Shorthand for building valid records in tests."""
    defaults = dict(
        record_id=record_id,
        title=title,
        document_type=DocumentType.JOURNAL_ARTICLE,
        access_status=AccessStatus.PUBLIC,
        publication_year=2010,
    )
    defaults.update(overrides)
    return PublicationRecord(**defaults)


@pytest.fixture
def record_factory():
    return make_record


__all__ = ["make_record", "DESK_DIR", "BenchmarkEntry"]
