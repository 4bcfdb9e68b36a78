"""Build Evaluate query expressions from publication titles.

Two retrieval modes are supported. ``title_exact`` sends the whole cleaned
title as a ``Ti='...'`` term. ``title_words`` sends the title's content
words as a left-nested ``And(W='...',W='...')`` chain, after stop word and
number filtering.

The cleaning rule is deliberately simple: lowercase the title, turn every
character that is not a letter or digit into a space, and collapse
whitespace runs. Digits survive in ``title_exact``; pure-number tokens are
dropped in ``title_words`` only.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "RetrievalMode",
    "QueryExpression",
    "StopwordList",
    "QueryBuildError",
    "EmptyNormalizedTitleError",
    "NoQueryTokensError",
    "normalize_exact_title",
    "tokenize_for_words",
    "build_exact_query",
    "build_words_query",
    "build_query",
]

# \w covers Unicode alphanumerics plus the underscore; [\W_] is therefore
# exactly "not a letter and not a digit".
_FILTERED_RUN = re.compile(r"[\W_]+")
_FILTERED_RUN_KEEP_APOSTROPHE = re.compile(r"(?:[^\w'’]|_)+")
_APOSTROPHES = re.compile(r"['’]")
_PURE_NUMBER = re.compile(r"^[0-9]+$")


class RetrievalMode(str, Enum):
    """How a local title is turned into a query expression."""

    TITLE_EXACT = "title_exact"
    TITLE_WORDS = "title_words"


class QueryBuildError(ValueError):
    """No query expression can be built from the given title."""


class EmptyNormalizedTitleError(QueryBuildError):
    """The title contains no letters or digits once cleaned."""


class NoQueryTokensError(QueryBuildError):
    """Stop word and number filtering removed every candidate token."""


@dataclass(frozen=True)
class QueryExpression:
    """A serialized query expression ready to submit.

    ``token_count`` is 0 for ``title_exact`` expressions and the number of
    ``W=`` terms for ``title_words`` expressions.
    """

    mode: RetrievalMode
    text: str
    token_count: int = 0


class StopwordList:
    """Lowercase stop words in the corpus languages.

    Entries must be lowercase and free of whitespace; the loaders enforce
    both. Files use one word per line, blank lines and ``#`` comments
    allowed.
    """

    def __init__(self, words: Iterable[str]):
        validated = set()
        for word in words:
            self._check(word)
            validated.add(word)
        self._words = frozenset(validated)

    @staticmethod
    def _check(word: str, where: str = "") -> None:
        if not word or word != word.strip() or any(ch.isspace() for ch in word):
            raise ValueError(f"stop word contains whitespace{where}: {word!r}")
        if word != word.lower():
            raise ValueError(f"stop word is not lowercase{where}: {word!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "StopwordList":
        words = []
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                word = line.strip()
                if not word or word.startswith("#"):
                    continue
                cls._check(word, f" ({path}:{lineno})")
                words.append(word)
        return cls(words)

    @classmethod
    def default(cls) -> "StopwordList":
        """The list shipped with the package (en/de/fr/it/es)."""
        from importlib import resources

        path = resources.files("covaudit").joinpath("data/stopwords.txt")
        with resources.as_file(path) as concrete:
            return cls.from_file(concrete)

    def __contains__(self, word: object) -> bool:
        return word in self._words

    def __len__(self) -> int:
        return len(self._words)

    def __iter__(self):
        return iter(self._words)


def normalize_exact_title(title: str) -> str:
    """Clean a title for exact-title querying and matching.

    Lowercases, replaces every run of non-alphanumeric characters with a
    single space and trims the ends. Raises EmptyNormalizedTitleError when
    nothing remains.
    """
    cleaned = _FILTERED_RUN.sub(" ", title.lower()).strip()
    if not cleaned:
        raise EmptyNormalizedTitleError(
            f"title consists only of filtered characters: {title!r}"
        )
    return cleaned


def _apostrophe_part(term: str) -> str:
    """Keep the longer side of an apostrophe-bearing term (leftmost on ties)."""
    if not _APOSTROPHES.search(term):
        return term
    parts = _APOSTROPHES.split(term)
    return max(parts, key=len)


def tokenize_for_words(title: str, stopwords: StopwordList) -> list[str]:
    """Produce the sorted, de-duplicated token list for a words query.

    Tokens are the cleaned title's words minus stop words and pure-number
    words. A term containing an apostrophe contributes only the longer part
    around it (the serialization uses the apostrophe as its delimiter).
    Raises NoQueryTokensError when nothing survives.
    """
    cleaned = _FILTERED_RUN_KEEP_APOSTROPHE.sub(" ", title.lower())
    tokens = set()
    for term in cleaned.split():
        term = _apostrophe_part(term)
        if not term or term in stopwords or _PURE_NUMBER.match(term):
            continue
        tokens.add(term)
    if not tokens:
        raise NoQueryTokensError(
            f"no queryable words left after filtering: {title!r}"
        )
    return sorted(tokens)


def build_exact_query(title: str) -> QueryExpression:
    """Serialize the exact-title expression ``Ti='<cleaned title>'``."""
    return QueryExpression(
        mode=RetrievalMode.TITLE_EXACT,
        text=f"Ti='{normalize_exact_title(title)}'",
        token_count=0,
    )


def build_words_query(tokens: Sequence[str]) -> QueryExpression:
    """Serialize tokens as a left-nested binary And chain.

    A single token is emitted un-nested. Tokens are used in the order
    given; callers normally pass the output of tokenize_for_words.
    """
    if not tokens:
        raise NoQueryTokensError("cannot build a words query from zero tokens")
    text = f"W='{tokens[0]}'"
    for token in tokens[1:]:
        text = f"And({text},W='{token}')"
    return QueryExpression(
        mode=RetrievalMode.TITLE_WORDS,
        text=text,
        token_count=len(tokens),
    )


def build_query(
    title: str, mode: RetrievalMode, stopwords: StopwordList
) -> QueryExpression:
    """Build the expression for one title in the given retrieval mode."""
    if mode is RetrievalMode.TITLE_EXACT:
        return build_exact_query(title)
    return build_words_query(tokenize_for_words(title, stopwords))
