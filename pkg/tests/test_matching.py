import random

import pytest

from covaudit.client import EvaluateRequest, ResultSet, ReturnedEntity
from covaudit.matching import (
    MATCH_PRIORITY,
    CrossModeStatus,
    MatchType,
    match_entity,
    merge_mode_results,
    reconcile_modes,
    select_best,
)
from covaudit.queries import RetrievalMode
from conftest import make_record


def entity(rank=1, entity_id=None, **overrides):
    return ReturnedEntity(
        entity_id=entity_id or f"e{rank}",
        rank=rank,
        **overrides,
    )


def result_set(*entities):
    return ResultSet(
        request=EvaluateRequest(expr="W='x'"),
        entities=tuple(entities),
        raw=b"{}",
    )


def oracle_match_types(record, ent):
    """Independent three-predicate reference for the match rules."""
    types = set()
    if record.doi and ent.doi and record.doi.strip().lower() == ent.doi.strip().lower():
        types.add(MatchType.DOI)

    def clean(text):
        out = "".join(ch if ch.isalnum() else " " for ch in (text or "").lower())
        return " ".join(out.split())

    if clean(record.title) and clean(record.title) == clean(ent.ma_title):
        types.add(MatchType.TITLE)
    local = (record.journal_title, record.volume, record.issue, record.first_page)
    remote = (ent.journal_name, ent.volume, ent.issue, ent.first_page)
    if all(v and v.strip() for v in local) and all(v and v.strip() for v in remote):
        if tuple(v.strip().casefold() for v in local) == tuple(
            v.strip().casefold() for v in remote
        ):
            types.add(MatchType.BIB)
    return types


class TestMatchEntity:
    def test_equal_dois_different_titles(self):
        record = make_record(doi="10.1/ABC", title="One thing")
        ent = entity(doi="10.1/abc", ma_title="another thing")
        assert match_entity(record, ent) == {MatchType.DOI}

    def test_no_dois_identical_cleaned_titles(self):
        record = make_record(title="A Tale: of two Cities!")
        ent = entity(ma_title="a tale of two cities")
        assert match_entity(record, ent) == {MatchType.TITLE}

    def test_title_comparison_is_symmetric(self):
        raw = "Self-Organizing (maps) in BIOLOGY"
        cleaned = "self organizing maps in biology"
        record_raw = make_record(title=raw)
        record_clean = make_record(title=cleaned)
        assert MatchType.TITLE in match_entity(record_raw, entity(ma_title=cleaned))
        assert MatchType.TITLE in match_entity(record_clean, entity(ma_title=raw))

    def test_bib_requires_all_four_fields(self):
        record = make_record(
            journal_title="Journal of Tests", volume="12", issue="3", first_page="100"
        )
        full = entity(
            journal_name="journal of tests", volume="12", issue="3", first_page="100"
        )
        partial = entity(journal_name="journal of tests", volume="12", issue="3")
        assert match_entity(record, full) == {MatchType.BIB}
        assert match_entity(record, partial) == frozenset()

    def test_whitespace_and_case_in_doi(self):
        record = make_record(doi="  10.5/X9 ")
        assert match_entity(record, entity(doi="10.5/x9")) == {MatchType.DOI}

    def test_multiple_types_can_apply(self):
        record = make_record(
            title="Exact title", doi="10.1/z",
            journal_title="J", volume="1", issue="1", first_page="1",
        )
        ent = entity(
            ma_title="exact title", doi="10.1/Z",
            journal_name="j", volume="1", issue="1", first_page="1",
        )
        assert match_entity(record, ent) == {
            MatchType.DOI, MatchType.TITLE, MatchType.BIB
        }

    def test_randomized_pairs_match_predicate_oracle(self):
        rng = random.Random(17)
        dois = [None, "10.1/a", "10.1/B", "10.2/c"]
        titles = ["alpha beta", "Alpha-Beta", "gamma delta", "epsilon"]
        bib = [None, "1", "2"]
        for _ in range(400)          :
            record = make_record(
                doi=rng.choice(dois),
                title=rng.choice(titles),
                journal_title=rng.choice([None, "J one", "J two"]),
                volume=rng.choice(bib),
                issue=rng.choice(bib),
                first_page=rng.choice(bib),
            )
            ent = entity(
                doi=rng.choice(dois),
                ma_title=rng.choice(titles + [None]),
                journal_name=rng.choice([None, "j one", "J two"]),
                volume=rng.choice(bib),
                issue=rng.choice(bib),
                first_page=rng.choice(bib),
            )
            assert match_entity(record, ent) == oracle_match_types(record, ent)


class TestSelectBest:
    def test_priority_beats_rank(self):
        record = make_record(title="the exact title", doi="10.9/q")
        by_title = entity(rank=1, ma_title="the exact title")
        by_doi = entity(rank=3, doi="10.9/Q", ma_title="different")
        match = select_best(record, result_set(by_title, by_doi),
                            RetrievalMode.TITLE_EXACT)
        assert match is not None
        assert match.match_type is MatchType.DOI
        assert match.rank == 3
        assert match.entity_id == by_doi.entity_id

    def test_no_match_returns_none(self):
        record = make_record(title="completely different")
        results = result_set(*(entity(rank=i, ma_title=f"t{i}") for i in range(1, 11)))
        assert select_best(record, results, RetrievalMode.TITLE_WORDS) is None

    def test_lowest_rank_within_type(self):
        record = make_record(title="same title")
        early = entity(rank=2, ma_title="same title")
        late = entity(rank=7, ma_title="same title")
        match = select_best(record, result_set(late, early),
                            RetrievalMode.TITLE_EXACT)
        assert match.rank == 2

    def test_copies_quality_fields(self):
        record = make_record(doi="10.1/x")
        ent = entity(
            rank=1, doi="10.1/x", year=2011, author_count=4, citation_count=9
        )
        match = select_best(record, result_set(ent), RetrievalMode.TITLE_EXACT)
        assert match.matched_year == 2011
        assert match.matched_author_count == 4
        assert match.matched_doi == "10.1/x"
        assert match.matched_citation_count == 9

    def test_matches_exhaustive_enumeration_oracle(self):
        rng = random.Random(29)
        titles = ["t one", "t two", "t three"]
        dois = [None, "10.1/a", "10.1/b"]
        for _ in range(200):
            record = make_record(title=rng.choice(titles), doi=rng.choice(dois))
            entities = [
                entity(
                    rank=rank,
                    ma_title=rng.choice(titles + [None]),
                    doi=rng.choice(dois),
                )
                for rank in range(1, rng.randint(2, 10))
            ]
            got = select_best(record, result_set(*entities),
                              RetrievalMode.TITLE_WORDS)
            # oracle: enumerate all (entity, match type) pairs, order by
            # (priority index, rank), take the first
            pairs = []
            for ent in entities:
                for mt in oracle_match_types(record, ent):
                    pairs.append((MATCH_PRIORITY.index(mt), ent.rank, mt, ent))
            if not pairs:
                assert got is None
                continue
            pairs.sort(key=lambda p: (p[0], p[1]))
            _, rank, mt, ent = pairs[0]
            assert got.match_type is mt
            assert got.rank == rank
            assert got.entity_id == ent.entity_id

    def test_never_lower_priority_when_higher_exists(self):
        rng = random.Random(37)
        for _ in range(100):
            record = make_record(title="known title", doi="10.7/z")
            entities = [
                entity(
                    rank=rank,
                    ma_title=rng.choice(["known title", "other"]),
                    doi=rng.choice(["10.7/z", None]),
                )
                for rank in range(1, 8)
            ]
            results = result_set(*entities)
            got = select_best(record, results, RetrievalMode.TITLE_EXACT)
            if got is None:
                continue
            achievable = set()
            for ent in entities:
                achievable |= match_entity(record, ent)
            for better in MATCH_PRIORITY:
                if better is got.match_type:
                    break
                assert better not in achievable


def match(record_id, mode, entity_id, match_type=MatchType.TITLE, rank=1):
    from covaudit.matching import MatchResult

    return MatchResult(
        record_id=record_id,
        entity_id=entity_id,
        match_type=match_type,
        rank=rank,
        mode=mode,
    )


EXACT = RetrievalMode.TITLE_EXACT
WORDS = RetrievalMode.TITLE_WORDS


class TestReconcileModes:
    def test_same_entity_both_modes(self):
        verdict = reconcile_modes(
            "r1", match("r1", EXACT, "e1"), match("r1", WORDS, "e1")
        )
        assert verdict.status is CrossModeStatus.BOTH_SAME_ID
        assert not verdict.false_positive_candidate

    def test_different_entities_flagged(self):
        verdict = reconcile_modes(
            "r1", match("r1", EXACT, "e1"), match("r1", WORDS, "e2")
        )
        assert verdict.status is CrossModeStatus.BOTH_DIFFERENT_ID
        assert verdict.false_positive_candidate

    def test_single_mode_and_neither(self):
        assert reconcile_modes("r1", match("r1", EXACT, "e1"), None).status is (
            CrossModeStatus.ONLY_EXACT
        )
        assert reconcile_modes("r1", None, match("r1", WORDS, "e1")).status is (
            CrossModeStatus.ONLY_WORDS
        )
        assert reconcile_modes("r1", None, None).status is CrossModeStatus.NEITHER

    def test_record_id_mismatch_is_programming_error(self):
        with pytest.raises(ValueError):
            reconcile_modes("r1", match("r2", EXACT, "e1"), None)

    def test_mode_slot_mismatch_rejected(self):
        with pytest.raises(ValueError):
            reconcile_modes("r1", match("r1", WORDS, "e1"), None)

    def test_doi_duplicate_candidate(self):
        verdict = reconcile_modes(
            "r1",
            match("r1", EXACT, "e1", MatchType.DOI),
            match("r1", WORDS, "e2", MatchType.DOI),
        )
        assert verdict.doi_duplicate_candidate
        mixed = reconcile_modes(
            "r1",
            match("r1", EXACT, "e1", MatchType.DOI),
            match("r1", WORDS, "e2", MatchType.TITLE),
        )
        assert not mixed.doi_duplicate_candidate


class TestMergeModeResults:
    def test_words_only_still_matched_overall(self):
        merged = merge_mode_results("r1", None, match("r1", WORDS, "e1"))
        assert merged.matched
        assert merged.representative.mode is WORDS

    def test_neither_is_unmatched(self):
        merged = merge_mode_results("r1", None, None)
        assert not merged.matched
        assert merged.representative is None

    def test_exact_preferred_as_representative(self):
        merged = merge_mode_results(
            "r1", match("r1", EXACT, "e1"), match("r1", WORDS, "e2")
        )
        assert merged.representative.mode is EXACT

    def test_corrected_excludes_false_positives(self):
        merged = merge_mode_results(
            "r1", match("r1", EXACT, "e1"), match("r1", WORDS, "e2")
        )
        assert merged.matched and not merged.corrected

    def test_union_count_matches_popcount_oracle(self):
        rng = random.Random(55)
        flags = [(rng.random() < 0.5, rng.random() < 0.5) for _ in range(500)]
        merged = [
            merge_mode_results(
                f"r{i}",
                match(f"r{i}", EXACT, "e1") if in_exact else None,
                match(f"r{i}", WORDS, "e1") if in_words else None,
            )
            for i, (in_exact, in_words) in enumerate(flags)
        ]
        overall = sum(1 for m in merged if m.matched)
        assert overall == sum(1 for a, b in flags if a | b)
