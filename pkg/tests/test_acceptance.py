"""Acceptance suite: one test (or parametrized group) per criterion, each
at its stated tolerance. Run with -v to get one pass/fail line per check.

The desk-scale checks drive the shipped 200-record corpus and fixture set
through the real CLI and compare every reported figure with the
independent brute-force oracles in oracles.py.
"""
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest
from click.testing import CliRunner

from covaudit.cli import main as cli_main
from covaudit.citations import CitationVectorPair, kendall_tau_b, spearman_mean_rank
from covaudit.client import FatalTransportError, FixtureTransport
from covaudit.config import validate_config
from covaudit.metrics import delta_histogram, f1, precision, recall, unique_coverage
from covaudit.pipeline import run_pipeline
from covaudit.queries import StopwordList, build_exact_query, build_words_query, tokenize_for_words

from oracles import DeskOracle, load_stopwords, read_report_csv

DESK = Path(__file__).parent / "data" / "desk"


# --------------------------------------------------------------- criterion 1

class TestC1QueryFidelity:
    TITLE = (
        "HEE-GER: a systematic review of German economic evaluations of "
        "health care published 1990-2004"
    )

    def test_words_expression_byte_exact(self):
        tokens = tokenize_for_words(self.TITLE, StopwordList.default())
        assert build_words_query(tokens).text == (
            "And(And(And(And(And(And(And(And(And(W='care',W='economic'),"
            "W='evaluations'),W='ger'),W='german'),W='health'),W='hee'),"
            "W='published'),W='review'),W='systematic')"
        )

    def test_exact_expression_byte_exact(self):
        assert build_exact_query(self.TITLE).text == (
            "Ti='hee ger a systematic review of german economic evaluations "
            "of health care published 1990 2004'"
        )


# --------------------------------------------------------------- criterion 2

# Published counts: (matched, corrected, returned) per mode; corpus 91,215.
_C2_COUNTS = {
    "title_exact": (46_697, 45_775, 52_067.0),
    "title_words": (46_912, 45_990, 66_771.0),
    "combined": (48_231, 47_309, 59_419.0),
}
_C2_PUBLISHED = {
    # mode: (R, P, P_corrected, F1_corrected)
    "title_exact": (0.512, 0.897, 0.879, 0.647),
    "title_words": (0.514, 0.703, 0.689, 0.594),
    "combined": (0.529, 0.812, 0.796, 0.641),
}


@pytest.mark.parametrize("mode", list(_C2_COUNTS))
@pytest.mark.parametrize("metric", ["recall", "precision", "precision_corrected",
                                    "f1_corrected"])
def test_c2_retrieval_metric_arithmetic(mode, metric):
    matched, corrected, returned = _C2_COUNTS[mode]
    published = dict(
        zip(["recall", "precision", "precision_corrected", "f1_corrected"],
            _C2_PUBLISHED[mode])
    )[metric]
    computed = {
        "recall": recall(matched, 91_215),
        "precision": precision(matched, returned),
        "precision_corrected": precision(corrected, returned),
        "f1_corrected": f1(precision(corrected, returned), recall(matched, 91_215)),
    }[metric]
    # The two f1_corrected reference values 0.594 and 0.641 are not the
    # harmonic mean of their own row's corrected precision and recall
    # (they correspond to the uncorrected precision instead); the checks
    # are kept as stated and fail honestly.
    assert computed == pytest.approx(published, abs=0.001)


# --------------------------------------------------------------- criterion 3

class TestC3CrossModeReconciliation:
    COUNTS = {"ss": 40_588, "sd": 511, "ds": 3_898, "dd": 411}
    PUBLISHED_PCT = {"ss": 89.4, "sd": 1.1, "ds": 8.6, "dd": 0.9}
    BOTH = 45_378

    @pytest.mark.parametrize("cell", ["ss", "sd", "ds", "dd"])
    def test_percent_of_both_matched(self, cell):
        computed = 100.0 * self.COUNTS[cell] / self.BOTH
        assert computed == pytest.approx(self.PUBLISHED_PCT[cell], abs=0.05)

    def test_corrected_match_rule_subtracts_922(self):
        subtracted = self.COUNTS["sd"] + self.COUNTS["dd"]
        assert subtracted == 922
        assert 46_697 - subtracted == 45_775
        assert 46_912 - subtracted == 45_990
        assert 48_231 - subtracted == 47_309


# --------------------------------------------------------------- criterion 4

class TestC4CoverageArithmetic:
    @pytest.mark.parametrize(
        "covered,expected",
        [(35_557, 56.6), (36_351, 57.9), (33_000, 52.6)],
    )
    def test_overall_coverage_percent(self, covered, expected):
        assert 100.0 * covered / 62_791 == pytest.approx(expected, abs=0.05)

    def test_unique_coverage_equals_exhaustive_scan_on_10k_records(self):
        rng = random.Random(1234)
        ids = [f"r{i}" for i in range(10_000)]
        covered = {
            db: {rid for rid in ids if rng.random() < p}
            for db, p in (("ma", 0.55), ("scopus", 0.5), ("wos", 0.35))
        }
        got = unique_coverage(ids, covered)
        for db in covered:
            expected = 0
            for rid in ids:
                holders = [name for name, members in covered.items() if rid in members]
                if holders == [db] or (len(holders) == 1 and holders[0] == db):
                    expected += 1
            assert got[db] == expected


# --------------------------------------------------------------- criterion 5

@pytest.fixture(scope="module")
def desk_bundle(tmp_path_factory):
    """Full CLI run over the shipped desk data; returns (reports dir, elapsed)."""
    out = tmp_path_factory.mktemp("desk_run")
    started = time.monotonic()
    result = CliRunner().invoke(
        cli_main,
        ["run", "-c", str(DESK / "config.json"), "-o", str(out)],
        catch_exceptions=False,
    )
    elapsed = time.monotonic() - started
    assert result.exit_code == 0, result.output
    return out, elapsed


@pytest.fixture(scope="module")
def oracle():
    from importlib import resources

    stopword_path = resources.files("covaudit").joinpath("data/stopwords.txt")
    with resources.as_file(stopword_path) as concrete:
        words = load_stopwords(Path(concrete))
    return DeskOracle(DESK, words)


class TestC5DeskScaleEndToEnd:
    def test_runtime_under_ten_seconds(self, desk_bundle):
        _, elapsed = desk_bundle
        assert elapsed < 10.0

    def test_retrieval_scores_equal_oracle(self, desk_bundle, oracle):
        out, _ = desk_bundle
        rows = {r["mode"]: r for r in read_report_csv(out / "reports" / "retrieval_scores.csv")}
        expected = oracle.scores()
        assert set(rows) == set(expected)
        for mode, want in expected.items():
            got = rows[mode]
            assert int(got["matched"]) == want["matched"]
            assert int(got["corrected_matched"]) == want["corrected_matched"]
            assert float(got["returned"]) == want["returned"]
            for key in ("recall", "precision", "precision_corrected", "f1_corrected"):
                assert float(got[key]) == pytest.approx(want[key], abs=1e-12), (
                    mode, key,
                )

    def test_match_log_covers_every_record_and_mode(self, desk_bundle, oracle):
        out, _ = desk_bundle
        rows = read_report_csv(out / "reports" / "match_log.csv")
        assert len(rows) == 2 * len(oracle.rows)
        assert len({(r["record_id"], r["mode"]) for r in rows}) == len(rows)
        for row in rows:
            want = oracle.outcome[row["mode"]][row["record_id"]]
            scanned = oracle.entity_counts.get((row["mode"], row["record_id"]), 0)
            assert int(row["returned"]) == scanned
            if want == "error":
                assert row["status"] == "error"
            elif want == "unmatched":
                assert row["status"] == "unmatched"
            else:
                assert row["status"] == "matched"
                assert row["match_type"] == want["type"]
                assert int(row["rank"]) == want["rank"]
                assert row["entity_id"] == want["id"]

    def test_cross_mode_cells_equal_oracle(self, desk_bundle, oracle):
        out, _ = desk_bundle
        rows = read_report_csv(out / "reports" / "cross_mode.csv")
        key = {("same", "same"): "ss", ("same", "different"): "sd",
               ("different", "same"): "ds", ("different", "different"): "dd"}
        for row in rows:
            cell = key[(row["match_type_agreement"], row["entity_id_agreement"])]
            assert int(row["n"]) == oracle.cells[cell]

    @pytest.mark.parametrize("which,filename", [
        ("year", "quality_publication_year.csv"),
        ("author", "quality_author_count.csv"),
    ])
    def test_quality_histograms_equal_oracle(self, desk_bundle, oracle, which, filename):
        out, _ = desk_bundle
        rows = {r["bucket"]: r for r in read_report_csv(out / "reports" / filename)}
        expected = oracle.histograms()[which]
        total = sum(expected.values())
        for bucket, count in expected.items():
            assert int(rows[bucket]["n"]) == count
            assert float(rows[bucket]["fraction"]) == pytest.approx(
                count / total, abs=1e-12
            )

    def test_overall_and_unique_coverage_equal_oracle(self, desk_bundle, oracle):
        out, _ = desk_bundle
        rows = {r["database"]: r for r in read_report_csv(out / "reports" / "coverage_overall.csv")}
        expected = oracle.overall_coverage()
        assert set(rows) == set(expected)
        for db, want in expected.items():
            assert int(rows[db]["covered"]) == want["covered"]
            assert int(rows[db]["unique"]) == want["unique"]
            assert float(rows[db]["covered_fraction"]) == pytest.approx(
                want["covered_fraction"], abs=1e-12
            )
            assert float(rows[db]["unique_fraction"]) == pytest.approx(
                want["unique_fraction"], abs=1e-12
            )

    @pytest.mark.parametrize("dimension", [
        "document_type", "language_class", "access_status", "year",
        "fos_major", "fos_sub",
    ])
    def test_dimension_coverage_equals_group_by_oracle(
        self, desk_bundle, oracle, dimension
    ):
        out, _ = desk_bundle
        rows = {r["category"]: r for r in read_report_csv(
            out / "reports" / f"coverage_{dimension}.csv"
        )}
        expected = oracle.breakdown(dimension)
        assert set(rows) == set(expected)
        for category, want in expected.items():
            got = rows[category]
            assert int(got["n"]) == want["n"], (dimension, category)
            for db in oracle.covered:
                assert int(got[f"{db}_covered"]) == want[db], (dimension, category, db)
                assert float(got[f"{db}_fraction"]) == pytest.approx(
                    want[db] / want["n"], abs=1e-12
                )

    def test_citation_summary_equals_oracle(self, desk_bundle, oracle):
        out, _ = desk_bundle
        rows = {r["database"]: r for r in read_report_csv(
            out / "reports" / "citation_summary.csv"
        )}
        for db, counts in oracle.citation_counts().items():
            values = list(counts.values())
            got = rows[db]
            assert int(got["covered"]) == len(oracle.covered[db])
            assert int(got["with_counts"]) == len(values)
            assert int(got["total_citations"]) == sum(values)
            assert float(got["cpp"]) == pytest.approx(
                sum(values) / len(values), abs=1e-12
            )
            zeros = sum(1 for v in values if v == 0)
            assert float(got["uncited_share"]) == pytest.approx(
                zeros / len(values), abs=1e-12
            )

    def test_scenario_spot_checks(self, oracle):
        # guards the generator against silent drift
        assert len(oracle.union_ids) == 148
        assert oracle.cells == {"ss": 112, "sd": 6, "ds": 6, "dd": 2}
        assert len(oracle.false_positive_ids) == 8
        assert oracle.outcome["title_words"]["r200"] == "error"


# --------------------------------------------------------------- criterion 6

def _quadratic_tau(x, y):
    n = len(x)
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            sign = (x[i] - x[j]) * (y[i] - y[j])
            if sign > 0:
                concordant += 1
            elif sign < 0:
                discordant += 1
    from collections import Counter
    import math

    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in Counter(x).values())
    n2 = sum(t * (t - 1) // 2 for t in Counter(y).values())
    if n0 == n1 or n0 == n2:
        return None
    return (concordant - discordant) / math.sqrt(float(n0 - n1) * float(n0 - n2))


def _rank_then_pearson(x, y):
    import math

    def rank(values):
        return [
            Fraction(
                2 * (1 + sum(1 for o in values if o < v))
                + (sum(1 for o in values if o == v) - 1),
                2,
            )
            for v in values
        ]

    rx, ry = rank(x), rank(y)
    n = len(x)
    mx = sum(rx) / n
    my = sum(ry) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    if sxx == 0 or syy == 0:
        return None
    return float(sxy) / math.sqrt(float(sxx) * float(syy))


def test_c6_correlations_on_100_random_tied_pairs():
    rng = random.Random(20_08)
    checked_tau = checked_rho = 0
    for _ in range(100):
        n = rng.randint(2, 300)
        x = [rng.randint(0, 12) for _ in range(n)]
        y = [rng.randint(0, 12) for _ in range(n)]
        pair = CitationVectorPair("a", "b", tuple(map(float, x)), tuple(map(float, y)))
        expected_tau = _quadratic_tau(x, y)
        if expected_tau is not None:
            assert kendall_tau_b(pair) == pytest.approx(expected_tau, abs=1e-12)
            checked_tau += 1
        expected_rho = _rank_then_pearson(x, y)
        if expected_rho is not None:
            assert spearman_mean_rank(pair) == pytest.approx(expected_rho, abs=1e-12)
            checked_rho += 1
    assert checked_tau >= 95 and checked_rho >= 95


# --------------------------------------------------------------- criterion 7

class TestC7QualityHistograms:
    def test_bucket_definitions_on_constructed_deltas(self):
        histogram = delta_histogram([0, 1, -1, 2, 5, -2, -40, 0, 1])
        assert histogram.counts == {
            "exact": 2, "plus_one": 2, "minus_one": 1,
            "greater_plus_one": 2, "less_minus_one": 2,
        }

    @pytest.mark.parametrize(
        "counts,total,published",
        [
            # publication years: n = 48,231 matched items
            ({"exact": 43_167, "plus_one": 1_013, "minus_one": 2_363,
              "greater_plus_one": 820, "less_minus_one": 868},
             48_231,
             {"exact": 89.5, "plus_one": 2.1, "minus_one": 4.9,
              "greater_plus_one": 1.7, "less_minus_one": 1.8}),
            # author counts: n = 42,201 matched journal articles
            ({"exact": 40_133, "plus_one": 422, "minus_one": 295,
              "greater_plus_one": 1_013, "less_minus_one": 338},
             42_201,
             {"exact": 95.1, "plus_one": 1.0, "minus_one": 0.7,
              "greater_plus_one": 2.4, "less_minus_one": 0.8}),
        ],
        ids=["publication_year", "author_count"],
    )
    def test_published_percentages_from_injected_counts(self, counts, total, published):
        assert sum(counts.values()) == total
        deltas = (
            [0] * counts["exact"]
            + [1] * counts["plus_one"]
            + [-1] * counts["minus_one"]
            + [2] * counts["greater_plus_one"]
            + [-2] * counts["less_minus_one"]
        )
        histogram = delta_histogram(deltas)
        for bucket, expected in published.items():
            assert histogram.percent(bucket) == pytest.approx(expected, abs=0.05)


# --------------------------------------------------------------- criterion 8

class FlakyTransport:
    def __init__(self, inner, budget):
        self.inner = inner
        self.budget = budget

    def fetch(self, request, *, record_id, mode):
        if self.budget <= 0:
            raise FatalTransportError("simulated outage")
        self.budget -= 1
        return self.inner.fetch(request, record_id=record_id, mode=mode)


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


def test_c8_interrupted_resume_bundle_is_byte_identical(tmp_path):
    config = validate_config(DESK / "config.json")
    fixtures = FixtureTransport(DESK / "fixtures")

    plain = tmp_path / "plain"
    run_pipeline(config, transport=fixtures, output_dir=plain)

    resumed = tmp_path / "resumed"
    with pytest.raises(FatalTransportError):
        run_pipeline(
            config,
            transport=FlakyTransport(fixtures, budget=150),
            output_dir=resumed,
        )
    assert not (resumed / "reports").exists()  # no partial reports
    run_pipeline(config, transport=fixtures, output_dir=resumed, resume=True)

    for part in ("raw", "reports"):
        left = _tree_bytes(plain / part)
        right = _tree_bytes(resumed / part)
        assert left.keys() == right.keys()
        for name in left:
            assert left[name] == right[name], f"{part}/{name} differs"
