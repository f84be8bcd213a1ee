import numpy as np
import pytest

from popdyn.data import (
    PopularityHistory,
    build_sample_arrays,
    build_samples,
    citation_distribution,
    filter_training_set,
    ingest_events,
    load_histories,
    parse_manifest,
    save_histories,
)
from popdyn.errors import DataError


def hist(item_id="p1", pub=2000, yearly=(1, 2, 3)):
    return PopularityHistory(item_id, pub, np.array(yearly, dtype=np.int64))


class TestPopularityHistory:
    def test_cumulative_is_nondecreasing(self):
        h = hist(yearly=(3, 0, 5, 1))
        c = h.cumulative()
        np.testing.assert_array_equal(c, [3, 3, 8, 9])
        assert all(b >= a for a, b in zip(c, c[1:]))

    def test_cumulative_at(self):
        h = hist(yearly=(2, 2, 2, 2))
        assert h.cumulative_at(0) == 0
        assert h.cumulative_at(2) == 4
        assert h.cumulative_at(10) == 8  # past the end: total

    def test_rejects_negative_counts(self):
        with pytest.raises(ValueError, match="negative"):
            hist(yearly=(1, -1))


class TestParseManifest:
    def test_basic(self):
        out = parse_manifest(["a\t1995\n", "b\t2003\n"])
        assert out == {"a": 1995, "b": 2003}

    def test_skips_blank_lines(self):
        assert parse_manifest(["\n", "a\t1990\n", "\n"]) == {"a": 1990}

    def test_reports_line_number_on_bad_year(self):
        with pytest.raises(DataError, match="line 2"):
            parse_manifest(["a\t1990\n", "b\txyz\n"])

    def test_rejects_wrong_field_count(self):
        with pytest.raises(DataError, match="2 fields"):
            parse_manifest(["a\t1990\textra\n"])

    def test_rejects_out_of_range_year(self):
        with pytest.raises(DataError, match="out of range"):
            parse_manifest(["a\t1492\n"])


class TestIngestEvents:
    PUB = {"a": 2000, "b": 2001}

    def test_tallies_by_offset_year(self):
        lines = ["a\t2000\n", "a\t2002\n", "a\t2002\n", "b\t2001\n"]
        histories, report = ingest_events(lines, self.PUB)
        assert report.events_ok == 4 and report.malformed == 0
        by_id = {h.item_id: h for h in histories}
        np.testing.assert_array_equal(by_id["a"].yearly, [1, 0, 2])
        # b observed through the global max year 2002
        np.testing.assert_array_equal(by_id["b"].yearly, [1, 0])

    def test_quarantines_pre_publication(self):
        _, report = ingest_events(["a\t1999\n", "a\t2001\n"], self.PUB)
        assert report.quarantined_pre_publication == 1
        assert report.events_ok == 1

    def test_skips_unknown_items_and_malformed(self):
        lines = ["zzz\t2001\n", "a\n", "a\tnope\n", "a\t2001\n"]
        histories, report = ingest_events(lines, self.PUB)
        assert report.quarantined_unknown_item == 1
        assert report.malformed == 2
        assert report.events_ok == 1
        assert len(histories) == 1

    def test_explicit_end_year_pads_with_zeros(self):
        histories, _ = ingest_events(["a\t2001\n"], self.PUB, end_year=2005)
        (h,) = histories
        assert h.observed_years == 6
        np.testing.assert_array_equal(h.yearly, [0, 1, 0, 0, 0, 0])

    def test_streaming_accepts_a_generator(self):
        def gen():
            for _ in range(1000):
                yield "a\t2003\n"

        histories, report = ingest_events(gen(), self.PUB)
        assert report.events_ok == 1000
        assert histories[0].yearly[3] == 1000

    def test_output_sorted_by_item_id(self):
        lines = ["b\t2002\n", "a\t2002\n"]
        histories, _ = ingest_events(lines, self.PUB)
        assert [h.item_id for h in histories] == ["a", "b"]

    def test_report_summary_mentions_all_counters(self):
        _, report = ingest_events(["a\t2001\n"], self.PUB)
        s = report.summary()
        for key in ("lines=", "ok=", "malformed=", "pre_publication=", "unknown"):
            assert key in s


class TestFilter:
    def test_strictly_more_than_threshold(self):
        # exactly 5 in the first 5 years: excluded; 6: included
        at5 = hist("at5", yearly=(1, 1, 1, 1, 1, 0, 0, 0, 0, 0))
        at6 = hist("at6", yearly=(2, 1, 1, 1, 1, 0, 0, 0, 0, 0))
        kept = filter_training_set([at5, at6], min_count=5)
        assert [h.item_id for h in kept] == ["at6"]

    def test_requires_followup_years(self):
        short = hist("short", yearly=(9, 9, 9, 9, 9, 9))  # only 1 follow-up year
        kept = filter_training_set([short], min_count=5, min_followup=5)
        assert kept == []
        kept2 = filter_training_set([short], min_count=5, min_followup=1)
        assert [h.item_id for h in kept2] == ["short"]

    def test_burst_after_training_window_does_not_rescue(self):
        late = hist("late", yearly=(0, 0, 0, 0, 0, 99, 99, 99, 99, 99))
        assert filter_training_set([late]) == []


class TestBuildSamples:
    def test_windows_are_left_padded_trailing_counts(self):
        h = hist(yearly=tuple(range(1, 13)))  # yearly counts 1..12
        s = build_samples(h, train_years=5, horizons=(1,), window=3)
        np.testing.assert_array_equal(s.features[0], [0, 0, 1])
        np.testing.assert_array_equal(s.features[1], [0, 1, 2])
        np.testing.assert_array_equal(s.features[2], [1, 2, 3])
        np.testing.assert_array_equal(s.features[4], [3, 4, 5])

    def test_window_wider_than_history_pads(self):
        h = hist(yearly=(4, 5, 6, 7, 8, 9, 10, 11, 12, 13))
        s = build_samples(h, train_years=2, horizons=(1,), window=10)
        assert s.features.shape == (2, 10)
        np.testing.assert_array_equal(s.features[0][:9], np.zeros(9))
        assert s.features[0][9] == 4
        np.testing.assert_array_equal(s.features[1][8:], [4, 5])

    def test_targets_are_cumulative_counts(self):
        h = hist(yearly=(1, 1, 1, 1, 1, 2, 3, 4, 5, 6))
        s = build_samples(h, train_years=5, horizons=(1, 2, 5), window=10)
        assert s.targets == {1: 7, 2: 10, 5: 25}
        assert s.missing_horizons == ()

    def test_unobserved_horizons_are_flagged_not_fabricated(self):
        h = hist(yearly=(1, 1, 1, 1, 1, 2, 3))
        s = build_samples(h, train_years=5, horizons=(1, 2, 3), window=10)
        assert set(s.targets) == {1, 2}
        assert s.missing_horizons == (3,)

    def test_too_short_history_is_an_error(self):
        with pytest.raises(DataError, match="observed years"):
            build_samples(hist(yearly=(1, 2)), train_years=5)

    def test_build_sample_arrays_selects_by_horizon(self):
        h_full = hist("full", yearly=(1, 1, 1, 1, 1, 2, 3, 4, 5, 6))
        h_short = hist("short", yearly=(1, 1, 1, 1, 1, 2))
        samples = [
            build_samples(h_full, 5, (1, 5), 10),
            build_samples(h_short, 5, (1, 5), 10),
        ]
        X, y, ids = build_sample_arrays(samples, 5)
        assert ids == ["full"]
        assert y.tolist() == [25.0]
        X1, y1, ids1 = build_sample_arrays(samples, 1)
        assert ids1 == ["full", "short"]
        with pytest.raises(DataError, match="horizon 3"):
            build_sample_arrays(samples, 3)


class TestDistribution:
    def test_bucket_counts(self):
        hs = [hist("a", yearly=(1, 2)), hist("b", yearly=(3,)), hist("c", yearly=(0,))]
        d = citation_distribution(hs)
        assert d.buckets == {3: 2, 0: 1}
        assert d.num_items == 3

    def test_linear_csv(self):
        d = citation_distribution([hist("a", yearly=(5,)), hist("b", yearly=(2,))])
        assert d.linear_csv() == "citations,papers\n2,1\n5,1\n"

    def test_loglog_bins_partition_all_items(self):
        rng = np.random.default_rng(3)
        hs = [
            hist(f"i{i}", yearly=(int(c),))
            for i, c in enumerate(rng.integers(0, 500, size=200))
        ]
        d = citation_distribution(hs)
        rows = d.loglog_csv().strip().split("\n")[1:]
        total = sum(int(r.split(",")[2]) for r in rows)
        assert total == 200

    def test_empty_is_an_error(self):
        with pytest.raises(DataError):
            citation_distribution([])


class TestHistoriesRoundTrip:
    def test_save_load_identity(self):
        hs = [hist("a", 1999, (0, 3, 1)), hist("b", 2005, (7,))]
        loaded = load_histories(save_histories(hs).splitlines(keepends=True))
        assert len(loaded) == 2
        for orig, back in zip(hs, loaded):
            assert back.item_id == orig.item_id
            assert back.pub_year == orig.pub_year
            np.testing.assert_array_equal(back.yearly, orig.yearly)

    def test_empty_round_trip(self):
        assert save_histories([]) == ""
        assert load_histories([]) == []

    def test_load_reports_line_numbers(self):
        with pytest.raises(DataError, match="line 2"):
            load_histories(["a\t1999\t1,2\n", "broken line\n"])
        with pytest.raises(DataError, match="line 1"):
            load_histories(["a\t1999\t1,x\n"])
