import math

import pytest

from modelzip.harness import ReportRow
from modelzip.temporal import (
    MonthlySeries,
    TemporalError,
    emit_report,
    format_gap_arrow,
    format_gap_signed,
    read_summaries_csv,
    series_from_rows,
    split_by_cutoff,
    summarize,
)


def months_range(first_year, first_month, count):
    out = []
    y, m = first_year, first_month
    for _ in range(count):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return out


def series_of(rates, start=(2017, 1), model="m", dataset="d"):
    months = months_range(start[0], start[1], len(rates))
    return MonthlySeries(model=model, dataset=dataset,
                         points=tuple(zip(months, rates)))


class TestSplit:
    def test_eighty_three_month_split(self):
        # 83 months, 2017-01 .. 2023-11; cutoff 2022-12 leaves 11 test months
        series = series_of([0.4] * 83)
        assert series.months[0] == "2017-01" and series.months[-1] == "2023-11"
        train, test = split_by_cutoff(series, "2022-12")
        assert len(train.points) == 72
        assert len(test.points) == 11
        assert train.points + test.points == series.points

    def test_cutoff_at_last_month_rejected(self):
        series = series_of([0.4] * 12)
        with pytest.raises(TemporalError, match="testing period empty"):
            split_by_cutoff(series, series.months[-1])

    def test_cutoff_before_single_month_rejected(self):
        series = series_of([0.4], start=(2020, 6))
        with pytest.raises(TemporalError, match="training period empty"):
            split_by_cutoff(series, "2020-01")

    def test_bad_cutoff_format(self):
        with pytest.raises(Exception):
            split_by_cutoff(series_of([0.4] * 5), "2020-13")


class TestSummarize:
    def test_constant_series_zero_gap(self):
        summary = summarize(series_of([0.4] * 24), "2018-06")
        assert summary.gap == 0.0
        assert summary.rate_future_estimate == 0.4
        assert summary.rate_avg == pytest.approx(0.4)

    def test_published_llama2_wikitext_row(self):
        # 72 train months at 7.320 and 11 test months at 7.539 reproduce the
        # published Avg 7.349, gap +.219, and future estimate 7.758
        series = series_of([7.320] * 72 + [7.539] * 11)
        summary = summarize(series, "2022-12")
        assert summary.rate_train == pytest.approx(7.320, abs=1e-12)
        assert summary.rate_test == pytest.approx(7.539, abs=1e-12)
        assert summary.gap == pytest.approx(0.219, abs=1e-12)
        assert summary.rate_future_estimate == pytest.approx(7.758, abs=1e-12)
        assert round(summary.rate_avg, 3) == 7.349
        assert format_gap_signed(summary.gap) == "+.219"
        assert format_gap_arrow(summary.gap) == "↑ .219"

    def test_linear_drift_closed_form(self):
        # rate_i = 0.30 + 0.001 * i over 48 months, cutoff after month 36
        rates = [0.30 + 0.001 * i for i in range(48)]
        summary = summarize(series_of(rates), months_range(2017, 1, 48)[35])
        mean = lambda xs: math.fsum(xs) / len(xs)
        assert summary.rate_train == pytest.approx(mean(rates[:36]), abs=1e-15)
        assert summary.rate_test == pytest.approx(mean(rates[36:]), abs=1e-15)
        assert summary.gap == pytest.approx(mean(rates[36:]) - mean(rates[:36]), abs=1e-12)

    def test_future_estimate_definition(self):
        summary = summarize(series_of([0.3] * 10 + [0.5] * 5), "2017-10")
        assert summary.rate_future_estimate - summary.rate_test == pytest.approx(
            summary.rate_test - summary.rate_train, abs=1e-15
        )

    def test_month_permutation_invariant(self):
        months = months_range(2020, 1, 20)
        rates = [0.3 + 0.01 * i for i in range(20)]
        ordered = MonthlySeries("m", "d", tuple(zip(months, rates)))
        shuffled_points = list(zip(months, rates))
        shuffled_points.reverse()
        shuffled = MonthlySeries("m", "d", tuple(shuffled_points))
        assert summarize(ordered, "2020-12") == summarize(shuffled, "2020-12")


class TestSeriesType:
    def test_duplicate_months_rejected(self):
        with pytest.raises(TemporalError, match="duplicate"):
            MonthlySeries("m", "d", (("2020-01", 0.5), ("2020-01", 0.6)))

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(TemporalError):
            MonthlySeries("m", "d", (("2020-01", 0.0),))

    def test_arrow_direction(self):
        assert format_gap_arrow(0.1).startswith("↑")
        assert format_gap_arrow(-0.1).startswith("↓")


class TestSeriesFromRows:
    def test_groups_month_rows(self):
        rows = []
        for model in ("b-model", "a-model"):
            for ym, rate in (("2023-02", 0.5), ("2023-01", 0.4)):
                rows.append(ReportRow(
                    scope="month", model=model, dataset="wiki", doc_id="*",
                    year_month=ym, mode="chunked", context_size=64, step=64,
                    rate=rate,
                ))
        series = series_from_rows(rows)
        assert [s.model for s in series] == ["a-model", "b-model"]
        assert series[0].points == (("2023-01", 0.4), ("2023-02", 0.5))

    def test_document_rows_ignored(self):
        rows = [ReportRow(scope="document", model="m", dataset="d", doc_id="x",
                          year_month="2023-01", mode="chunked", context_size=64,
                          step=64, rate=0.4)]
        assert series_from_rows(rows) == []


class TestEmitReport:
    def test_files_and_round_trip(self, tmp_path):
        series_a = series_of([0.31] * 6 + [0.33] * 3, model="alpha")
        series_b = series_of([0.44] * 6 + [0.42] * 3, model="beta")
        summaries = [summarize(series_b, "2017-06"), summarize(series_a, "2017-06")]
        written = emit_report(summaries, tmp_path / "out",
                              series=[series_a, series_b])
        names = sorted(p.name for p in written)
        assert names == ["series.json", "summary.csv", "summary.json"]
        back = read_summaries_csv(tmp_path / "out" / "summary.csv")
        assert back == sorted(summaries, key=lambda s: (s.model, s.dataset))

    def test_rows_sorted_by_model(self, tmp_path):
        summaries = [
            summarize(series_of([0.4] * 6, model=name), "2017-03")
            for name in ("zeta", "alpha", "mid")
        ]
        emit_report(summaries, tmp_path)
        back = read_summaries_csv(tmp_path / "summary.csv")
        assert [s.model for s in back] == ["alpha", "mid", "zeta"]

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(TemporalError):
            emit_report([], tmp_path)
