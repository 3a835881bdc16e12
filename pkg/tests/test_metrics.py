"""Metric derivation and CSV output."""

import random

import pytest

from abrasim.metrics import (
    DERIVED_COLUMNS,
    METRIC_COLUMNS,
    MetricsError,
    RunMetrics,
    emit_csv,
    packet_delivery_ratio,
    read_csv,
    throughput,
)
from abrasim.netsim import simulate

from helpers import random_sim_config


class TestThroughput:
    def test_simple_division(self):
        assert throughput(RunMetrics(bytes_delivered=1_000_000, duration=100.0)) == 10_000

    def test_nothing_delivered(self):
        assert throughput(RunMetrics(duration=5.0)) == 0

    def test_zero_duration_is_an_error(self):
        with pytest.raises(MetricsError):
            throughput(RunMetrics(bytes_delivered=10, duration=0.0))


class TestPdr:
    def test_all_delivered(self):
        assert packet_delivery_ratio(RunMetrics(unique_segments_sent=10, segments_received=10)) == 1.0

    def test_half_lost(self):
        assert packet_delivery_ratio(RunMetrics(unique_segments_sent=10, segments_received=5)) == 0.5

    def test_nothing_sent_is_an_error(self):
        with pytest.raises(MetricsError):
            packet_delivery_ratio(RunMetrics())


class TestCsv:
    def test_empty_is_header_only(self):
        text = emit_csv([], ["scenario"])
        assert text == ",".join(["scenario", *METRIC_COLUMNS, *DERIVED_COLUMNS]) + "\n"

    def test_two_runs_three_lines(self):
        m = RunMetrics(segments_sent=3, unique_segments_sent=3, segments_received=3, duration=1.0)
        text = emit_csv([({"scenario": "a"}, m), ({"scenario": "b"}, m)])
        assert len(text.splitlines()) == 3

    def test_fixed_decimals(self):
        m = RunMetrics(bytes_delivered=1, duration=3.0, unique_segments_sent=3, segments_received=1)
        row = read_csv(emit_csv([({}, m)]))
        line = emit_csv([({}, m)]).splitlines()[1]
        assert line.endswith("3.000000,,0.333333,0.333333")
        assert row[0][1] == m

    def test_failed_run_leaves_metrics_blank(self):
        text = emit_csv([({"error": "boom"}, None)], ["error"])
        assert text.splitlines()[1] == "boom" + "," * (len(METRIC_COLUMNS) + len(DERIVED_COLUMNS))
        assert read_csv(text) == [({"error": "boom"}, None)]

    def test_round_trip_of_simulated_runs(self):
        rng = random.Random(3)
        runs = [({"i": i}, simulate(random_sim_config(rng)).metrics) for i in range(10)]
        back = read_csv(emit_csv(runs))
        for (_, got), (_, want) in zip(back, runs):
            for name in METRIC_COLUMNS:
                a, b = getattr(got, name), getattr(want, name)
                if isinstance(b, int):
                    assert a == b, name
                elif b is not None:
                    assert a == pytest.approx(b, abs=1e-6)

    def test_deterministic(self):
        rng = random.Random(4)
        cfgs = [random_sim_config(rng) for _ in range(3)]
        one = emit_csv([({}, simulate(c).metrics) for c in cfgs])
        two = emit_csv([({}, simulate(c).metrics) for c in cfgs])
        assert one == two


def test_simulated_metric_invariants():
    rng = random.Random(8)
    for _ in range(20):
        m = simulate(random_sim_config(rng)).metrics
        assert m.conserved()
        assert m.segments_retransmitted == m.timeout_retransmits + m.fast_retransmits
        assert m.segments_retransmitted <= m.segments_sent
        assert m.segments_dropped == m.dropped_route_down + m.dropped_random
        assert all(getattr(m, c) >= 0 for c in METRIC_COLUMNS if getattr(m, c) is not None)
        if m.unique_segments_sent:
            assert 0.0 <= packet_delivery_ratio(m) <= 1.0
        assert throughput(m) >= 0
