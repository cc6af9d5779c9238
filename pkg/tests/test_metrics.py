"""Trace analysis arithmetic and configuration sweeps."""

import csv
import io
import json

import pytest

from testingplus.metrics import (
    CSV_HEADER,
    LatencyStats,
    SweepSpec,
    _latency_stats,
    analyze,
    run_sweep,
)
from testingplus.sim import ScenarioError, SimScenario, SimTrace, run_simulation


def base_scenario(**overrides):
    d = {
        "seed": 11,
        "n_validators": 4,
        "latency": [1, 2],
        "drop_probability": 0.0,
        "accounts": [1000],
        "max_ticks": 500,
        "workload": [
            {"tick": 1 + 10 * i, "sender": 0, "op": "deploy_customer_agreement"}
            for i in range(10)
        ],
    }
    d.update(overrides)
    return d


@pytest.fixture(scope="module")
def trace():
    return run_simulation(SimScenario.from_dict(base_scenario()))


class TestLatencyStats:
    def test_empty(self):
        assert _latency_stats([]) == LatencyStats()

    def test_single_sample(self):
        s = _latency_stats([7])
        assert (s.min, s.median, s.p95, s.max, s.count) == (7, 7, 7, 7, 1)

    def test_even_count_median_averages(self):
        s = _latency_stats([1, 3, 5, 7])
        assert s.median == 4.0

    def test_p95_is_ceil_index(self):
        samples = list(range(1, 101))  # p95 of 1..100 -> 95th value
        assert _latency_stats(samples).p95 == 95
        assert _latency_stats([1, 2, 3]).p95 == 3

    def test_order_independent(self):
        assert _latency_stats([5, 1, 9]) == _latency_stats([9, 5, 1])


class TestAnalyze:
    def test_counts_and_closure(self, trace):
        r = analyze(trace)
        assert r.submitted == 10
        assert r.committed + r.uncommitted == r.submitted
        assert not r.truncated
        assert r.uncommitted == 0

    def test_throughput_arithmetic(self, trace):
        r = analyze(trace)
        assert r.throughput_per_1000_ticks == r.committed * 1000 / 500
        assert r.throughput_per_1000_ticks == 20.0

    def test_latency_bounds_sane(self, trace):
        r = analyze(trace)
        assert r.latency.count == r.committed
        assert 1 <= r.latency.min <= r.latency.median <= r.latency.p95 <= r.latency.max

    def test_messages_counted(self, trace):
        r = analyze(trace)
        assert r.messages_sent == sum(1 for e in trace.events if e["type"] == "msg")
        assert r.messages_sent > 0

    def test_state_bytes_is_max_over_nodes(self, trace):
        r = analyze(trace)
        assert r.state_bytes == max(n["state_bytes"] for n in trace.summary["nodes"])

    def test_per_node_rows(self, trace):
        r = analyze(trace)
        assert [n["node"] for n in r.per_node] == [0, 1, 2, 3]
        assert all(not n["crashed"] for n in r.per_node)

    def test_empty_workload(self):
        t = run_simulation(SimScenario.from_dict(base_scenario(workload=[], max_ticks=200)))
        r = analyze(t)
        assert (r.submitted, r.committed, r.uncommitted) == (0, 0, 0)
        assert r.throughput_per_1000_ticks == 0.0
        assert r.latency == LatencyStats()

    def test_pure_function_of_trace(self, trace):
        reread = SimTrace([json.loads(line) for line in trace.to_text().splitlines()])
        assert analyze(reread).to_json() == analyze(trace).to_json()

    def test_json_round_trips(self, trace):
        d = json.loads(analyze(trace).to_json())
        assert d["submitted"] == 10
        assert d["scenario_digest"] == trace.events[0]["digest"]

    def test_headerless_trace_rejected(self):
        with pytest.raises(ScenarioError):
            analyze(SimTrace([{"type": "summary", "truncated": False, "max_ticks": 1, "nodes": []}]))


class TestSweep:
    def spec_dict(self, **overrides):
        d = {
            "base": base_scenario(max_ticks=300, workload=[
                {"tick": 1 + 10 * i, "sender": 0, "op": "deploy_customer_agreement"}
                for i in range(4)
            ]),
            "axis": "n_validators",
            "values": [1, 4, 8],
            "repetitions": 2,
        }
        d.update(overrides)
        return d

    def test_unknown_axis_rejected(self):
        with pytest.raises(ScenarioError, match="unknown sweep axis"):
            SweepSpec.from_dict(self.spec_dict(axis="block_size"))

    def test_empty_values_rejected(self):
        with pytest.raises(ScenarioError):
            SweepSpec.from_dict(self.spec_dict(values=[]))

    def test_derived_seeds_distinct_per_cell(self):
        spec = SweepSpec.from_dict(self.spec_dict())
        seeds = {spec.derived_seed(v, r) for v in spec.values for r in range(2)}
        assert len(seeds) == 6

    def test_row_cardinality_and_schema(self):
        spec = SweepSpec.from_dict(self.spec_dict())
        rows = list(csv.reader(io.StringIO(run_sweep(spec))))
        assert rows[0] == CSV_HEADER
        assert len(rows) == 1 + 3 * 2
        for row in rows[1:]:
            assert len(row) == len(CSV_HEADER)
            assert row[4] == "ok"
            assert int(row[6]) + int(row[7]) == int(row[5])  # committed+uncommitted

    def test_axis_values_in_spec_order(self):
        spec = SweepSpec.from_dict(self.spec_dict(repetitions=1))
        rows = list(csv.reader(io.StringIO(run_sweep(spec))))[1:]
        assert [r[1] for r in rows] == ["1", "4", "8"]

    def test_rerun_is_identical(self):
        spec = SweepSpec.from_dict(self.spec_dict(values=[1, 4], repetitions=1))
        assert run_sweep(spec) == run_sweep(spec)

    def test_workload_interval_axis_respaces_submissions(self):
        spec = SweepSpec.from_dict(self.spec_dict(axis="workload_interval", values=[5, 40]))
        s = spec.scenario_for(40, 0)
        assert [e["tick"] for e in s.workload] == [1, 41, 81, 121]

    def test_drop_probability_axis(self):
        spec = SweepSpec.from_dict(self.spec_dict(axis="drop_probability", values=[0.0, 0.1]))
        assert spec.scenario_for(0.1, 0).drop_probability == 0.1

    def test_broken_cell_becomes_error_row(self):
        spec = SweepSpec.from_dict(self.spec_dict(axis="drop_probability", values=[0.0, 2.0],
                                                  repetitions=1))
        rows = list(csv.reader(io.StringIO(run_sweep(spec))))[1:]
        assert rows[0][4] == "ok"
        assert rows[1][4].startswith("error:")
