"""Trace analysis and configuration sweeps.

All units are logical ticks, never wall seconds, so every number here is
reproducible from a stored trace. Resource usage is proxied by message count
and serialized state size.
"""

from __future__ import annotations

import copy
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .codec import enc_u64, hash256
from .sim import ScenarioError, SimScenario, SimTrace, run_simulation


@dataclass(frozen=True)
class LatencyStats:
    min: int = 0
    median: float = 0.0
    p95: int = 0
    max: int = 0
    count: int = 0


def _latency_stats(samples: list[int]) -> LatencyStats:
    if not samples:
        return LatencyStats()
    xs = sorted(samples)
    k = len(xs)
    median = xs[k // 2] if k % 2 == 1 else (xs[k // 2 - 1] + xs[k // 2]) / 2
    p95_idx = max(0, -(-95 * k // 100) - 1)  # ceil(0.95k) - 1
    return LatencyStats(xs[0], median, xs[p95_idx], xs[-1], k)


@dataclass(frozen=True)
class MetricsReport:
    scenario_digest: str
    total_ticks: int
    submitted: int
    committed: int
    uncommitted: int
    throughput_per_1000_ticks: float
    latency: LatencyStats
    block_interval_mean: float
    messages_sent: int
    state_bytes: int
    truncated: bool
    per_node: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "total_ticks": self.total_ticks,
            "submitted": self.submitted,
            "committed": self.committed,
            "uncommitted": self.uncommitted,
            "throughput_per_1000_ticks": self.throughput_per_1000_ticks,
            "latency_min": self.latency.min,
            "latency_median": self.latency.median,
            "latency_p95": self.latency.p95,
            "latency_max": self.latency.max,
            "block_interval_mean": self.block_interval_mean,
            "messages_sent": self.messages_sent,
            "state_bytes": self.state_bytes,
            "truncated": self.truncated,
            "per_node": self.per_node,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def analyze(trace: SimTrace) -> MetricsReport:
    """Pure function of a trace. Uncommitted submissions are reported as
    losses, never silently dropped."""
    scenario = None
    summary = None
    submits: dict[str, int] = {}
    first_commit: dict[str, int] = {}
    height_first_commit: dict[int, int] = {}
    messages = 0
    per_node_msgs: dict[int, int] = {}
    per_node_commits: dict[int, int] = {}
    for e in trace.events:
        kind = e.get("type")
        if kind == "scenario":
            scenario = e
        elif kind == "submit":
            submits[e["tx"]] = e["t"]
        elif kind == "msg":
            messages += 1
            per_node_msgs[e["src"]] = per_node_msgs.get(e["src"], 0) + 1
        elif kind == "commit":
            per_node_commits[e["node"]] = per_node_commits.get(e["node"], 0) + 1
            h = e["h"]
            if h not in height_first_commit or e["t"] < height_first_commit[h]:
                height_first_commit[h] = e["t"]
            for tx in e["txs"]:
                if tx not in first_commit or e["t"] < first_commit[tx]:
                    first_commit[tx] = e["t"]
        elif kind == "summary":
            summary = e
    if scenario is None or summary is None:
        raise ScenarioError("trace missing scenario header or summary")

    committed_submitted = [tx for tx in submits if tx in first_commit]
    latencies = [first_commit[tx] - submits[tx] for tx in committed_submitted]
    total_ticks = summary["max_ticks"]
    heights = sorted(height_first_commit)
    intervals = [
        height_first_commit[b] - height_first_commit[a]
        for a, b in zip(heights, heights[1:])
    ]
    per_node = [
        {
            "node": ns["node"],
            "height": ns["height"],
            "state_bytes": ns["state_bytes"],
            "mempool": ns["mempool"],
            "messages_sent": per_node_msgs.get(ns["node"], 0),
            "commits_observed": per_node_commits.get(ns["node"], 0),
            "crashed": ns["crashed"],
        }
        for ns in summary["nodes"]
    ]
    return MetricsReport(
        scenario_digest=scenario["digest"],
        total_ticks=total_ticks,
        submitted=len(submits),
        committed=len(committed_submitted),
        uncommitted=len(submits) - len(committed_submitted),
        throughput_per_1000_ticks=len(committed_submitted) * 1000 / total_ticks,
        latency=_latency_stats(latencies),
        block_interval_mean=(sum(intervals) / len(intervals)) if intervals else 0.0,
        messages_sent=messages,
        state_bytes=max((ns["state_bytes"] for ns in summary["nodes"]), default=0),
        truncated=summary["truncated"],
        per_node=per_node,
    )


SWEEP_AXES = ("n_validators", "drop_probability", "workload_interval")

CSV_HEADER = [
    "axis", "axis_value", "repetition", "seed", "status",
    "submitted", "committed", "uncommitted", "throughput_per_1000_ticks",
    "latency_min", "latency_median", "latency_p95", "latency_max",
    "block_interval_mean", "messages_sent", "state_bytes", "total_ticks", "truncated",
]


@dataclass
class SweepSpec:
    base: dict  # base scenario dict
    axis: str
    values: list
    repetitions: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepSpec":
        try:
            spec = cls(
                base=dict(raw["base"]),
                axis=raw["axis"],
                values=list(raw["values"]),
                repetitions=int(raw.get("repetitions", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad sweep spec: {exc}") from exc
        if spec.axis not in SWEEP_AXES:
            raise ScenarioError(f"unknown sweep axis {spec.axis!r}")
        if spec.repetitions < 1 or not spec.values:
            raise ScenarioError("sweep needs at least one value and one repetition")
        return spec

    @classmethod
    def from_file(cls, path) -> "SweepSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def derived_seed(self, value, repetition: int) -> int:
        base_seed = int(self.base["seed"])
        material = (
            enc_u64(base_seed)
            + json.dumps(value, sort_keys=True).encode()
            + enc_u64(repetition)
        )
        return int.from_bytes(hash256(material)[:8], "big")

    def scenario_for(self, value, repetition: int) -> SimScenario:
        raw = copy.deepcopy(self.base)
        raw["seed"] = self.derived_seed(value, repetition)
        if self.axis == "n_validators":
            raw["n_validators"] = int(value)
            # keep fault entries meaningful under the new node count
            raw["crash_faults"] = [
                c for c in raw.get("crash_faults", []) if int(c["node"]) < int(value)
            ]
            raw["partitions"] = []
        elif self.axis == "drop_probability":
            raw["drop_probability"] = float(value)
        else:  # workload_interval: resequence submissions at a fixed spacing
            interval = int(value)
            for i, entry in enumerate(raw.get("workload", [])):
                entry["tick"] = 1 + i * interval
        return SimScenario.from_dict(raw)


def run_sweep(spec: SweepSpec) -> str:
    """Run every (axis value, repetition) cell and return an RFC-4180 CSV
    table, rows in spec order. A failing cell becomes a row with its error
    in the status column; the sweep continues."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for value in spec.values:
        for rep in range(spec.repetitions):
            seed = spec.derived_seed(value, rep)
            try:
                scenario = spec.scenario_for(value, rep)
                report = analyze(run_simulation(scenario))
                w.writerow([
                    spec.axis, value, rep, seed, "ok",
                    report.submitted, report.committed, report.uncommitted,
                    report.throughput_per_1000_ticks,
                    report.latency.min, report.latency.median,
                    report.latency.p95, report.latency.max,
                    report.block_interval_mean, report.messages_sent,
                    report.state_bytes, report.total_ticks, report.truncated,
                ])
            except Exception as exc:  # a broken cell must not kill the sweep
                w.writerow([spec.axis, value, rep, seed, f"error: {exc}"]
                           + [""] * (len(CSV_HEADER) - 5))
    return buf.getvalue()
