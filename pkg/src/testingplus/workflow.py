"""Read-side workflow queries: compensation statements, audit trails, their
JSON/CSV exports, and the content-addressed off-chain artifact store."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .codec import hash256, U64_MAX
from .state import VERDICT_PASS, WorldState


class WindowBeyondHeadError(ValueError):
    pass


class CompensationOverflowError(OverflowError):
    pass


class UnknownCaseError(KeyError):
    pass


@dataclass(frozen=True)
class CompensationStatement:
    tester: bytes
    from_height: int
    to_height: int
    executed: int
    matched: int
    amount: int
    contribution_ppm: int

    def to_dict(self) -> dict:
        return {
            "tester": self.tester.hex(),
            "from_height": self.from_height,
            "to_height": self.to_height,
            "executed": self.executed,
            "matched": self.matched,
            "amount": self.amount,
            "contribution_ppm": self.contribution_ppm,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tester", "from_height", "to_height", "executed", "matched", "amount", "contribution_ppm"])
        w.writerow([
            self.tester.hex(), self.from_height, self.to_height,
            self.executed, self.matched, self.amount, self.contribution_ppm,
        ])
        return buf.getvalue()


def compute_compensation(
    state: WorldState,
    tester: bytes,
    from_height: int,
    to_height: int,
    base_rate: int,
    bonus_rate: int,
) -> CompensationStatement:
    """Pay-per-run plus a bonus per matching result, over a height window.

    contribution_ppm is the tester's share of all execution records in the
    window, in parts per million (0 when the window is empty).
    """
    if not 0 <= from_height <= to_height <= state.height:
        raise WindowBeyondHeadError("window beyond head")
    in_window = [e for e in state.executions if from_height <= e.block_height <= to_height]
    mine = [e for e in in_window if e.tester == tester]
    executed = len(mine)
    matched = sum(1 for e in mine if e.verdict == VERDICT_PASS)
    amount = base_rate * executed + bonus_rate * matched
    if amount > U64_MAX:
        raise CompensationOverflowError("compensation amount exceeds u64")
    total = len(in_window)
    contribution_ppm = (1_000_000 * executed) // total if total else 0
    return CompensationStatement(
        tester, from_height, to_height, executed, matched, amount, contribution_ppm
    )


@dataclass(frozen=True)
class AuditEvent:
    kind: str  # register | execute | feedback | settle
    tick: int
    block_height: int
    actor: bytes
    tx_hash: bytes

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tick": self.tick,
            "block_height": self.block_height,
            "actor": self.actor.hex(),
            "tx_hash": self.tx_hash.hex(),
        }


def audit_trail(state: WorldState, case_id: bytes) -> list[AuditEvent]:
    """Chronological history of one test case: registration, executions,
    feedback on the case or its executions, and any settlement of the linked
    acceptance contract."""
    case = state.test_cases.get(case_id)
    if case is None:
        raise UnknownCaseError(case_id.hex())
    events: list[tuple[int, AuditEvent]] = [
        (case.seq, AuditEvent("register", case.tick, case.block_height, case.author, case.tx_hash))
    ]
    exec_ids = set()
    for e in state.executions:
        if e.case_id == case_id:
            exec_ids.add(e.exec_id)
            events.append(
                (e.seq, AuditEvent("execute", e.tick, e.block_height, e.tester, e.tx_hash))
            )
    for fb in state.feedbacks:
        if fb.subject == case_id or fb.subject in exec_ids:
            events.append(
                (fb.seq, AuditEvent("feedback", fb.tick, fb.block_height, fb.author, fb.tx_hash))
            )
    contract = state.acceptance_tests.get(case.acceptance_contract)
    if contract is not None and contract.is_test_completed:
        # settlement has no registry seq; order it after everything at its height
        events.append(
            (
                state.next_seq + 1,
                AuditEvent(
                    "settle",
                    contract.completed_tick,
                    contract.completed_height,
                    contract.developer,
                    contract.completed_tx_hash,
                ),
            )
        )
    events.sort(key=lambda pair: (pair[1].block_height, pair[1].tick, pair[0]))
    return [ev for _, ev in events]


def audit_trail_json(events: list[AuditEvent]) -> str:
    return json.dumps([e.to_dict() for e in events], sort_keys=True)


def audit_trail_csv(events: list[AuditEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "tick", "block_height", "actor", "tx_hash"])
    for e in events:
        w.writerow([e.kind, e.tick, e.block_height, e.actor.hex(), e.tx_hash.hex()])
    return buf.getvalue()


class ArtifactStore:
    """Flat content-addressed directory; file name = lowercase hex digest."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> bytes:
        digest = hash256(data)
        path = self.root / digest.hex()
        if not path.exists():
            path.write_bytes(data)
        return digest

    def get(self, digest: bytes) -> bytes:
        path = self.root / digest.hex()
        if not path.exists():
            raise FileNotFoundError(digest.hex())
        data = path.read_bytes()
        if hash256(data) != digest:
            raise ValueError(f"artifact {digest.hex()} fails its digest")
        return data

    def has(self, digest: bytes) -> bool:
        return (self.root / digest.hex()).exists()
