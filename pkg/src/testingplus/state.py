"""World state: accounts, contract instances, and the test registry.

The state root is the hash of a canonical serialization of every entry,
sorted by (section, key), so two states with the same content always agree
regardless of insertion order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .codec import ZERO_HASH, enc_bytes, enc_u64, hash256

VERDICT_PASS = "Pass"
VERDICT_FAIL = "Fail"


@dataclass(frozen=True)
class AccountState:
    address: bytes
    balance: int
    nonce: int


@dataclass(frozen=True)
class CustomerAgreementState:
    contract_id: bytes
    customer: bytes
    testing_fee: int


@dataclass(frozen=True)
class DeveloperAgreementState:
    contract_id: bytes
    developer: bytes
    reward: int


@dataclass(frozen=True)
class AcceptanceTestState:
    contract_id: bytes
    customer: bytes
    developer: bytes
    testing_fee: int
    is_test_completed: bool = False
    escrow: int = 0
    # settlement provenance, zero until completion
    completed_tick: int = 0
    completed_height: int = 0
    completed_tx_hash: bytes = ZERO_HASH


@dataclass(frozen=True)
class TestCase:
    case_id: bytes
    acceptance_contract: bytes
    author: bytes
    description: bytes
    input_digest: bytes
    expected_output_digest: bytes
    tick: int
    block_height: int
    tx_hash: bytes
    seq: int


@dataclass(frozen=True)
class ExecutionRecord:
    exec_id: bytes
    case_id: bytes
    tester: bytes
    actual_output_digest: bytes
    verdict: str  # VERDICT_PASS | VERDICT_FAIL
    tick: int
    block_height: int
    tx_hash: bytes
    seq: int


@dataclass(frozen=True)
class Feedback:
    feedback_id: bytes
    subject: bytes  # case_id or exec_id
    author: bytes
    body: bytes
    tick: int
    block_height: int
    tx_hash: bytes
    seq: int


@dataclass
class WorldState:
    accounts: dict[bytes, AccountState] = field(default_factory=dict)
    customer_agreements: dict[bytes, CustomerAgreementState] = field(default_factory=dict)
    developer_agreements: dict[bytes, DeveloperAgreementState] = field(default_factory=dict)
    acceptance_tests: dict[bytes, AcceptanceTestState] = field(default_factory=dict)
    test_cases: dict[bytes, TestCase] = field(default_factory=dict)
    executions: list[ExecutionRecord] = field(default_factory=list)
    feedbacks: list[Feedback] = field(default_factory=list)
    next_seq: int = 0
    height: int = 0  # last applied block height; not part of the root

    def copy(self) -> "WorldState":
        # records are frozen, so shallow container copies are enough
        return WorldState(
            accounts=dict(self.accounts),
            customer_agreements=dict(self.customer_agreements),
            developer_agreements=dict(self.developer_agreements),
            acceptance_tests=dict(self.acceptance_tests),
            test_cases=dict(self.test_cases),
            executions=list(self.executions),
            feedbacks=list(self.feedbacks),
            next_seq=self.next_seq,
            height=self.height,
        )

    def account(self, address: bytes) -> AccountState | None:
        return self.accounts.get(address)

    def credit(self, address: bytes, amount: int) -> None:
        acct = self.accounts[address]
        self.accounts[address] = replace(acct, balance=acct.balance + amount)

    def debit(self, address: bytes, amount: int) -> None:
        acct = self.accounts[address]
        if acct.balance < amount:
            raise ValueError("balance underflow")
        self.accounts[address] = replace(acct, balance=acct.balance - amount)

    def bump_nonce(self, address: bytes) -> None:
        acct = self.accounts[address]
        self.accounts[address] = replace(acct, nonce=acct.nonce + 1)

    def total_currency(self) -> int:
        """Circulating balances plus funds held in acceptance-test escrow."""
        return sum(a.balance for a in self.accounts.values()) + sum(
            t.escrow for t in self.acceptance_tests.values()
        )

    def serialize(self) -> bytes:
        out = []
        for addr in sorted(self.accounts):
            a = self.accounts[addr]
            out.append(b"\xa1" + enc_bytes(a.address) + enc_u64(a.balance) + enc_u64(a.nonce))
        for cid in sorted(self.customer_agreements):
            c = self.customer_agreements[cid]
            out.append(
                b"\xa2" + enc_bytes(c.contract_id) + enc_bytes(c.customer) + enc_u64(c.testing_fee)
            )
        for cid in sorted(self.developer_agreements):
            d = self.developer_agreements[cid]
            out.append(
                b"\xa3" + enc_bytes(d.contract_id) + enc_bytes(d.developer) + enc_u64(d.reward)
            )
        for cid in sorted(self.acceptance_tests):
            t = self.acceptance_tests[cid]
            out.append(
                b"\xa4"
                + enc_bytes(t.contract_id)
                + enc_bytes(t.customer)
                + enc_bytes(t.developer)
                + enc_u64(t.testing_fee)
                + (b"\x01" if t.is_test_completed else b"\x00")
                + enc_u64(t.escrow)
                + enc_u64(t.completed_tick)
                + enc_u64(t.completed_height)
                + enc_bytes(t.completed_tx_hash)
            )
        for cid in sorted(self.test_cases):
            tc = self.test_cases[cid]
            out.append(
                b"\xa5"
                + enc_bytes(tc.case_id)
                + enc_bytes(tc.acceptance_contract)
                + enc_bytes(tc.author)
                + enc_bytes(tc.description)
                + enc_bytes(tc.input_digest)
                + enc_bytes(tc.expected_output_digest)
                + enc_u64(tc.tick)
                + enc_u64(tc.block_height)
                + enc_bytes(tc.tx_hash)
                + enc_u64(tc.seq)
            )
        for ex in self.executions:
            out.append(
                b"\xa6"
                + enc_bytes(ex.exec_id)
                + enc_bytes(ex.case_id)
                + enc_bytes(ex.tester)
                + enc_bytes(ex.actual_output_digest)
                + (b"\x01" if ex.verdict == VERDICT_PASS else b"\x00")
                + enc_u64(ex.tick)
                + enc_u64(ex.block_height)
                + enc_bytes(ex.tx_hash)
                + enc_u64(ex.seq)
            )
        for fb in self.feedbacks:
            out.append(
                b"\xa7"
                + enc_bytes(fb.feedback_id)
                + enc_bytes(fb.subject)
                + enc_bytes(fb.author)
                + enc_bytes(fb.body)
                + enc_u64(fb.tick)
                + enc_u64(fb.block_height)
                + enc_bytes(fb.tx_hash)
                + enc_u64(fb.seq)
            )
        return b"".join(out)

    def root(self) -> bytes:
        return hash256(self.serialize())
