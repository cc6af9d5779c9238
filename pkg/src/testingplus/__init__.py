"""TestingPlus: a permissioned ledger for the distributed software-testing
life cycle — escrowed acceptance contracts, an on-chain test registry,
proof-of-authority consensus over a simulated network, and a metrics
harness."""

from .block import (
    Block,
    BlockHeader,
    MerkleProof,
    build_block,
    merkle_proof,
    merkle_root,
    verify_merkle_proof,
)
from .chain import (
    Chain,
    ChainCheck,
    ChainStore,
    CorruptChainError,
    GenesisConfig,
    ValidatorSet,
    proposer_for,
    verify_chain,
)
from .codec import hash256
from .keys import KeyRegistry, UnknownSenderError, address_from_pubkey, generate_keypair
from .metrics import MetricsReport, SweepSpec, analyze, run_sweep
from .sim import SimScenario, SimTrace, run_simulation
from .state import WorldState
from .tx import Transaction, sign_transaction, verify_transaction
from .vm import Receipt, apply_transaction
from .workflow import (
    ArtifactStore,
    AuditEvent,
    CompensationStatement,
    audit_trail,
    compute_compensation,
)

__all__ = [
    "Block",
    "BlockHeader",
    "MerkleProof",
    "build_block",
    "merkle_proof",
    "merkle_root",
    "verify_merkle_proof",
    "Chain",
    "ChainCheck",
    "ChainStore",
    "CorruptChainError",
    "GenesisConfig",
    "ValidatorSet",
    "proposer_for",
    "verify_chain",
    "hash256",
    "KeyRegistry",
    "UnknownSenderError",
    "address_from_pubkey",
    "generate_keypair",
    "MetricsReport",
    "SweepSpec",
    "analyze",
    "run_sweep",
    "SimScenario",
    "SimTrace",
    "run_simulation",
    "WorldState",
    "Transaction",
    "sign_transaction",
    "verify_transaction",
    "Receipt",
    "apply_transaction",
    "ArtifactStore",
    "AuditEvent",
    "CompensationStatement",
    "audit_trail",
    "compute_compensation",
]
