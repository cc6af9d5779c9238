import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from testingplus.chain import Chain, GenesisConfig
from testingplus.keys import address_from_pubkey, generate_keypair
from testingplus.tx import Transaction, sign_transaction

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_hex(name: str) -> bytes:
    return bytes.fromhex((FIXTURES / name).read_text().strip())


class Actor:
    def __init__(self, seed: bytes):
        self.secret, self.pubkey = generate_keypair(seed)
        self.address = address_from_pubkey(self.pubkey)

    def sign(self, tx: Transaction) -> Transaction:
        return sign_transaction(tx, self.secret, self.pubkey)


@pytest.fixture(scope="session")
def validator():
    return Actor(b"\x11" * 32)


@pytest.fixture(scope="session")
def customer():
    return Actor(b"\x22" * 32)


@pytest.fixture(scope="session")
def developer():
    return Actor(b"\x33" * 32)


@pytest.fixture(scope="session")
def tester():
    return Actor(b"\x44" * 32)


def make_genesis(validator, accounts, **kwargs) -> GenesisConfig:
    return GenesisConfig(
        chain_id=b"\x01" * 32,
        validator_pubkeys=[validator.pubkey],
        accounts=[(a.pubkey, bal) for a, bal in accounts],
        **kwargs,
    )


@pytest.fixture
def chain(validator, customer, developer, tester):
    g = make_genesis(validator, [(customer, 1000), (developer, 200), (tester, 300)])
    return Chain(g)


class LocalChain:
    """Single-validator chain with a one-tx-per-block submit helper."""

    def __init__(self, chain: Chain, validator: Actor):
        self.chain = chain
        self.validator = validator
        self.tick = 0

    def submit(self, actor: Actor, payload, value=0, nonce=None):
        state = self.chain.state
        if nonce is None:
            nonce = state.accounts[actor.address].nonce
        tx = actor.sign(Transaction(actor.address, nonce, payload, value))
        self.tick += 1
        block, _, receipts = self.chain.stage([tx], self.validator.address, self.tick)
        block = self.chain.seal(block, [(self.validator.address, self.validator.secret)])
        self.chain.append(block)
        return receipts[0], tx


@pytest.fixture
def local(chain, validator):
    return LocalChain(chain, validator)
