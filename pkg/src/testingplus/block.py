"""Blocks, headers, Merkle commitments and inclusion proofs."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

from .codec import Reader, ZERO_HASH, enc_bytes, enc_u64, hash256, DecodeError
from .tx import Transaction, decode_transaction


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    state_root: bytes
    timestamp: int
    proposer: bytes

    def encode(self) -> bytes:
        return (
            enc_u64(self.height)
            + enc_bytes(self.prev_hash)
            + enc_bytes(self.merkle_root)
            + enc_bytes(self.state_root)
            + enc_u64(self.timestamp)
            + enc_bytes(self.proposer)
        )

    def hash(self) -> bytes:
        return hash256(self.encode())


def decode_header(r: Reader) -> BlockHeader:
    return BlockHeader(
        height=r.read_u64(),
        prev_hash=r.read_bytes(),
        merkle_root=r.read_bytes(),
        state_root=r.read_bytes(),
        timestamp=r.read_u64(),
        proposer=r.read_bytes(),
    )


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...]
    votes: tuple[tuple[bytes, bytes], ...]  # (validator address, signature over header hash)

    def encode(self) -> bytes:
        out = [self.header.encode(), enc_u64(len(self.transactions))]
        for tx in self.transactions:
            out.append(enc_bytes(tx.encode()))
        out.append(enc_u64(len(self.votes)))
        for addr, sig in self.votes:
            out.append(enc_bytes(addr))
            out.append(enc_bytes(sig))
        return b"".join(out)

    def with_votes(self, votes) -> "Block":
        return replace(self, votes=tuple(votes))


def decode_block(r: Reader) -> Block:
    header = decode_header(r)
    ntx = r.read_u64()
    txs = []
    for _ in range(ntx):
        txs.append(decode_transaction(Reader(r.read_bytes())))
    nvotes = r.read_u64()
    votes = []
    for _ in range(nvotes):
        addr = r.read_bytes()
        sig = r.read_bytes()
        votes.append((addr, sig))
    return Block(header, tuple(txs), tuple(votes))


def encode_chain(blocks) -> bytes:
    """Length-prefixed stream of canonical block encodings."""
    out = []
    for b in blocks:
        enc = b.encode()
        out.append(struct.pack(">I", len(enc)))
        out.append(enc)
    return b"".join(out)


def decode_chain(data: bytes) -> list[Block]:
    blocks = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise DecodeError("truncated block length prefix")
        (n,) = struct.unpack(">I", data[pos : pos + 4])
        pos += 4
        if pos + n > len(data):
            raise DecodeError("truncated block body")
        r = Reader(data[pos : pos + n])
        block = decode_block(r)
        r.expect_end()
        blocks.append(block)
        pos += n
    return blocks


def merkle_root(tx_hashes: list[bytes]) -> bytes:
    """Pairwise SHA-256 tree; empty list commits to 32 zero bytes, an odd
    node at any level is paired with itself."""
    if not tx_hashes:
        return ZERO_HASH
    level = list(tx_hashes)
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [hash256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    # (sibling hash, sibling_on_right)
    siblings: tuple[tuple[bytes, bool], ...]


def merkle_proof(block: Block, tx_index: int) -> MerkleProof:
    if not 0 <= tx_index < len(block.transactions):
        raise IndexError(f"tx index {tx_index} out of range")
    level = [tx.hash() for tx in block.transactions]
    idx = tx_index
    siblings = []
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        if idx % 2 == 0:
            siblings.append((level[idx + 1], True))
        else:
            siblings.append((level[idx - 1], False))
        level = [hash256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
        idx //= 2
    return MerkleProof(tx_index, tuple(siblings))


def verify_merkle_proof(leaf: bytes, proof: MerkleProof, root: bytes) -> bool:
    """Replays the proof path; side flags must agree with the leaf index so
    that mutating the index alone also fails."""
    if proof.leaf_index < 0:
        return False
    cur = leaf
    idx = proof.leaf_index
    for sibling, on_right in proof.siblings:
        if on_right != (idx % 2 == 0):
            return False
        cur = hash256(cur + sibling) if on_right else hash256(sibling + cur)
        idx //= 2
    if idx != 0:
        return False
    return cur == root


def build_block(
    parent: BlockHeader,
    txs: list[Transaction],
    post_state_root: bytes,
    proposer: bytes,
    tick: int,
) -> Block:
    header = BlockHeader(
        height=parent.height + 1,
        prev_hash=parent.hash(),
        merkle_root=merkle_root([tx.hash() for tx in txs]),
        state_root=post_state_root,
        timestamp=tick,
        proposer=proposer,
    )
    return Block(header, tuple(txs), ())
