"""Single-writer, append-only, hash-chained ledger of root-hash anchors.

The on-disk form is one canonical JSON block record per line. The file is
the source of truth; the transaction index is rebuilt whenever it is loaded.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

from nostra.crypto import (
    BLOCK_PREFIX,
    DEFAULT_ALGO,
    TX_PREFIX,
    HashAlgorithm,
    KeyPair,
    digest,
    key_id,
    verify_sig,
)
from nostra.merkle import build_tree

logger = logging.getLogger(__name__)

ZERO_DIGEST = bytes(32)
# block linkage always uses this, independent of each transaction's algo
BLOCK_ALGO = HashAlgorithm.SHA2_256

KIND_MERKLE = "merkle"
KIND_CERTCHAIN = "certchain"
KINDS = (KIND_MERKLE, KIND_CERTCHAIN)

Clock = Callable[[], int]


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def system_clock() -> int:
    return int(time.time())


class LedgerError(Exception):
    pass


class BadSignatureError(LedgerError):
    pass


class TxIdMismatchError(LedgerError):
    pass


class RootMismatchError(LedgerError):
    pass


class DuplicateTransactionError(LedgerError):
    pass


class LedgerFormatError(LedgerError):
    def __init__(self, message: str, height: int):
        super().__init__(message)
        self.height = height


@dataclass(frozen=True)
class Transaction:
    issuer_key_id: bytes
    h_root: bytes
    hash_set: tuple[bytes, ...]
    algo: HashAlgorithm
    created_at: int
    kind: str
    signature: bytes
    tx_id: bytes
    # attached by the ledger on append; not part of the signed payload
    issuer_pubkey: bytes = b""

    def payload(self) -> bytes:
        return transaction_payload(
            self.issuer_key_id, self.h_root, self.hash_set, self.algo, self.created_at, self.kind
        )

    def compute_id(self) -> bytes:
        return digest(TX_PREFIX + self.payload(), self.algo)

    def to_json(self) -> dict:
        return {
            "algo": self.algo.value,
            "created_at": self.created_at,
            "h_root": self.h_root.hex(),
            "hash_set": [h.hex() for h in self.hash_set],
            "issuer_key_id": self.issuer_key_id.hex(),
            "issuer_pubkey": self.issuer_pubkey.hex(),
            "kind": self.kind,
            "signature": self.signature.hex(),
            "tx_id": self.tx_id.hex(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Transaction":
        _expect_keys(data, {
            "algo", "created_at", "h_root", "hash_set", "issuer_key_id",
            "issuer_pubkey", "kind", "signature", "tx_id",
        })
        return cls(
            issuer_key_id=bytes.fromhex(data["issuer_key_id"]),
            h_root=bytes.fromhex(data["h_root"]),
            hash_set=tuple(bytes.fromhex(h) for h in data["hash_set"]),
            algo=HashAlgorithm.parse(data["algo"]),
            created_at=_int(data["created_at"]),
            kind=str(data["kind"]),
            signature=bytes.fromhex(data["signature"]),
            tx_id=bytes.fromhex(data["tx_id"]),
            issuer_pubkey=bytes.fromhex(data["issuer_pubkey"]),
        )


def transaction_payload(
    issuer_key_id: bytes,
    h_root: bytes,
    hash_set: Sequence[bytes],
    algo: HashAlgorithm,
    created_at: int,
    kind: str,
) -> bytes:
    return canonical_json({
        "algo": HashAlgorithm.parse(algo).value,
        "created_at": int(created_at),
        "h_root": h_root.hex(),
        "hash_set": [h.hex() for h in hash_set],
        "issuer_key_id": issuer_key_id.hex(),
        "kind": kind,
    })


def make_transaction(
    issuer: KeyPair,
    hash_set: Sequence[bytes],
    h_root: bytes,
    created_at: int,
    algo: HashAlgorithm = DEFAULT_ALGO,
    kind: str = KIND_MERKLE,
) -> Transaction:
    """Build and sign a transaction on behalf of ``issuer``."""
    algo = HashAlgorithm.parse(algo)
    issuer_key_id = key_id(issuer.public, algo)
    payload = transaction_payload(issuer_key_id, h_root, hash_set, algo, created_at, kind)
    return Transaction(
        issuer_key_id=issuer_key_id,
        h_root=h_root,
        hash_set=tuple(hash_set),
        algo=algo,
        created_at=int(created_at),
        kind=kind,
        signature=issuer.sign(payload),
        tx_id=digest(TX_PREFIX + payload, algo),
        issuer_pubkey=issuer.public,
    )


def block_hash(height: int, prev_hash: bytes, timestamp: int, tx_ids: Sequence[bytes]) -> bytes:
    return digest(
        BLOCK_PREFIX + struct.pack(">Q", height) + prev_hash + struct.pack(">Q", timestamp) + b"".join(tx_ids),
        BLOCK_ALGO,
    )


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: int
    transactions: tuple[Transaction, ...]
    block_hash: bytes

    def compute_hash(self) -> bytes:
        return block_hash(self.height, self.prev_hash, self.timestamp, [tx.tx_id for tx in self.transactions])

    def to_json(self) -> dict:
        return {
            "block_hash": self.block_hash.hex(),
            "height": self.height,
            "prev_hash": self.prev_hash.hex(),
            "timestamp": self.timestamp,
            "transactions": [tx.to_json() for tx in self.transactions],
        }

    def to_line(self) -> bytes:
        return canonical_json(self.to_json()) + b"\n"

    @classmethod
    def from_json(cls, data: dict) -> "Block":
        _expect_keys(data, {"block_hash", "height", "prev_hash", "timestamp", "transactions"})
        return cls(
            height=_int(data["height"]),
            prev_hash=bytes.fromhex(data["prev_hash"]),
            timestamp=_int(data["timestamp"]),
            transactions=tuple(Transaction.from_json(t) for t in data["transactions"]),
            block_hash=bytes.fromhex(data["block_hash"]),
        )


def _expect_keys(data, keys: set) -> None:
    if not isinstance(data, dict) or set(data) != keys:
        raise ValueError("unexpected record fields")


def _int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
        raise ValueError(f"expected a non-negative integer, got {value!r}")
    return value


@dataclass(frozen=True)
class AuditReport:
    ok: bool
    blocks: int
    height: Optional[int] = None
    reason: str = ""

    def to_json(self) -> dict:
        if self.ok:
            return {"result": "ok", "blocks": self.blocks}
        return {"result": "corrupt", "height": self.height, "reason": self.reason}


def validate_transaction(tx: Transaction) -> None:
    """Raise the matching LedgerError if any transaction invariant fails."""
    size = tx.algo.digest_size
    if tx.kind not in KINDS:
        raise LedgerError(f"unknown transaction kind {tx.kind!r}")
    if not tx.hash_set:
        raise RootMismatchError("empty hash set")
    if len(tx.h_root) != size or len(tx.issuer_key_id) != size or any(len(h) != size for h in tx.hash_set):
        raise LedgerError("digest of wrong length")
    if tx.compute_id() != tx.tx_id:
        raise TxIdMismatchError("tx_id does not match payload")
    if key_id(tx.issuer_pubkey, tx.algo) != tx.issuer_key_id:
        raise BadSignatureError("issuer public key does not match issuer_key_id")
    if not verify_sig(tx.issuer_pubkey, tx.payload(), tx.signature):
        raise BadSignatureError("issuer signature does not verify")
    if tx.kind == KIND_MERKLE and build_tree(tx.hash_set, tx.algo).root != tx.h_root:
        raise RootMismatchError("h_root is not the Merkle root of hash_set")
    if tx.kind == KIND_CERTCHAIN and len(tx.hash_set) != 1:
        raise RootMismatchError("certification anchor must commit to exactly one document")


def _check_block(block: Block, prev: Optional[Block], seen: set) -> None:
    expected_height = 0 if prev is None else prev.height + 1
    if block.height != expected_height:
        raise LedgerError(f"height {block.height} where {expected_height} expected")
    if block.prev_hash != (ZERO_DIGEST if prev is None else prev.block_hash):
        raise LedgerError("prev_hash does not link to the previous block")
    if prev is not None and block.timestamp < prev.timestamp:
        raise LedgerError("timestamp decreases")
    if len(block.transactions) != 1:
        raise LedgerError("block must hold exactly one transaction")
    if block.compute_hash() != block.block_hash:
        raise LedgerError("block_hash does not match contents")
    for tx in block.transactions:
        validate_transaction(tx)
        if tx.tx_id in seen:
            raise DuplicateTransactionError("duplicate tx_id")
        seen.add(tx.tx_id)


class Ledger:
    """In-memory chain, optionally mirrored to an append-only file.

    Only one writer may append at a time; readers see either the chain
    before an append or after it, never a partial block.
    """

    def __init__(self, path: str | os.PathLike | None = None, clock: Clock | None = None):
        self.path = Path(path) if path is not None else None
        self.clock = clock or system_clock
        self._blocks: list[Block] = []
        self._index: dict[bytes, tuple[int, int]] = {}
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path: str | os.PathLike, clock: Clock | None = None) -> "Ledger":
        """Load ``path`` if it exists; new blocks are appended to it."""
        ledger = cls(path, clock)
        if ledger.path.exists():
            ledger._blocks = list(read_blocks(ledger.path))
            ledger._reindex()
        return ledger

    @classmethod
    def load(cls, path: str | os.PathLike, clock: Clock | None = None) -> "Ledger":
        if not Path(path).exists():
            raise FileNotFoundError(path)
        return cls.open(path, clock)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Block], clock: Clock | None = None) -> "Ledger":
        """Unvalidated in-memory ledger; useful for examining a suspect copy."""
        ledger = cls(None, clock)
        ledger._blocks = list(blocks)
        ledger._reindex()
        return ledger

    def _reindex(self) -> None:
        index = {}
        for block in self._blocks:
            for pos, tx in enumerate(block.transactions):
                index.setdefault(tx.tx_id, (block.height, pos))
        self._index = index

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(tuple(self._blocks))

    def append_tx(self, tx: Transaction, issuer_pubkey: bytes) -> bytes:
        tx = replace(tx, issuer_pubkey=bytes(issuer_pubkey))
        with self._lock:
            if tx.tx_id in self._index:
                raise DuplicateTransactionError(f"transaction {tx.tx_id.hex()} already anchored")
            validate_transaction(tx)

            prev = self._blocks[-1] if self._blocks else None
            height = len(self._blocks)
            prev_hash = prev.block_hash if prev else ZERO_DIGEST
            timestamp = int(self.clock())
            if prev is not None and timestamp < prev.timestamp:
                timestamp = prev.timestamp
            block = Block(
                height=height,
                prev_hash=prev_hash,
                timestamp=timestamp,
                transactions=(tx,),
                block_hash=block_hash(height, prev_hash, timestamp, [tx.tx_id]),
            )
            if self.path is not None:
                _append_line(self.path, block.to_line())
            self._blocks.append(block)
            self._index[tx.tx_id] = (height, 0)
        logger.debug("anchored %s at height %d", tx.tx_id.hex(), height)
        return tx.tx_id

    def query(self, tx_id: bytes) -> Optional[Transaction]:
        loc = self._index.get(bytes(tx_id))
        if loc is None:
            return None
        height, pos = loc
        return self._blocks[height].transactions[pos]

    def locate(self, tx_id: bytes) -> Optional[tuple[int, int]]:
        return self._index.get(bytes(tx_id))

    def audit(self) -> AuditReport:
        prev = None
        seen: set = set()
        for i, block in enumerate(self._blocks):
            try:
                _check_block(block, prev, seen)
            except LedgerError as exc:
                return AuditReport(ok=False, blocks=len(self._blocks), height=i, reason=str(exc))
            prev = block
        return AuditReport(ok=True, blocks=len(self._blocks))

    def to_bytes(self) -> bytes:
        return b"".join(block.to_line() for block in self._blocks)

    def save(self, path: str | os.PathLike) -> None:
        tmp = Path(str(path) + ".tmp")
        tmp.write_bytes(self.to_bytes())
        os.replace(tmp, path)


def _append_line(path: Path, line: bytes) -> None:
    with open(path, "ab") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def _parse_line(raw: bytes, height: int) -> Block:
    try:
        block = Block.from_json(json.loads(raw.decode("utf-8")))
    except (ValueError, TypeError, KeyError) as exc:
        raise LedgerFormatError(f"unreadable block record: {exc}", height) from None
    if block.to_line() != raw + b"\n":
        raise LedgerFormatError("block record is not in canonical form", height)
    return block


def read_blocks(path: str | os.PathLike) -> Iterator[Block]:
    data = Path(path).read_bytes()
    if not data:
        return
    lines = data.split(b"\n")
    if lines[-1] != b"":
        raise LedgerFormatError("ledger file does not end with a newline", len(lines) - 1)
    for height, raw in enumerate(lines[:-1]):
        yield _parse_line(raw, height)


def audit_file(path: str | os.PathLike) -> AuditReport:
    """Audit a persisted ledger, including records too damaged to parse."""
    data = Path(path).read_bytes()
    lines = data.split(b"\n") if data else [b""]
    records = lines[:-1]
    prev = None
    seen: set = set()
    for height, raw in enumerate(records):
        try:
            block = _parse_line(raw, height)
            _check_block(block, prev, seen)
        except LedgerError as exc:
            return AuditReport(ok=False, blocks=len(records), height=height, reason=str(exc))
        prev = block
    if lines[-1] != b"":
        return AuditReport(
            ok=False, blocks=len(records), height=len(records),
            reason="ledger file does not end with a newline",
        )
    return AuditReport(ok=True, blocks=len(records))


def append_tx(ledger: Ledger, tx: Transaction, issuer_pubkey: bytes) -> bytes:
    return ledger.append_tx(tx, issuer_pubkey)


def query(ledger: Ledger, tx_id: bytes) -> Optional[Transaction]:
    return ledger.query(tx_id)


def audit(ledger: Ledger) -> AuditReport:
    return ledger.audit()
