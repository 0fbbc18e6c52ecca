"""Issuer-side workflows: anchor a batch, chain onto earlier issuances, or certify one document.

Stamps are sidecar records; the document bytes are never modified.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from nostra.certchain import CertChain, certify
from nostra.crypto import DEFAULT_ALGO, HashAlgorithm, KeyPair, hash_leaf
from nostra.ledger import (
    KIND_CERTCHAIN,
    KIND_MERKLE,
    Clock,
    Ledger,
    canonical_json,
    make_transaction,
)
from nostra.merkle import AuthPath, build_tree

STAMP_SUFFIX = ".stamp.json"


class CaseTag(str, enum.Enum):
    CASE1 = "CASE1"
    CASE2 = "CASE2"
    CASE3 = "CASE3"


class IssuanceError(ValueError):
    pass


@dataclass(frozen=True)
class Stamp:
    tx_id: bytes
    auth_path: AuthPath
    doc_hash: bytes
    case_tag: CaseTag
    cert_chain: Optional[CertChain] = None
    prev_tx_id: Optional[bytes] = None

    def __post_init__(self):
        if (self.cert_chain is not None) != (self.case_tag is CaseTag.CASE3):
            raise ValueError("cert_chain must be present exactly for CASE3 stamps")
        if (self.prev_tx_id is not None) != (self.case_tag is CaseTag.CASE2):
            raise ValueError("prev_tx_id must be present exactly for CASE2 stamps")

    @property
    def leaf_index(self) -> int:
        return self.auth_path.leaf_index

    def to_json(self) -> dict:
        out = {
            "case": self.case_tag.value,
            "tx_id": self.tx_id.hex(),
            "leaf_index": self.leaf_index,
            "auth_path": self.auth_path.to_json(),
            "doc_hash": self.doc_hash.hex(),
        }
        if self.cert_chain is not None:
            out["cert_chain"] = self.cert_chain.to_json()
        if self.prev_tx_id is not None:
            out["prev_tx_id"] = self.prev_tx_id.hex()
        return out

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, data: dict) -> "Stamp":
        leaf_index = data["leaf_index"]
        if isinstance(leaf_index, bool) or not isinstance(leaf_index, int):
            raise ValueError("leaf_index must be an integer")
        chain = data.get("cert_chain")
        prev = data.get("prev_tx_id")
        return cls(
            tx_id=bytes.fromhex(data["tx_id"]),
            auth_path=AuthPath.from_json(leaf_index, data["auth_path"]),
            doc_hash=bytes.fromhex(data["doc_hash"]),
            case_tag=CaseTag(data["case"]),
            cert_chain=CertChain.from_json(chain) if chain is not None else None,
            prev_tx_id=bytes.fromhex(prev) if prev is not None else None,
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Stamp":
        """Parse a stamp file; anything but the exact canonical encoding is refused."""
        stamp = cls.from_json(json.loads(raw.decode("utf-8")))
        canonical = stamp.to_bytes()
        if raw not in (canonical, canonical + b"\n"):
            raise ValueError("stamp is not in canonical form")
        return stamp


@dataclass
class IssuanceReceipt:
    tx_id: bytes
    stamps: list[tuple[str, Stamp]] = field(default_factory=list)

    def stamp_for(self, name: str) -> Stamp:
        for n, stamp in self.stamps:
            if n == name:
                return stamp
        raise KeyError(name)


def _names(names: Optional[Sequence[str]], count: int, prefix: str) -> list[str]:
    if names is None:
        return [f"{prefix}-{i}" for i in range(count)]
    if len(names) != count:
        raise IssuanceError(f"expected {count} names, got {len(names)}")
    return list(names)


def _anchor_merkle(
    issuer: KeyPair,
    hash_set: Sequence[bytes],
    ledger: Ledger,
    clock: Optional[Clock],
    algo: HashAlgorithm,
):
    tree = build_tree(hash_set, algo)
    created_at = int((clock or ledger.clock)())
    tx = make_transaction(issuer, hash_set, tree.root, created_at, algo, KIND_MERKLE)
    tx_id = ledger.append_tx(tx, issuer.public)
    return tree, tx_id


def issue_batch(
    issuer: KeyPair,
    documents: Sequence[bytes],
    ledger: Ledger,
    clock: Optional[Clock] = None,
    algo: HashAlgorithm = DEFAULT_ALGO,
    names: Optional[Sequence[str]] = None,
) -> IssuanceReceipt:
    """Anchor one transaction over ``documents`` and stamp each of them."""
    algo = HashAlgorithm.parse(algo)
    if not documents:
        raise IssuanceError("nothing to issue: empty document list")
    names = _names(names, len(documents), "doc")
    hashes = [hash_leaf(d, algo) for d in documents]
    tree, tx_id = _anchor_merkle(issuer, hashes, ledger, clock, algo)
    receipt = IssuanceReceipt(tx_id=tx_id)
    for i, (name, h) in enumerate(zip(names, hashes)):
        receipt.stamps.append((name, Stamp(tx_id, tree.auth_path(i), h, CaseTag.CASE1)))
    return receipt


def issue_chained(
    issuer: KeyPair,
    new_documents: Sequence[bytes],
    prior_stamps: Sequence[Stamp],
    ledger: Ledger,
    clock: Optional[Clock] = None,
    algo: HashAlgorithm = DEFAULT_ALGO,
    names: Optional[Sequence[str]] = None,
    prior_names: Optional[Sequence[str]] = None,
) -> IssuanceReceipt:
    """Anchor new documents together with documents already nostrified elsewhere.

    The new hash set lists the new documents first and then the prior ones in
    the order given. Every returned stamp, including fresh ones for the prior
    documents, points at the new transaction.
    """
    algo = HashAlgorithm.parse(algo)
    if not prior_stamps:
        return issue_batch(issuer, new_documents, ledger, clock, algo, names)
    if not new_documents:
        raise IssuanceError("nothing to issue: empty document list")
    names = _names(names, len(new_documents), "doc")
    prior_names = _names(prior_names, len(prior_stamps), "prior")

    latest_height = -1
    latest_tx_id = b""
    for stamp in prior_stamps:
        tx = ledger.query(stamp.tx_id)
        if tx is None:
            raise IssuanceError(f"prior transaction {stamp.tx_id.hex()} is not on the ledger")
        if tx.algo is not algo:
            raise IssuanceError(f"prior transaction uses {tx.algo.value}, not {algo.value}")
        idx = stamp.leaf_index
        if not 0 <= idx < len(tx.hash_set) or tx.hash_set[idx] != stamp.doc_hash:
            raise IssuanceError(
                f"prior stamp's document hash is not in transaction {stamp.tx_id.hex()} at index {idx}"
            )
        height, _ = ledger.locate(stamp.tx_id)
        if height > latest_height:
            latest_height, latest_tx_id = height, stamp.tx_id

    new_hashes = [hash_leaf(d, algo) for d in new_documents]
    hash_set = new_hashes + [s.doc_hash for s in prior_stamps]
    tree, tx_id = _anchor_merkle(issuer, hash_set, ledger, clock, algo)
    receipt = IssuanceReceipt(tx_id=tx_id)
    for i, (name, h) in enumerate(zip(names + prior_names, hash_set)):
        stamp = Stamp(tx_id, tree.auth_path(i), h, CaseTag.CASE2, prev_tx_id=latest_tx_id)
        receipt.stamps.append((name, stamp))
    return receipt


def issue_certified(
    document: bytes,
    orgs: Sequence[tuple[KeyPair, str]],
    ledger: Ledger,
    clock: Optional[Clock] = None,
    algo: HashAlgorithm = DEFAULT_ALGO,
    name: str = "doc-0",
) -> IssuanceReceipt:
    """Certify one document through each organization in order and anchor the chain root.

    The anchoring transaction is signed by the last organization.
    """
    algo = HashAlgorithm.parse(algo)
    if not orgs:
        raise IssuanceError("certification needs at least one organization")
    doc_hash = hash_leaf(document, algo)
    chain = certify(doc_hash, orgs, algo)
    last = orgs[-1][0]
    created_at = int((clock or ledger.clock)())
    tx = make_transaction(last, [doc_hash], chain.root, created_at, algo, KIND_CERTCHAIN)
    tx_id = ledger.append_tx(tx, last.public)
    stamp = Stamp(tx_id, AuthPath(leaf_index=0), doc_hash, CaseTag.CASE3, cert_chain=chain)
    return IssuanceReceipt(tx_id=tx_id, stamps=[(name, stamp)])
