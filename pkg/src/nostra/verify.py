"""Third-party verification from document bytes, a stamp, and a ledger.

Checks run in a fixed order and the first failure decides the cause, so the
same fault always yields the same verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from nostra.certchain import Resolver, check_chain
from nostra.crypto import hash_leaf, key_id, verify_sig
from nostra.ledger import KIND_CERTCHAIN, KIND_MERKLE, Ledger, Transaction
from nostra.merkle import build_tree, verify_path
from nostra.nostrify import CaseTag, Stamp
from nostra.verdict import ACCEPT, Cause, Verdict, reject


def _check_issuer(tx: Transaction, tx_id: bytes, resolve: Resolver, expected_issuer: Optional[bytes] = None) -> Verdict:
    public = resolve(tx.issuer_key_id.hex())
    if public is None:
        return reject(Cause.MISSING_PUBKEY, f"issuer key {tx.issuer_key_id.hex()} not resolvable")
    if key_id(public, tx.algo) != tx.issuer_key_id:
        return reject(Cause.BAD_ISSUER_SIGNATURE, "resolved key does not match issuer_key_id")
    if tx.issuer_pubkey and tx.issuer_pubkey != public:
        return reject(Cause.BAD_ISSUER_SIGNATURE, "ledger records a different issuer key")
    if expected_issuer is not None and expected_issuer != public:
        return reject(Cause.BAD_ISSUER_SIGNATURE, "anchor not signed by the last certifying organization")
    if tx.compute_id() != tx_id:
        return reject(Cause.BAD_ISSUER_SIGNATURE, "anchored record differs from what the issuer signed")
    if not verify_sig(public, tx.payload(), tx.signature):
        return reject(Cause.BAD_ISSUER_SIGNATURE, "issuer signature does not verify")
    return ACCEPT


def _rebuilt_root_matches(tx: Transaction) -> bool:
    try:
        return build_tree(tx.hash_set, tx.algo).root == tx.h_root
    except ValueError:
        return False


def verify_document(document: bytes, stamp: Stamp, ledger: Ledger, resolve: Resolver) -> Verdict:
    tx = ledger.query(stamp.tx_id)
    if tx is None:
        return reject(Cause.TX_NOT_FOUND, f"no transaction {stamp.tx_id.hex()}")

    doc_hash = hash_leaf(document, tx.algo)
    if doc_hash != stamp.doc_hash:
        return reject(Cause.DOC_HASH_MISMATCH, "document digest differs from the stamp")

    idx = stamp.leaf_index
    if not 0 <= idx < len(tx.hash_set) or tx.hash_set[idx] != doc_hash:
        return reject(Cause.HASH_NOT_IN_SET, f"digest not in the transaction's hash set at index {idx}")

    expected_issuer = None
    if stamp.case_tag is CaseTag.CASE3:
        if stamp.auth_path.steps:
            return reject(Cause.PATH_MISMATCH, "certified stamps carry no Merkle path")
        chain = stamp.cert_chain
        verdict = check_chain(doc_hash, chain, resolve, tx.algo)
        if not verdict:
            return verdict
        if tx.kind != KIND_CERTCHAIN or chain.root != tx.h_root:
            return reject(Cause.ROOT_MISMATCH, "chain root differs from the anchored root")
        expected_issuer = resolve(chain.layers[-1].pubkey_location)
    else:
        if stamp.case_tag is CaseTag.CASE2:
            here = ledger.locate(stamp.tx_id)
            before = ledger.locate(stamp.prev_tx_id)
            if before is None or before[0] >= here[0]:
                return reject(Cause.TX_NOT_FOUND, f"no earlier transaction {stamp.prev_tx_id.hex()}")
        if not verify_path(doc_hash, stamp.auth_path, tx.h_root, tx.algo):
            return reject(Cause.PATH_MISMATCH, "authentication path does not reach the anchored root")
        if tx.kind != KIND_MERKLE or not _rebuilt_root_matches(tx):
            return reject(Cause.ROOT_MISMATCH, "anchored root is not the root of the anchored hash set")

    return _check_issuer(tx, stamp.tx_id, resolve, expected_issuer)


@dataclass(frozen=True)
class PortfolioVerdict:
    documents: tuple[Verdict, ...]
    overall: Verdict

    def to_json(self) -> dict:
        return {
            "overall": self.overall.to_json(),
            "documents": [v.to_json() for v in self.documents],
        }


def verify_portfolio(
    documents: Sequence[tuple[bytes, Stamp]],
    latest_stamp: Stamp,
    ledger: Ledger,
    resolve: Resolver,
) -> PortfolioVerdict:
    """Check every presented document against the holder's most recent transaction.

    The transaction is loaded and its signature checked once. A document may
    carry a stamp from an earlier transaction; membership and the path are
    then judged against the latest hash set.
    """
    if latest_stamp.case_tag is CaseTag.CASE3:
        verdicts = tuple(verify_document(doc, stamp, ledger, resolve) for doc, stamp in documents)
        return PortfolioVerdict(verdicts, _overall(verdicts))

    tx = ledger.query(latest_stamp.tx_id)
    if tx is None:
        shared = reject(Cause.TX_NOT_FOUND, f"no transaction {latest_stamp.tx_id.hex()}")
    elif tx.kind != KIND_MERKLE or not _rebuilt_root_matches(tx):
        shared = reject(Cause.ROOT_MISMATCH, "anchored root is not the root of the anchored hash set")
    else:
        shared = _check_issuer(tx, latest_stamp.tx_id, resolve)
    if not shared:
        verdicts = tuple(shared for _ in documents)
        return PortfolioVerdict(verdicts, shared)

    tree = build_tree(tx.hash_set, tx.algo)
    verdicts = []
    for doc, stamp in documents:
        h = hash_leaf(doc, tx.algo)
        if h != stamp.doc_hash:
            verdicts.append(reject(Cause.DOC_HASH_MISMATCH, "document digest differs from the stamp"))
            continue
        if h not in tx.hash_set:
            verdicts.append(reject(Cause.HASH_NOT_IN_SET, "digest not in the latest hash set"))
            continue
        if stamp.tx_id == latest_stamp.tx_id:
            if stamp.auth_path.leaf_index >= len(tx.hash_set) or tx.hash_set[stamp.leaf_index] != h:
                verdicts.append(reject(Cause.HASH_NOT_IN_SET, "stamp index does not hold this digest"))
                continue
            path = stamp.auth_path
        else:
            path = tree.auth_path(tx.hash_set.index(h))
        if not verify_path(h, path, tx.h_root, tx.algo):
            verdicts.append(reject(Cause.PATH_MISMATCH, "authentication path does not reach the anchored root"))
            continue
        verdicts.append(ACCEPT)
    verdicts = tuple(verdicts)
    return PortfolioVerdict(verdicts, _overall(verdicts))


def _overall(verdicts: Sequence[Verdict]) -> Verdict:
    for v in verdicts:
        if not v:
            return v
    if not verdicts:
        return reject(Cause.HASH_NOT_IN_SET, "no documents presented")
    return ACCEPT
