"""Layered certification of a single document by an ordered list of organizations.

Each layer signs the running hash entering it and then folds a node built
from ``(signature, pubkey_location)`` into the running hash on the right:

    r_0 = doc_hash
    r_i = hash_node(r_{i-1}, H(0x00 || sig_i || 0x1F || location_i))
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from nostra.crypto import (
    DEFAULT_ALGO,
    LEAF_PREFIX,
    HashAlgorithm,
    KeyPair,
    digest,
    hash_leaf,
    hash_node,
    sign,
    verify_sig,
)
from nostra.verdict import ACCEPT, Cause, Verdict, reject

LOCATION_SEPARATOR = b"\x1f"

Resolver = Callable[[str], Optional[bytes]]


@dataclass(frozen=True)
class CertLayer:
    signature: bytes
    pubkey_location: str

    def node(self, algo: HashAlgorithm = DEFAULT_ALGO) -> bytes:
        return digest(
            LEAF_PREFIX + self.signature + LOCATION_SEPARATOR + self.pubkey_location.encode("utf-8"),
            algo,
        )

    def to_json(self) -> dict:
        return {"sig": self.signature.hex(), "pubkey_location": self.pubkey_location}

    @classmethod
    def from_json(cls, data: dict) -> "CertLayer":
        return cls(signature=bytes.fromhex(data["sig"]), pubkey_location=str(data["pubkey_location"]))


@dataclass(frozen=True)
class CertChain:
    doc_hash: bytes
    layers: tuple[CertLayer, ...]
    root: bytes

    def to_json(self) -> dict:
        return {
            "doc_hash": self.doc_hash.hex(),
            "layers": [layer.to_json() for layer in self.layers],
            "root": self.root.hex(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CertChain":
        return cls(
            doc_hash=bytes.fromhex(data["doc_hash"]),
            layers=tuple(CertLayer.from_json(x) for x in data["layers"]),
            root=bytes.fromhex(data["root"]),
        )


def running_hashes(
    doc_hash: bytes, layers: Sequence[CertLayer], algo: HashAlgorithm = DEFAULT_ALGO
) -> list[bytes]:
    """``[r_0, r_1, ..., r_n]`` for the given layers."""
    out = [doc_hash]
    for layer in layers:
        out.append(hash_node(out[-1], layer.node(algo), algo))
    return out


def certify(
    doc_hash: bytes,
    orgs: Sequence[tuple[KeyPair, str]],
    algo: HashAlgorithm = DEFAULT_ALGO,
) -> CertChain:
    if not orgs:
        raise ValueError("certification needs at least one organization")
    running = doc_hash
    layers = []
    for keys, location in orgs:
        layer = CertLayer(signature=sign(keys.secret, running), pubkey_location=location)
        layers.append(layer)
        running = hash_node(running, layer.node(algo), algo)
    return CertChain(doc_hash=doc_hash, layers=tuple(layers), root=running)


def check_chain(
    doc_hash: bytes, chain: CertChain, resolve: Resolver, algo: HashAlgorithm = DEFAULT_ALGO
) -> Verdict:
    """Verify ``chain`` for an already-hashed document."""
    if doc_hash != chain.doc_hash:
        return reject(Cause.DOC_HASH_MISMATCH, "document hash differs from the chain's")
    if not chain.layers:
        return reject(Cause.ROOT_MISMATCH, "chain has no layers")
    running = chain.doc_hash
    for i, layer in enumerate(chain.layers, start=1):
        public = resolve(layer.pubkey_location)
        if public is None:
            return reject(Cause.MISSING_PUBKEY, f"cannot resolve {layer.pubkey_location!r}", layer=i)
        if not verify_sig(public, running, layer.signature):
            return reject(Cause.BAD_CHAIN_LAYER, "layer signature does not verify", layer=i)
        running = hash_node(running, layer.node(algo), algo)
    if running != chain.root:
        return reject(Cause.ROOT_MISMATCH, "recomputed chain root differs")
    return ACCEPT


def verify_chain(
    document: bytes, chain: CertChain, resolve: Resolver, algo: HashAlgorithm = DEFAULT_ALGO
) -> Verdict:
    return check_chain(hash_leaf(document, algo), chain, resolve, algo)
