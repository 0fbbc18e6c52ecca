"""Hash and signature primitives shared by every other module.

Digests are plain ``bytes``. Leaf and internal-node hashing use distinct
one-octet prefixes so a leaf preimage can never be replayed as a node.
Signatures are Ed25519 over 32-byte seeds.
"""

from __future__ import annotations

import enum
import hashlib
import os
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
TX_PREFIX = b"\x02"
BLOCK_PREFIX = b"\x03"

SEED_LENGTH = 32
PUBLIC_KEY_LENGTH = 32
SIGNATURE_LENGTH = 64


class HashAlgorithm(str, enum.Enum):
    SHA2_256 = "sha2-256"
    SHA3_256 = "sha3-256"
    BLAKE2B_256 = "blake2b-256"

    @classmethod
    def parse(cls, value: "str | HashAlgorithm") -> "HashAlgorithm":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            supported = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown hash algorithm {value!r} (supported: {supported})") from None

    @property
    def digest_size(self) -> int:
        return 32


DEFAULT_ALGO = HashAlgorithm.SHA2_256


def _new(algo: HashAlgorithm):
    if algo is HashAlgorithm.SHA2_256:
        return hashlib.sha256()
    if algo is HashAlgorithm.SHA3_256:
        return hashlib.sha3_256()
    return hashlib.blake2b(digest_size=32)


def digest(data: bytes, algo: HashAlgorithm = DEFAULT_ALGO) -> bytes:
    """Plain hash of ``data``, no domain prefix."""
    h = _new(HashAlgorithm.parse(algo))
    h.update(data)
    return h.digest()


def hash_leaf(document: bytes, algo: HashAlgorithm = DEFAULT_ALGO) -> bytes:
    return digest(LEAF_PREFIX + bytes(document), algo)


def hash_node(left: bytes, right: bytes, algo: HashAlgorithm = DEFAULT_ALGO) -> bytes:
    algo = HashAlgorithm.parse(algo)
    check_digest(left, algo)
    check_digest(right, algo)
    return digest(NODE_PREFIX + left + right, algo)


def check_digest(value: bytes, algo: HashAlgorithm = DEFAULT_ALGO) -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != HashAlgorithm.parse(algo).digest_size:
        raise ValueError(f"expected a {HashAlgorithm.parse(algo).digest_size}-octet digest")
    return bytes(value)


@dataclass(frozen=True)
class KeyPair:
    secret: bytes = field(repr=False)
    public: bytes
    key_id: bytes

    def sign(self, message: bytes) -> bytes:
        return sign(self.secret, message)


def key_id(public: bytes, algo: HashAlgorithm = DEFAULT_ALGO) -> bytes:
    return digest(public, algo)


def keygen(seed: bytes | None = None, algo: HashAlgorithm = DEFAULT_ALGO) -> KeyPair:
    """Deterministic key pair when ``seed`` is given, fresh random one otherwise."""
    if seed is None:
        seed = os.urandom(SEED_LENGTH)
    if len(seed) != SEED_LENGTH:
        raise ValueError(f"seed must be {SEED_LENGTH} octets, got {len(seed)}")
    sk = Ed25519PrivateKey.from_private_bytes(bytes(seed))
    public = sk.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    return KeyPair(secret=bytes(seed), public=public, key_id=key_id(public, algo))


def sign(secret: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(secret).sign(bytes(message))


def verify_sig(public: bytes, message: bytes, signature: bytes) -> bool:
    # malformed keys or signatures are a plain reject
    if len(public) != PUBLIC_KEY_LENGTH or len(signature) != SIGNATURE_LENGTH:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(bytes(public)).verify(bytes(signature), bytes(message))
    except (InvalidSignature, ValueError):
        return False
    return True
