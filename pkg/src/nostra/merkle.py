"""Balanced binary Merkle tree with self-contained authentication paths.

Odd-width levels pair their last node with itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from nostra.crypto import DEFAULT_ALGO, HashAlgorithm, check_digest, hash_node


class Side(str, enum.Enum):
    """Which side the sibling concatenates on."""

    LEFT = "L"
    RIGHT = "R"


@dataclass(frozen=True)
class PathStep:
    sibling: bytes
    side: Side


@dataclass(frozen=True)
class AuthPath:
    leaf_index: int
    steps: tuple[PathStep, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def to_json(self) -> list[dict]:
        return [{"sibling": s.sibling.hex(), "side": s.side.value} for s in self.steps]

    @classmethod
    def from_json(cls, leaf_index: int, steps: list[dict]) -> "AuthPath":
        return cls(
            leaf_index=leaf_index,
            steps=tuple(PathStep(bytes.fromhex(s["sibling"]), Side(s["side"])) for s in steps),
        )


@dataclass(frozen=True)
class MerkleTree:
    levels: tuple[tuple[bytes, ...], ...]
    algo: HashAlgorithm = DEFAULT_ALGO

    @property
    def leaves(self) -> tuple[bytes, ...]:
        return self.levels[0]

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def __len__(self) -> int:
        return len(self.leaves)

    def auth_path(self, leaf_index: int) -> AuthPath:
        return auth_path(self, leaf_index)


def build_tree(leaves: Sequence[bytes], algo: HashAlgorithm = DEFAULT_ALGO) -> MerkleTree:
    algo = HashAlgorithm.parse(algo)
    if not leaves:
        raise ValueError("cannot build a Merkle tree over zero leaves")
    level = tuple(check_digest(leaf, algo) for leaf in leaves)
    levels = [level]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            left = level[i]
            right = level[i + 1] if i + 1 < len(level) else left
            nxt.append(hash_node(left, right, algo))
        level = tuple(nxt)
        levels.append(level)
    return MerkleTree(levels=tuple(levels), algo=algo)


def root(tree: MerkleTree) -> bytes:
    return tree.root


def auth_path(tree: MerkleTree, leaf_index: int) -> AuthPath:
    if not 0 <= leaf_index < len(tree.leaves):
        raise IndexError(f"leaf index {leaf_index} out of range for {len(tree.leaves)} leaves")
    steps = []
    index = leaf_index
    for level in tree.levels[:-1]:
        if index % 2 == 0:
            sibling = level[index + 1] if index + 1 < len(level) else level[index]
            steps.append(PathStep(sibling, Side.RIGHT))
        else:
            steps.append(PathStep(level[index - 1], Side.LEFT))
        index //= 2
    return AuthPath(leaf_index=leaf_index, steps=tuple(steps))


def fold_path(leaf: bytes, path: AuthPath, algo: HashAlgorithm = DEFAULT_ALGO) -> bytes:
    """Hash ``leaf`` up through ``path`` and return the implied root."""
    node = leaf
    for step in path.steps:
        if step.side == Side.RIGHT:
            node = hash_node(node, step.sibling, algo)
        else:
            node = hash_node(step.sibling, node, algo)
    return node


def path_matches_index(path: AuthPath) -> bool:
    """Sides must agree with the bits of ``leaf_index``, and the index must fit the depth."""
    index = path.leaf_index
    if index < 0 or index >> len(path.steps):
        return False
    for k, step in enumerate(path.steps):
        expected = Side.LEFT if (index >> k) & 1 else Side.RIGHT
        if step.side != expected:
            return False
    return True


def verify_path(
    leaf: bytes, path: AuthPath, expected_root: bytes, algo: HashAlgorithm = DEFAULT_ALGO
) -> bool:
    algo = HashAlgorithm.parse(algo)
    size = algo.digest_size
    if len(leaf) != size or len(expected_root) != size:
        return False
    if any(len(step.sibling) != size for step in path.steps):
        return False
    if not path_matches_index(path):
        return False
    return fold_path(leaf, path, algo) == expected_root
