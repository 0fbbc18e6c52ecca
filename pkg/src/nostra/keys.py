"""Local key storage and public-key resolution.

A keys directory holds ``<name>.pub`` and ``<name>.key`` files, each a single
line of lowercase hex. Locators are key_id hex strings.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping, Optional

from nostra.crypto import DEFAULT_ALGO, HashAlgorithm, KeyPair, key_id, keygen


class KeyDirectory:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def pub_path(self, name: str) -> Path:
        return self.root / f"{name}.pub"

    def key_path(self, name: str) -> Path:
        return self.root / f"{name}.key"

    def save(self, name: str, keys: KeyPair, force: bool = False) -> None:
        pub, sec = self.pub_path(name), self.key_path(name)
        if not force and (pub.exists() or sec.exists()):
            raise FileExistsError(f"key files for {name!r} already exist in {self.root}")
        self.root.mkdir(parents=True, exist_ok=True)
        pub.write_text(keys.public.hex() + "\n")
        fd = os.open(sec, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as fh:
            fh.write(keys.secret.hex() + "\n")

    def load(self, name: str, algo: HashAlgorithm = DEFAULT_ALGO) -> KeyPair:
        secret = bytes.fromhex(self.key_path(name).read_text().strip())
        keys = keygen(secret, algo)
        pub = self.pub_path(name)
        if pub.exists() and bytes.fromhex(pub.read_text().strip()) != keys.public:
            raise ValueError(f"{pub} does not match {self.key_path(name)}")
        return keys

    def public_keys(self) -> dict[str, bytes]:
        if not self.root.is_dir():
            return {}
        out = {}
        for path in sorted(self.root.glob("*.pub")):
            try:
                out[path.stem] = bytes.fromhex(path.read_text().strip())
            except ValueError:
                continue
        return out

    def resolver(self) -> "MappingResolver":
        """Snapshot of every public key in the directory, indexed by key_id under each algorithm."""
        table = {}
        for public in self.public_keys().values():
            for algo in HashAlgorithm:
                table[key_id(public, algo).hex()] = public
        return MappingResolver(table)


class MappingResolver:
    """Resolve locators from a fixed table; unknown locators resolve to None."""

    def __init__(self, table: Mapping[str, bytes]):
        self.table = dict(table)

    def __call__(self, locator: str) -> Optional[bytes]:
        return self.table.get(locator)

    @classmethod
    def for_keys(cls, *keypairs: KeyPair) -> "MappingResolver":
        return cls({k.key_id.hex(): k.public for k in keypairs})
