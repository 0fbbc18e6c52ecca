from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class Cause(str, enum.Enum):
    OK = "ok"
    TX_NOT_FOUND = "tx_not_found"
    DOC_HASH_MISMATCH = "doc_hash_mismatch"
    HASH_NOT_IN_SET = "hash_not_in_set"
    PATH_MISMATCH = "path_mismatch"
    ROOT_MISMATCH = "root_mismatch"
    BAD_ISSUER_SIGNATURE = "bad_issuer_signature"
    BAD_CHAIN_LAYER = "bad_chain_layer"
    MISSING_PUBKEY = "missing_pubkey"


REJECT_CAUSES = tuple(c for c in Cause if c is not Cause.OK)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a verification; ``layer`` is 1-based and set only for chain-layer causes."""

    cause: Cause
    layer: Optional[int] = None
    detail: str = ""

    @property
    def accepted(self) -> bool:
        return self.cause is Cause.OK

    @property
    def result(self) -> str:
        return "accept" if self.accepted else "reject"

    def __bool__(self) -> bool:
        return self.accepted

    def to_json(self) -> dict:
        out = {"result": self.result, "cause": self.cause.value}
        if self.layer is not None:
            out["layer"] = self.layer
        if self.detail:
            out["detail"] = self.detail
        return out


ACCEPT = Verdict(Cause.OK)


def reject(cause: Cause, detail: str = "", layer: Optional[int] = None) -> Verdict:
    return Verdict(cause=cause, layer=layer, detail=detail)
