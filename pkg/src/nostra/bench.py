"""Timing harness for issuance and verification, shaped like a per-case table row.

Only wall-clock means are meant to be compared. CPU share and peak RSS are
best-effort and depend on the platform.
"""

from __future__ import annotations

import os
import random
import resource
import statistics
import tempfile
import time
from pathlib import Path
from typing import Optional

from nostra.crypto import DEFAULT_ALGO, HashAlgorithm, keygen
from nostra.keys import MappingResolver
from nostra.ledger import Ledger
from nostra.nostrify import issue_batch, issue_certified
from nostra.verify import verify_document, verify_portfolio

DOC_SIZE = 4096


def _seed_bytes(rng: random.Random, n: int) -> bytes:
    return bytes(rng.getrandbits(8) for _ in range(n))


def _run_once(case: int, users: int, docs: int, orgs: int, algo: HashAlgorithm, rng: random.Random, workdir: Path):
    ledger = Ledger(workdir / "ledger.jsonl")
    issuers = [keygen(_seed_bytes(rng, 32), algo) for _ in range(users)]
    org_keys = [keygen(_seed_bytes(rng, 32), algo) for _ in range(orgs)]
    resolve = MappingResolver.for_keys(*issuers, *org_keys)
    corpus = [[_seed_bytes(rng, DOC_SIZE) for _ in range(docs)] for _ in range(users)]

    t0 = time.perf_counter()
    issued = []
    if case == 1:
        for issuer, documents in zip(issuers, corpus):
            receipt = issue_batch(issuer, documents, ledger, algo=algo)
            issued.append((documents, receipt))
    else:
        located = [(k, k.key_id.hex()) for k in org_keys]
        for documents in corpus:
            for doc in documents:
                issued.append(([doc], issue_certified(doc, located, ledger, algo=algo)))
    add_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    ok = True
    for documents, receipt in issued:
        stamps = [s for _, s in receipt.stamps]
        if case == 1:
            ok &= verify_portfolio(list(zip(documents, stamps)), stamps[-1], ledger, resolve).overall.accepted
        else:
            ok &= verify_document(documents[0], stamps[0], ledger, resolve).accepted
    verify_time = time.perf_counter() - t0
    return add_time, verify_time, ok


def run_bench(
    case: int,
    users: int = 1,
    docs: int = 4,
    runs: int = 5,
    orgs: int = 3,
    algo: HashAlgorithm = DEFAULT_ALGO,
    seed: Optional[int] = None,
) -> dict:
    if case not in (1, 3):
        raise ValueError("bench supports case 1 and case 3")
    if runs < 1 or users < 1 or docs < 1 or orgs < 1:
        raise ValueError("runs, users, docs and orgs must all be at least 1")
    algo = HashAlgorithm.parse(algo)
    rng = random.Random(seed)
    add, ver = [], []
    all_ok = True
    cpu0, wall0 = time.process_time(), time.perf_counter()
    for _ in range(runs):
        with tempfile.TemporaryDirectory(prefix="nostra-bench-") as tmp:
            a, v, ok = _run_once(case, users, docs, orgs, algo, rng, Path(tmp))
        add.append(a)
        ver.append(v)
        all_ok &= ok
    cpu, wall = time.process_time() - cpu0, time.perf_counter() - wall0
    # ru_maxrss is KiB on Linux, bytes on macOS
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    rss_mb = rss / (1024 * 1024) if os.uname().sysname == "Darwin" else rss / 1024
    report = {
        "case": case,
        "users": users,
        "docs": docs,
        "runs": runs,
        "algo": algo.value,
        "add_time_s": {"mean": statistics.fmean(add), "samples": add},
        "verify_time_s": {"mean": statistics.fmean(ver), "samples": ver},
        "all_verified": bool(all_ok),
        "cpu_percent": round(100.0 * cpu / wall, 1) if wall > 0 else None,
        "peak_rss_mb": round(rss_mb, 1),
        "memory_note": "process-wide peak RSS; not comparable across platforms",
    }
    if case == 3:
        report["orgs"] = orgs
    return report
