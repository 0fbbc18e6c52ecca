import json
import random
import threading
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from nostra.crypto import hash_leaf, keygen
from nostra.ledger import (
    KIND_CERTCHAIN,
    BadSignatureError,
    DuplicateTransactionError,
    Ledger,
    LedgerError,
    LedgerFormatError,
    RootMismatchError,
    TxIdMismatchError,
    ZERO_DIGEST,
    audit_file,
    block_hash,
    make_transaction,
    read_blocks,
)
from nostra.merkle import build_tree

from conftest import StepClock


def batch_tx(issuer, docs, created_at=1_700_000_000):
    hashes = [hash_leaf(d) for d in docs]
    return make_transaction(issuer, hashes, build_tree(hashes).root, created_at)


def build_ledger(path, n=5, issuer=None):
    issuer = issuer or keygen(b"\x01" * 32)
    ledger = Ledger(path, clock=StepClock())
    for i in range(n):
        tx = batch_tx(issuer, [f"doc-{i}-{j}".encode() for j in range(i % 3 + 1)], 1_700_000_000 + i)
        ledger.append_tx(tx, issuer.public)
    return ledger


def test_append_and_query(ledger, uni):
    tx = batch_tx(uni, [b"a", b"b"])
    tx_id = ledger.append_tx(tx, uni.public)
    assert len(ledger) == 1
    assert ledger.query(tx_id) == tx
    assert ledger.blocks[0].prev_hash == ZERO_DIGEST


def test_unknown_id_not_found(ledger):
    assert ledger.query(bytes(32)) is None
    assert ledger.query(random.Random(1).randbytes(32)) is None


def test_h_root_mismatch_rejected(ledger, uni):
    hashes = [hash_leaf(b"a"), hash_leaf(b"b")]
    tx = make_transaction(uni, hashes, hash_leaf(b"wrong"), 1)
    with pytest.raises(RootMismatchError):
        ledger.append_tx(tx, uni.public)
    assert len(ledger) == 0


def test_duplicate_rejected(ledger, uni):
    tx = batch_tx(uni, [b"a"])
    ledger.append_tx(tx, uni.public)
    with pytest.raises(DuplicateTransactionError):
        ledger.append_tx(tx, uni.public)
    assert len(ledger) == 1


def test_bad_signature_rejected(ledger, uni):
    tx = batch_tx(uni, [b"a"])
    sig = bytearray(tx.signature)
    sig[0] ^= 1
    with pytest.raises(BadSignatureError):
        ledger.append_tx(replace(tx, signature=bytes(sig)), uni.public)


def test_wrong_pubkey_rejected(ledger, uni):
    tx = batch_tx(uni, [b"a"])
    with pytest.raises(BadSignatureError):
        ledger.append_tx(tx, keygen(b"\x42" * 32).public)


def test_tx_id_mismatch_rejected(ledger, uni):
    tx = batch_tx(uni, [b"a"])
    with pytest.raises(TxIdMismatchError):
        ledger.append_tx(replace(tx, tx_id=bytes(32)), uni.public)


def test_certchain_anchor_needs_one_hash(ledger, uni):
    hashes = [hash_leaf(b"a"), hash_leaf(b"b")]
    tx = make_transaction(uni, hashes, hash_leaf(b"r"), 1, kind=KIND_CERTCHAIN)
    with pytest.raises(RootMismatchError):
        ledger.append_tx(tx, uni.public)


def test_unknown_kind_rejected(ledger, uni):
    hashes = [hash_leaf(b"a")]
    tx = make_transaction(uni, hashes, hashes[0], 1, kind="other")
    with pytest.raises(LedgerError):
        ledger.append_tx(tx, uni.public)


def test_block_linkage(tmp_path):
    ledger = build_ledger(tmp_path / "l.jsonl")
    prev = ZERO_DIGEST
    for h, block in enumerate(ledger.blocks):
        assert block.height == h
        assert block.prev_hash == prev
        assert block.block_hash == block_hash(h, prev, block.timestamp, [block.transactions[0].tx_id])
        prev = block.block_hash


def test_timestamps_never_decrease(uni):
    times = iter([10, 5, 20])
    ledger = Ledger(clock=lambda: next(times))
    for d in (b"a", b"b", b"c"):
        ledger.append_tx(batch_tx(uni, [d]), uni.public)
    assert [b.timestamp for b in ledger.blocks] == [10, 10, 20]


def test_fresh_ledger_audits_ok(tmp_path):
    ledger = build_ledger(tmp_path / "l.jsonl")
    assert ledger.audit().ok
    assert audit_file(tmp_path / "l.jsonl").ok
    assert audit_file(tmp_path / "l.jsonl").blocks == 5


def test_persistence_round_trip(tmp_path):
    path = tmp_path / "l.jsonl"
    ledger = build_ledger(path)
    reloaded = Ledger.load(path)
    assert reloaded.blocks == ledger.blocks
    for block in ledger.blocks:
        tx = block.transactions[0]
        assert reloaded.query(tx.tx_id) == tx
        assert json.dumps(reloaded.query(tx.tx_id).to_json()) == json.dumps(tx.to_json())


def test_save_matches_incremental_file(tmp_path):
    ledger = build_ledger(tmp_path / "a.jsonl")
    ledger.save(tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_determinism(tmp_path):
    build_ledger(tmp_path / "a.jsonl")
    build_ledger(tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_open_appends_to_existing(tmp_path):
    path = tmp_path / "l.jsonl"
    build_ledger(path, n=2)
    issuer = keygen(b"\x01" * 32)
    ledger = Ledger.open(path, clock=lambda: 1_800_000_000)
    ledger.append_tx(batch_tx(issuer, [b"later"]), issuer.public)
    assert len(Ledger.load(path)) == 3
    assert audit_file(path).ok


def test_mutated_h_root_reports_height(tmp_path):
    path = tmp_path / "l.jsonl"
    build_ledger(path)
    lines = path.read_bytes().split(b"\n")
    record = json.loads(lines[2])
    h_root = bytearray.fromhex(record["transactions"][0]["h_root"])
    h_root[0] ^= 0xFF
    record["transactions"][0]["h_root"] = h_root.hex()
    lines[2] = json.dumps(record, sort_keys=True, separators=(",", ":")).encode()
    path.write_bytes(b"\n".join(lines))
    report = audit_file(path)
    assert not report.ok and report.height == 2


def test_truncated_last_block(tmp_path):
    path = tmp_path / "l.jsonl"
    build_ledger(path)
    lines = path.read_bytes().split(b"\n")
    # drop the last full record: still a well-formed, shorter chain
    path.write_bytes(b"\n".join(lines[:-2]) + b"\n")
    report = audit_file(path)
    assert report.ok and report.blocks == 4
    # cut mid-record: detected at that height
    path.write_bytes(b"\n".join(lines[:-2]) + b"\n" + lines[-2][:40])
    report = audit_file(path)
    assert not report.ok and report.height == 4


def test_dropped_middle_block(tmp_path):
    path = tmp_path / "l.jsonl"
    build_ledger(path)
    lines = path.read_bytes().split(b"\n")
    del lines[1]
    path.write_bytes(b"\n".join(lines))
    report = audit_file(path)
    assert not report.ok and report.height == 1


def test_load_rejects_noncanonical(tmp_path):
    path = tmp_path / "l.jsonl"
    build_ledger(path, n=1)
    record = json.loads(path.read_bytes())
    path.write_text(json.dumps(record, indent=1).replace("\n", " ") + "\n")
    with pytest.raises(LedgerFormatError):
        list(read_blocks(path))


def test_in_memory_audit_detects_tampered_copy(tmp_path):
    ledger = build_ledger(tmp_path / "l.jsonl")
    blocks = list(ledger.blocks)
    tx = blocks[3].transactions[0]
    blocks[3] = replace(blocks[3], transactions=(replace(tx, created_at=tx.created_at + 1),))
    report = Ledger.from_blocks(blocks).audit()
    assert not report.ok and report.height == 3


def test_concurrent_readers_see_whole_blocks(uni):
    ledger = Ledger(clock=StepClock())
    txs = [batch_tx(uni, [f"d{i}".encode()], i) for i in range(40)]
    stop = threading.Event()
    errors = []

    def reader():
        while not stop.is_set():
            for block in ledger:
                if ledger.query(block.transactions[0].tx_id) is None:
                    errors.append(block.height)

    threads = [threading.Thread(target=reader) for _ in range(3)]
    for t in threads:
        t.start()
    for tx in txs:
        ledger.append_tx(tx, uni.public)
    stop.set()
    for t in threads:
        t.join()
    assert not errors
    assert ledger.audit().ok


@pytest.fixture(scope="module")
def persisted(tmp_path_factory):
    path = tmp_path_factory.mktemp("ledger") / "l.jsonl"
    build_ledger(path, n=5)
    data = path.read_bytes()
    starts = [0]
    for i, b in enumerate(data):
        if b == 0x0A:
            starts.append(i + 1)
    return data, starts


@given(st.data())
@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_any_octet_mutation_is_caught(persisted, tmp_path, data):
    raw, starts = persisted
    pos = data.draw(st.integers(0, len(raw) - 1))
    delta = data.draw(st.integers(1, 255))
    mutated = bytearray(raw)
    mutated[pos] ^= delta
    path = tmp_path / "m.jsonl"
    path.write_bytes(bytes(mutated))
    report = audit_file(path)
    block_of_pos = max(i for i, s in enumerate(starts) if s <= pos)
    assert not report.ok
    assert report.height <= block_of_pos
