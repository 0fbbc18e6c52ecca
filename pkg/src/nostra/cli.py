"""Command-line entry point.

Machine output is canonical JSON on stdout and diagnostics go to stderr.
Exit codes: 0 accept/ok, 1 negative result, 2 operational failure.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click
from filelock import FileLock

from nostra.bench import run_bench
from nostra.crypto import DEFAULT_ALGO, HashAlgorithm, keygen
from nostra.keys import KeyDirectory
from nostra.ledger import Ledger, LedgerError, audit_file, canonical_json
from nostra.nostrify import (
    STAMP_SUFFIX,
    IssuanceError,
    Stamp,
    issue_batch,
    issue_certified,
    issue_chained,
)
from nostra.verify import verify_document, verify_portfolio

DEFAULT_LEDGER = "nostra-ledger.jsonl"
DEFAULT_KEYS = "keys"


@dataclass
class CliConfig:
    ledger_path: Path
    keys_dir: Path
    algo: HashAlgorithm
    output_dir: Optional[Path]
    fixed_time: Optional[int] = None

    def clock(self):
        if self.fixed_time is None:
            return None
        t = self.fixed_time
        return lambda: t

    def open_ledger(self) -> Ledger:
        return Ledger.open(self.ledger_path, self.clock())

    def load_ledger(self) -> Ledger:
        return Ledger.load(self.ledger_path, self.clock())


def emit(obj) -> None:
    click.echo(canonical_json(obj).decode("utf-8"))


def operational(fn):
    """Map expected operational failures to exit code 2."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (OSError, ValueError, KeyError, LedgerError, IssuanceError) as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(2)

    return wrapper


def _algo(ctx, param, value):
    try:
        return HashAlgorithm.parse(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


@click.group()
@click.option("--ledger", "ledger_path", envvar="NOSTRA_LEDGER", default=DEFAULT_LEDGER,
              show_default=True, type=click.Path(path_type=Path), help="Ledger file.")
@click.option("--keys", "keys_dir", envvar="NOSTRA_KEYS", default=DEFAULT_KEYS,
              show_default=True, type=click.Path(path_type=Path), help="Keys directory.")
@click.option("--algo", default=DEFAULT_ALGO.value, show_default=True, callback=_algo,
              help="Hash algorithm for new transactions and key ids.")
@click.option("--out", "output_dir", type=click.Path(path_type=Path), default=None,
              help="Directory for stamp files (default: beside each document).")
@click.option("--time", "fixed_time", envvar="NOSTRA_TIME", type=int, default=None, hidden=True)
@click.pass_context
def main(ctx, ledger_path, keys_dir, algo, output_dir, fixed_time):
    """Anchor document digests on a ledger and verify stamped documents."""
    ctx.obj = CliConfig(
        ledger_path=ledger_path.resolve(),
        keys_dir=keys_dir.resolve(),
        algo=algo,
        output_dir=output_dir.resolve() if output_dir else None,
        fixed_time=fixed_time,
    )


@main.command("keygen")
@click.argument("name")
@click.option("--seed", default=None, help="32-octet seed as hex, for deterministic keys.")
@click.option("--force", is_flag=True, help="Overwrite existing key files.")
@click.pass_obj
@operational
def cmd_keygen(cfg: CliConfig, name, seed, force):
    """Create NAME.pub and NAME.key in the keys directory."""
    keys = keygen(bytes.fromhex(seed) if seed else None, cfg.algo)
    KeyDirectory(cfg.keys_dir).save(name, keys, force=force)
    emit({"name": name, "key_id": keys.key_id.hex()})


def _stamp_path(cfg: CliConfig, default_dir: Path, name: str) -> Path:
    return (cfg.output_dir or default_dir) / f"{name}{STAMP_SUFFIX}"


def _write_stamp(path: Path, stamp: Stamp) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(stamp.to_bytes() + b"\n")


def _read_stamp(path: Path) -> Stamp:
    try:
        return Stamp.from_bytes(Path(path).read_bytes())
    except (ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"malformed stamp file {path}: {exc}") from None


@main.command("issue")
@click.option("--case", "case", type=click.Choice(["1", "2", "3"]), required=True)
@click.option("--issuer", default=None, help="Issuer key name (cases 1 and 2).")
@click.option("--orgs", default=None, help="Comma-separated organization key names, in certification order (case 3).")
@click.option("--prior", "priors", multiple=True, type=click.Path(path_type=Path),
              help="Stamp file of an earlier issuance to chain onto (case 2, repeatable).")
@click.argument("documents", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.pass_obj
@operational
def cmd_issue(cfg: CliConfig, case, issuer, orgs, priors, documents):
    """Anchor DOCUMENTS and write a stamp file for each."""
    case = int(case)
    if case in (1, 2) and not issuer:
        raise click.UsageError(f"case {case} needs --issuer")
    if case == 2 and not priors:
        raise click.UsageError("case 2 needs at least one --prior stamp")
    if case == 3:
        if not orgs:
            raise click.UsageError("case 3 needs --orgs")
        if len(documents) != 1:
            raise click.UsageError("case 3 certifies exactly one document")

    kd = KeyDirectory(cfg.keys_dir)
    contents = [Path(d).read_bytes() for d in documents]
    names = [Path(d).name for d in documents]
    written = []

    cfg.ledger_path.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(str(cfg.ledger_path) + ".lock"):
        ledger = cfg.open_ledger()
        if case == 1:
            receipt = issue_batch(kd.load(issuer, cfg.algo), contents, ledger, algo=cfg.algo, names=names)
            dirs = [Path(d).resolve().parent for d in documents]
        elif case == 2:
            prior_stamps = [_read_stamp(p) for p in priors]
            prior_names = [p.name[: -len(STAMP_SUFFIX)] if p.name.endswith(STAMP_SUFFIX) else p.stem for p in priors]
            receipt = issue_chained(
                kd.load(issuer, cfg.algo), contents, prior_stamps, ledger,
                algo=cfg.algo, names=names, prior_names=prior_names,
            )
            dirs = [Path(d).resolve().parent for d in documents] + [p.resolve().parent for p in priors]
        else:
            org_keys = []
            for org in (o.strip() for o in orgs.split(",")):
                keys = kd.load(org, cfg.algo)
                org_keys.append((keys, keys.key_id.hex()))
            receipt = issue_certified(contents[0], org_keys, ledger, algo=cfg.algo, name=names[0])
            dirs = [Path(documents[0]).resolve().parent]

    for (name, stamp), directory in zip(receipt.stamps, dirs):
        path = _stamp_path(cfg, directory, name)
        _write_stamp(path, stamp)
        written.append(str(path))
    emit({"tx_id": receipt.tx_id.hex(), "stamps": written})


def _default_stamp(document: Path) -> Path:
    return document.with_name(document.name + STAMP_SUFFIX)


@main.command("verify")
@click.argument("document", type=click.Path(path_type=Path))
@click.argument("stamp", required=False, type=click.Path(path_type=Path))
@click.pass_obj
@operational
def cmd_verify(cfg: CliConfig, document, stamp):
    """Verify DOCUMENT against STAMP (default: DOCUMENT.stamp.json)."""
    data = document.read_bytes()
    st = _read_stamp(stamp or _default_stamp(document))
    ledger = cfg.load_ledger()
    verdict = verify_document(data, st, ledger, KeyDirectory(cfg.keys_dir).resolver())
    emit(verdict.to_json())
    raise SystemExit(0 if verdict.accepted else 1)


@main.command("portfolio")
@click.option("--latest", type=click.Path(path_type=Path), required=True,
              help="Stamp of the holder's most recent issuance.")
@click.argument("documents", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.pass_obj
@operational
def cmd_portfolio(cfg: CliConfig, latest, documents):
    """Verify several documents (each with DOC.stamp.json) against one latest transaction."""
    pairs = [(d.read_bytes(), _read_stamp(_default_stamp(d))) for d in documents]
    ledger = cfg.load_ledger()
    result = verify_portfolio(pairs, _read_stamp(latest), ledger, KeyDirectory(cfg.keys_dir).resolver())
    emit(result.to_json())
    raise SystemExit(0 if result.overall.accepted else 1)


@main.group("ledger")
def cmd_ledger():
    """Inspect the ledger."""


@cmd_ledger.command("show")
@click.pass_obj
@operational
def ledger_show(cfg: CliConfig):
    ledger = cfg.load_ledger()
    rows = []
    for block in ledger:
        for tx in block.transactions:
            rows.append({
                "height": block.height,
                "timestamp": block.timestamp,
                "block_hash": block.block_hash.hex(),
                "tx_id": tx.tx_id.hex(),
                "kind": tx.kind,
                "issuer_key_id": tx.issuer_key_id.hex(),
                "documents": len(tx.hash_set),
            })
    emit({"blocks": rows})


@cmd_ledger.command("audit")
@click.pass_obj
@operational
def ledger_audit(cfg: CliConfig):
    report = audit_file(cfg.ledger_path)
    emit(report.to_json())
    if not report.ok:
        click.echo(f"corruption at height {report.height}: {report.reason}", err=True)
    raise SystemExit(0 if report.ok else 1)


@cmd_ledger.command("tx")
@click.argument("tx_id")
@click.pass_obj
@operational
def ledger_tx(cfg: CliConfig, tx_id):
    ledger = cfg.load_ledger()
    try:
        key = bytes.fromhex(tx_id)
    except ValueError:
        key = b""
    tx = ledger.query(key)
    if tx is None:
        emit({"result": "not_found", "tx_id": tx_id})
        raise SystemExit(1)
    height, _ = ledger.locate(key)
    emit({"result": "found", "height": height, "transaction": tx.to_json()})


@main.command("bench")
@click.option("--case", "case", type=click.Choice(["1", "3"]), default="1", show_default=True)
@click.option("--users", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--docs", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--runs", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--orgs", type=click.IntRange(min=1), default=3, show_default=True, help="Certifying organizations (case 3).")
@click.option("--seed", type=int, default=None)
@click.pass_obj
@operational
def cmd_bench(cfg: CliConfig, case, users, docs, runs, orgs, seed):
    """Mean issuance and verification times over RUNS fresh ledgers."""
    emit(run_bench(int(case), users, docs, runs, orgs, cfg.algo, seed))


if __name__ == "__main__":
    main()
