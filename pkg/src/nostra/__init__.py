"""Blockchain-anchored document nostrification: Merkle-batched anchors, layered certification, offline verification."""

from nostra.certchain import CertChain, CertLayer, certify, verify_chain
from nostra.crypto import DEFAULT_ALGO, HashAlgorithm, KeyPair, hash_leaf, hash_node, keygen, sign, verify_sig
from nostra.keys import KeyDirectory, MappingResolver
from nostra.ledger import AuditReport, Block, Ledger, LedgerError, Transaction, audit_file, make_transaction
from nostra.merkle import AuthPath, MerkleTree, PathStep, Side, auth_path, build_tree, verify_path
from nostra.nostrify import CaseTag, IssuanceError, IssuanceReceipt, Stamp, issue_batch, issue_certified, issue_chained
from nostra.verdict import Cause, Verdict
from nostra.verify import PortfolioVerdict, verify_document, verify_portfolio

__version__ = "0.1.0"
