"""Ledger: transactions, Merkle roots, headers, validation, persistence, mempool."""
from dataclasses import dataclass
from fractions import Fraction
import hashlib
import heapq
import json
from pathlib import Path
import struct
import threading

from .difficulty import admissible_threshold, initial_difficulty, next_difficulty, Difficulty
from .errors import ChainFormatError, ConfigurationError
from .hdc import ExactAccuracy

ZERO_HASH = bytes(32)
COINBASE_PREFIX = "coinbase/"
_HEADER_LAYOUT = struct.Struct(">Q32s32s32sIIIIIIIQ")  # 140 bytes


def sha256(data):
    return hashlib.sha256(data).digest()


def _tx_bytes(from_account, to_account, amount, timestamp):
    src = from_account.encode("utf-8")
    dst = to_account.encode("utf-8")
    return (
        struct.pack(">I", len(src)) + src
        + struct.pack(">I", len(dst)) + dst
        + struct.pack(">Qq", amount, timestamp)
    )


@dataclass(frozen=True)
class Transaction:
    tx_id: bytes
    from_account: str
    to_account: str
    amount: int
    timestamp: int

    @classmethod
    def create(cls, from_account, to_account, amount, timestamp):
        if amount <= 0:
            raise ValueError(f"amount must be positive, got {amount}")
        return cls(
            sha256(_tx_bytes(from_account, to_account, amount, timestamp)),
            from_account, to_account, amount, timestamp,
        )

    def computed_id(self):
        return sha256(_tx_bytes(self.from_account, self.to_account, self.amount, self.timestamp))

    def well_formed(self):
        return (
            0 < self.amount < 1 << 64
            and -(1 << 63) <= self.timestamp < 1 << 63
            and self.tx_id == self.computed_id()
        )

    @property
    def is_coinbase(self):
        return self.from_account.startswith(COINBASE_PREFIX)


def coinbase(height, miner_id, reward, timestamp):
    return Transaction.create(f"{COINBASE_PREFIX}{height}", miner_id, reward, timestamp)


def merkle_root_of(leaves):
    """Pairwise SHA-256 up to a root; an odd node is paired with itself."""
    level = list(leaves)
    if not level:
        return sha256(b"")
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def merkle_root(txs):
    return merkle_root_of(tx.tx_id for tx in txs)


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    dataset_hash: bytes
    nonce: int
    correct: int
    total: int
    difficulty: Difficulty
    timestamp: int  # unix milliseconds

    @property
    def accuracy(self):
        return ExactAccuracy(self.correct, self.total)

    def to_bytes(self):
        threshold = self.difficulty.accuracy_threshold
        return _HEADER_LAYOUT.pack(
            self.height, self.prev_hash, self.merkle_root, self.dataset_hash,
            self.nonce, self.correct, self.total,
            self.difficulty.dimension, threshold.numerator, threshold.denominator,
            self.difficulty.num_levels, self.timestamp,
        )


def hash_header(header):
    """SHA-256 of the 140-byte big-endian header layout."""
    return sha256(header.to_bytes())


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple
    block_hash: bytes

    @classmethod
    def seal(cls, header, transactions):
        return cls(header, tuple(transactions), hash_header(header))

    @property
    def height(self):
        return self.header.height


@dataclass(frozen=True)
class ChainParams:
    """Consensus parameters fixed at genesis. ``genesis_timestamp`` is in ms."""

    task_hash: bytes
    controller: object
    max_block_txs: int = 64
    reward: int = 50
    genesis_timestamp: int = 1_700_000_000_000

    def __post_init__(self):
        if self.max_block_txs < 1:
            raise ConfigurationError("max_block_txs must be >= 1 (room for the coinbase)")
        if self.reward <= 0:
            raise ConfigurationError("reward must be positive")


def make_genesis(params, baseline):
    header = BlockHeader(
        height=0,
        prev_hash=ZERO_HASH,
        merkle_root=merkle_root([]),
        dataset_hash=params.task_hash,
        nonce=0,
        correct=0,
        total=1,
        difficulty=initial_difficulty(params.controller, baseline),
        timestamp=params.genesis_timestamp,
    )
    return Block.seal(header, [])


def _transaction_violations(block, params):
    violations = []
    txs = block.transactions
    if not all(tx.well_formed() for tx in txs):
        violations.append("malformed_tx")
    if len({tx.tx_id for tx in txs}) != len(txs):
        violations.append("duplicate_tx")
    if len(txs) > params.max_block_txs:
        violations.append("block_too_large")
    if block.height > 0:
        first = txs[0] if txs else None
        if (
            first is None
            or first.from_account != f"{COINBASE_PREFIX}{block.height}"
            or first.amount != params.reward
            or any(tx.is_coinbase for tx in txs[1:])
        ):
            violations.append("bad_coinbase")
    if merkle_root(txs) != block.header.merkle_root:
        violations.append("merkle_mismatch")
    return violations


def validate_genesis(block, params, baseline):
    h = block.header
    violations = []
    if hash_header(h) != block.block_hash:
        violations.append("hash_mismatch")
    expected = make_genesis(params, baseline)
    if h != expected.header or block.transactions:
        violations.append("bad_genesis")
    return violations


def validate_block(block, history, params, data):
    """Named violations of ``block`` on top of ``history`` (headers, genesis first).

    An empty list means the block is valid. The proof-of-useful-work check
    recomputes the trial for the header's nonce and compares the exact
    (correct, total) pair.
    """
    h = block.header
    parent = history[-1]
    violations = []
    if hash_header(h) != block.block_hash:
        violations.append("hash_mismatch")
    if h.height != parent.height + 1:
        violations.append("height_mismatch")
    if h.prev_hash != hash_header(parent):
        violations.append("prev_hash_mismatch")
    violations.extend(_transaction_violations(block, params))
    if h.timestamp <= parent.timestamp:
        violations.append("timestamp_not_increasing")
    if h.dataset_hash != params.task_hash or data.task_hash != params.task_hash:
        violations.append("dataset_mismatch")
    expected = next_difficulty(history, params.controller, data.baseline)
    if (
        h.difficulty.dimension != expected.dimension
        or h.difficulty.num_levels != expected.num_levels
        or not admissible_threshold(
            h.difficulty.accuracy_threshold, expected.accuracy_threshold,
            params.controller, data.baseline,
        )
    ):
        violations.append("difficulty_mismatch")
    else:
        actual = data.trial(h.nonce, h.difficulty)
        if (actual.correct, actual.total) != (h.correct, h.total):
            violations.append("pouw_mismatch")
        elif not actual.meets(h.difficulty.accuracy_threshold):
            violations.append("below_threshold")
    return violations


class BlockRejected(Exception):
    def __init__(self, height, violations):
        super().__init__(f"block {height} rejected: {', '.join(violations)}")
        self.height = height
        self.violations = violations


@dataclass(frozen=True)
class ChainViolation:
    height: int
    violations: list

    def __str__(self):
        return f"height {self.height}: {', '.join(self.violations)}"


class Chain:
    """Single-writer, append-only list of blocks, genesis first."""

    def __init__(self, params, blocks):
        if not blocks:
            raise ValueError("a chain starts with its genesis block")
        self.params = params
        self.blocks = list(blocks)

    @classmethod
    def create(cls, params, baseline):
        return cls(params, [make_genesis(params, baseline)])

    @property
    def tip(self):
        return self.blocks[-1]

    @property
    def height(self):
        return self.tip.height

    def headers(self):
        return [b.header for b in self.blocks]

    def expected_difficulty(self, data):
        return next_difficulty(self.headers(), self.params.controller, data.baseline)

    def append(self, block, data):
        violations = validate_block(block, self.headers(), self.params, data)
        if violations:
            raise BlockRejected(block.height, violations)
        self.blocks.append(block)

    def save(self, path):
        Path(path).write_text("".join(block_to_line(b) + "\n" for b in self.blocks))

    @classmethod
    def load(cls, path, params):
        return cls(params, load_blocks(path))


def validate_chain(chain, data):
    """Re-validate from genesis; returns the first ChainViolation or None."""
    blocks = chain.blocks
    genesis_issues = validate_genesis(blocks[0], chain.params, data.baseline)
    if genesis_issues:
        return ChainViolation(0, genesis_issues)
    history = [blocks[0].header]
    for position, block in enumerate(blocks[1:], start=1):
        violations = validate_block(block, history, chain.params, data)
        if violations:
            return ChainViolation(position, violations)
        history.append(block.header)
    return None


def append_block_to_file(path, block):
    with open(path, "a") as fh:
        fh.write(block_to_line(block) + "\n")


# chain file: one JSON object per line, sorted keys, hex-encoded hashes

def block_to_record(block):
    h = block.header
    threshold = h.difficulty.accuracy_threshold
    return {
        "hash": block.block_hash.hex(),
        "header": {
            "height": h.height,
            "prev_hash": h.prev_hash.hex(),
            "merkle_root": h.merkle_root.hex(),
            "dataset_hash": h.dataset_hash.hex(),
            "nonce": h.nonce,
            "correct": h.correct,
            "total": h.total,
            "dimension": h.difficulty.dimension,
            "threshold": f"{threshold.numerator}/{threshold.denominator}",
            "num_levels": h.difficulty.num_levels,
            "timestamp": h.timestamp,
        },
        "transactions": [
            {
                "tx_id": tx.tx_id.hex(),
                "from": tx.from_account,
                "to": tx.to_account,
                "amount": tx.amount,
                "timestamp": tx.timestamp,
            }
            for tx in block.transactions
        ],
    }


def block_to_line(block):
    return json.dumps(block_to_record(block), sort_keys=True, separators=(",", ":"))


def _int(record, key, bits, signed=False):
    value = record[key]
    if type(value) is not int:
        raise ChainFormatError(f"{key} must be an integer")
    lo, hi = (-(1 << (bits - 1)), 1 << (bits - 1)) if signed else (0, 1 << bits)
    if not lo <= value < hi:
        raise ChainFormatError(f"{key}={value} does not fit in {bits} bits")
    return value


def _hash(record, key):
    value = record[key]
    try:
        raw = bytes.fromhex(value)
    except (TypeError, ValueError):
        raise ChainFormatError(f"{key} is not hex") from None
    if len(raw) != 32 or raw.hex() != value:
        raise ChainFormatError(f"{key} must be 64 lowercase hex digits")
    return raw


def _threshold(text):
    try:
        num, den = (int(part) for part in text.split("/"))
    except (AttributeError, ValueError):
        raise ChainFormatError(f"threshold {text!r} is not 'num/den'") from None
    value = Fraction(num, den) if den else None
    if value is None or (value.numerator, value.denominator) != (num, den):
        raise ChainFormatError(f"threshold {text!r} is not a reduced fraction")
    return value


def block_from_record(record):
    try:
        h = record["header"]
        difficulty = Difficulty(
            _int(h, "dimension", 32), _threshold(h["threshold"]), _int(h, "num_levels", 32)
        )
        header = BlockHeader(
            height=_int(h, "height", 64),
            prev_hash=_hash(h, "prev_hash"),
            merkle_root=_hash(h, "merkle_root"),
            dataset_hash=_hash(h, "dataset_hash"),
            nonce=_int(h, "nonce", 32),
            correct=_int(h, "correct", 32),
            total=_int(h, "total", 32),
            difficulty=difficulty,
            timestamp=_int(h, "timestamp", 64),
        )
        txs = []
        for t in record["transactions"]:
            if not isinstance(t["from"], str) or not isinstance(t["to"], str):
                raise ChainFormatError("transaction accounts must be strings")
            txs.append(Transaction(
                _hash(t, "tx_id"), t["from"], t["to"],
                _int(t, "amount", 64), _int(t, "timestamp", 64, signed=True),
            ))
        return Block(header, tuple(txs), _hash(record, "hash"))
    except KeyError as exc:
        raise ChainFormatError(f"missing field {exc}") from None
    except (TypeError, ConfigurationError) as exc:
        raise ChainFormatError(str(exc)) from None


def load_blocks(path):
    blocks = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                blocks.append(block_from_record(json.loads(line)))
            except (json.JSONDecodeError, ChainFormatError) as exc:
                raise ChainFormatError(f"line {lineno}: {exc}") from None
    if not blocks:
        raise ChainFormatError(f"{path} holds no blocks")
    return blocks


class Mempool:
    """Unconfirmed transactions, taken oldest first (timestamp, then tx_id bytes).

    IDs stay remembered after ``take`` so a confirmed transaction cannot be resubmitted.
    """

    def __init__(self):
        self._heap = []
        self._ids = set()
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._heap)

    def submit(self, tx):
        if not tx.well_formed():
            raise ValueError("malformed transaction")
        if tx.is_coinbase:
            raise ValueError("coinbase transactions are created by the block sealer")
        with self._lock:
            if tx.tx_id in self._ids:
                raise ValueError(f"duplicate transaction {tx.tx_id.hex()}")
            self._ids.add(tx.tx_id)
            heapq.heappush(self._heap, (tx.timestamp, tx.tx_id, tx))

    def take(self, n):
        with self._lock:
            return [heapq.heappop(self._heap)[2] for _ in range(min(n, len(self._heap)))]
