"""In-process multi-miner network: rounds, winner selection, peer verification, sealing."""
from dataclasses import dataclass, field, replace
import time

from .blockchain import (
    Block, BlockHeader, Chain, coinbase, hash_header, Mempool, merkle_root, Transaction,
)
from .difficulty import decay_threshold
from .errors import ConfigurationError
from .hdc import ExactAccuracy
from .miner import MiningTask, mine_data, RandomNonces
from .rng import derive_seed, SplitMix64


class RoundStalled(RuntimeError):
    """No verified result reached the threshold even at the baseline floor."""


@dataclass(frozen=True)
class MinerAgent:
    miner_id: str
    seed: int
    budget: int = 4
    inflate_claim: int = 0  # lie about `correct` by this much (Byzantine test hook)

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigurationError(f"{self.miner_id}: budget must be >= 1")

    def strategy(self, height, attempt):
        return RandomNonces(derive_seed(self.seed, height, attempt))

    def mine(self, data, difficulty, height, attempt=0, threads=1):
        task = MiningTask(data.task_hash, difficulty, self.budget, self.strategy(height, attempt))
        result = mine_data(task, data, threads)
        if self.inflate_claim:
            acc = result.accuracy
            claimed = ExactAccuracy(min(acc.total, acc.correct + self.inflate_claim), acc.total)
            result = replace(result, accuracy=claimed)
        return result


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str = ""

    def __bool__(self):
        return self.accepted


def verify_claim(result, difficulty, data):
    """Recompute the claimed nonce and compare (correct, total) exactly."""
    actual = data.trial(result.nonce, difficulty)
    claimed = result.accuracy
    if (actual.correct, actual.total) != (claimed.correct, claimed.total):
        return Verdict(False, "pouw_mismatch")
    if not actual.meets(difficulty.accuracy_threshold):
        return Verdict(False, "below_threshold")
    return Verdict(True)


def rank_key(miner_id, result):
    """Higher accuracy, then earlier logical submission, then smaller nonce, then id."""
    return (-result.accuracy.fraction, result.found_at, result.nonce, miner_id)


class LogicalClock:
    """Deterministic time: each trial costs ``d * samples * features / work_rate`` seconds."""

    def __init__(self, work_rate=1_000_000_000):
        if work_rate <= 0:
            raise ConfigurationError("work_rate must be positive")
        self.work_rate = int(work_rate)

    def trial_ms(self, difficulty, data):
        work = difficulty.dimension * (data.train.n_samples + data.test.n_samples) * data.train.n_features
        return max(1, -(-work * 1000 // self.work_rate))

    def attempt_ms(self, agents, difficulty, data):
        # agents mine side by side; then everyone re-runs one trial to verify
        trial = self.trial_ms(difficulty, data)
        return max(a.budget for a in agents) * trial + trial

    def timestamp(self, parent_ts, elapsed_ms):
        return parent_ts + max(1, elapsed_ms)


class WallClock(LogicalClock):
    """Real time; blocks get the current unix time in ms. Not reproducible."""

    def timestamp(self, parent_ts, elapsed_ms):
        return max(parent_ts + 1, time.time_ns() // 1_000_000)


@dataclass
class RoundOutcome:
    height: int
    winner: str
    winning_result: object
    all_results: dict
    verifications: dict
    sealed_block: Block
    difficulty: object
    attempts: int
    elapsed_ms: int
    wall_seconds: float
    rejected: list = field(default_factory=list)
    history: dict = field(default_factory=dict)  # miner_id -> results of every attempt


def _seal(chain, data, winner, result, difficulty, mempool, timestamp):
    params = chain.params
    height = chain.height + 1
    txs = [coinbase(height, winner, params.reward, timestamp // 1000)]
    if mempool is not None:
        txs.extend(mempool.take(params.max_block_txs - 1))
    header = BlockHeader(
        height=height,
        prev_hash=hash_header(chain.tip.header),
        merkle_root=merkle_root(txs),
        dataset_hash=data.task_hash,
        nonce=result.nonce,
        correct=result.accuracy.correct,
        total=result.accuracy.total,
        difficulty=difficulty,
        timestamp=timestamp,
    )
    return Block.seal(header, txs)


def run_round(agents, chain, mempool, data, clock=None, threads=1, max_repeats=100):
    """Mine, verify and seal the next block onto ``chain`` (which is extended in place).

    If no verified claim meets the threshold, the threshold drops by the
    controller's decay step (not below the majority-class baseline) and every
    agent mines a fresh batch of nonces, at most ``max_repeats`` more times.
    """
    if not agents:
        raise ConfigurationError("a round needs at least one agent")
    ids = [a.miner_id for a in agents]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("miner ids must be unique")
    clock = clock or LogicalClock()
    started = time.perf_counter()
    height = chain.height + 1
    difficulty = chain.expected_difficulty(data)
    elapsed_ms = 0
    rejected = []
    history = {a.miner_id: [] for a in agents}
    for attempt in range(max_repeats + 1):
        results = {a.miner_id: a.mine(data, difficulty, height, attempt, threads) for a in agents}
        for miner_id, result in results.items():
            history[miner_id].append(result)
        elapsed_ms += clock.attempt_ms(agents, difficulty, data)
        ranked = sorted(
            (rank_key(mid, r), mid) for mid, r in results.items()
            if r.accuracy.meets(difficulty.accuracy_threshold)
        )
        for _, miner_id in ranked:
            result = results[miner_id]
            verdicts = {a.miner_id: verify_claim(result, difficulty, data) for a in agents}
            if all(verdicts.values()):
                timestamp = clock.timestamp(chain.tip.header.timestamp, elapsed_ms)
                block = _seal(chain, data, miner_id, result, difficulty, mempool, timestamp)
                chain.append(block, data)
                return RoundOutcome(
                    height=height,
                    winner=miner_id,
                    winning_result=result,
                    all_results=results,
                    verifications={mid: bool(v) for mid, v in verdicts.items()},
                    sealed_block=block,
                    difficulty=difficulty,
                    attempts=attempt + 1,
                    elapsed_ms=block.header.timestamp - chain.blocks[-2].header.timestamp,
                    wall_seconds=time.perf_counter() - started,
                    rejected=rejected,
                    history=history,
                )
            reason = next(v.reason for v in verdicts.values() if not v)
            rejected.append((miner_id, attempt, reason))
        lowered = decay_threshold(difficulty.accuracy_threshold, chain.params.controller, data.baseline)
        if lowered is not None:
            difficulty = difficulty.with_threshold(lowered)
    raise RoundStalled(
        f"height {height}: no verified result reached threshold {difficulty.accuracy_threshold}"
        f" after {max_repeats + 1} attempts"
    )


class TxGenerator:
    """Seeded toy transfers between a fixed set of accounts."""

    def __init__(self, seed, per_round=4, accounts=16):
        self.seed = seed
        self.per_round = per_round
        self.accounts = [f"acct-{i:03d}" for i in range(accounts)]

    def generate(self, height, base_time):
        rng = SplitMix64(derive_seed(self.seed, height))
        txs = []
        for i in range(self.per_round):
            src = rng.below(len(self.accounts))
            dst = (src + 1 + rng.below(len(self.accounts) - 1)) % len(self.accounts)
            amount = 1 + rng.below(1000)
            txs.append(Transaction.create(self.accounts[src], self.accounts[dst], amount, base_time + i))
        return txs


@dataclass
class RoundRecord:
    round: int
    height: int
    winner: str
    nonce: int
    accuracy: ExactAccuracy
    dimension: int
    threshold: object
    attempts: int
    elapsed_ms: int
    wall_seconds: float
    miner_best: dict
    miner_trials: dict
    miner_nonce_time: dict
    rejected: list


def _record(index, outcome):
    best, trials, nonce_time = {}, {}, {}
    for miner_id, results in outcome.history.items():
        best[miner_id] = max((r.accuracy for r in results), key=lambda a: a.fraction)
        trials[miner_id] = sum(r.trials_used for r in results)
        nonce_time[miner_id] = sum(r.nonce_time for r in results) / len(results)
    return RoundRecord(
        round=index,
        height=outcome.height,
        winner=outcome.winner,
        nonce=outcome.winning_result.nonce,
        accuracy=outcome.winning_result.accuracy,
        dimension=outcome.difficulty.dimension,
        threshold=outcome.difficulty.accuracy_threshold,
        attempts=outcome.attempts,
        elapsed_ms=outcome.elapsed_ms,
        wall_seconds=outcome.wall_seconds,
        miner_best=best,
        miner_trials=trials,
        miner_nonce_time=nonce_time,
        rejected=outcome.rejected,
    )


def run_simulation(agents, rounds, chain, data, tx_seed=0, txs_per_round=4, clock=None,
                   threads=1, max_repeats=100, mempool=None, on_round=None):
    """Seal ``rounds`` blocks onto ``chain``; returns the list of RoundRecords."""
    if rounds < 1:
        raise ConfigurationError("rounds must be >= 1")
    mempool = mempool if mempool is not None else Mempool()
    generator = TxGenerator(tx_seed, txs_per_round)
    log = []
    for index in range(1, rounds + 1):
        base_time = chain.tip.header.timestamp // 1000
        for tx in generator.generate(chain.height + 1, base_time):
            mempool.submit(tx)
        outcome = run_round(agents, chain, mempool, data, clock, threads, max_repeats)
        record = _record(index, outcome)
        log.append(record)
        if on_round is not None:
            on_round(outcome, record)
    return log


LOG_COLUMNS = (
    "round", "height", "winner", "nonce", "accuracy", "dimension", "threshold", "attempts",
    "elapsed_ms", "wall_seconds", "miner_best", "miner_trials", "miner_nonce_time", "rejected",
)


def _pairs(mapping, fmt=str):
    return ";".join(f"{k}={fmt(v)}" for k, v in mapping.items())


def format_log_row(record):
    threshold = record.threshold
    return "\t".join([
        str(record.round),
        str(record.height),
        record.winner,
        str(record.nonce),
        f"{record.accuracy.correct}/{record.accuracy.total}",
        str(record.dimension),
        f"{threshold.numerator}/{threshold.denominator}",
        str(record.attempts),
        str(record.elapsed_ms),
        f"{record.wall_seconds:.6f}",
        _pairs(record.miner_best, lambda a: f"{a.correct}/{a.total}"),
        _pairs(record.miner_trials),
        _pairs(record.miner_nonce_time, lambda t: f"{t:.6f}"),
        ";".join(f"{mid}@{attempt}:{reason}" for mid, attempt, reason in record.rejected),
    ])


def write_round_log(records, path):
    """Tab-separated, one row per round, header first."""
    with open(path, "w") as fh:
        fh.write("\t".join(LOG_COLUMNS) + "\n")
        for record in records:
            fh.write(format_log_row(record) + "\n")


def read_round_log(path):
    """Rows of a round log as dicts of strings."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        return []
    columns = lines[0].split("\t")
    return [dict(zip(columns, line.split("\t"))) for line in lines[1:]]


def new_chain(params, data):
    return Chain.create(params, data.baseline)
