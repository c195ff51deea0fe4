"""Mining: one nonce -> one HDC model -> one exact accuracy, searched over a nonce budget."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
import statistics
import threading
import time

from . import hdc
from .dataset import task_hash
from .difficulty import Difficulty
from .errors import ConfigurationError
from .rng import SplitMix64

NONCE_MASK = 0xFFFFFFFF


@dataclass(frozen=True)
class Sequential:
    start: int = 0

    def nonces(self, count):
        return [(self.start + i) & NONCE_MASK for i in range(count)]


@dataclass(frozen=True)
class RandomNonces:
    """Low 32 bits of successive splitmix64 outputs."""

    seed: int

    def nonces(self, count):
        rng = SplitMix64(self.seed)
        return [rng.next() & NONCE_MASK for _ in range(count)]


@dataclass(frozen=True)
class MiningTask:
    dataset_hash: bytes
    difficulty: Difficulty
    nonce_budget: int = 1
    nonce_strategy: object = Sequential(0)

    def __post_init__(self):
        if self.nonce_budget < 1:
            raise ConfigurationError("nonce budget must be >= 1")


@dataclass(frozen=True)
class MiningResult:
    nonce: int
    accuracy: hdc.ExactAccuracy
    nonce_time: float  # median seconds per trial; measurement only
    trials_used: int
    found_at: int  # 1-based trial index of the winning nonce
    trials: tuple = field(default=(), compare=False, repr=False)

    def best_curve(self):
        """Best accuracy after each trial, in trial order."""
        curve, best = [], None
        for _, acc in self.trials:
            if best is None or acc.fraction > best.fraction:
                best = acc
            curve.append(best)
        return curve


class TaskData:
    """A train/test pair with its quantized levels cached per level count.

    Quantization depends only on the data, not on the nonce, so it is done
    once per task instead of once per trial.
    """

    def __init__(self, train, test):
        if train.n_features != test.n_features:
            raise ConfigurationError(
                f"train has {train.n_features} features, test has {test.n_features}"
            )
        if train.num_classes != test.num_classes:
            raise ConfigurationError(
                f"train has {train.num_classes} classes, test has {test.num_classes}"
            )
        self.train = train
        self.test = test
        self._levels = {}
        self._lock = threading.Lock()

    @cached_property
    def task_hash(self):
        return task_hash(self.train, self.test)

    @cached_property
    def baseline(self):
        return self.test.majority_baseline()

    def levels(self, num_levels):
        with self._lock:
            if num_levels not in self._levels:
                config = hdc.EncodingConfig.from_training(1, num_levels, self.train.features)
                self._levels[num_levels] = (
                    hdc.quantize_matrix(self.train.features, config),
                    hdc.quantize_matrix(self.test.features, config),
                )
            return self._levels[num_levels]

    def trial(self, nonce, difficulty):
        train_levels, test_levels = self.levels(difficulty.num_levels)
        config = hdc.EncodingConfig(difficulty.dimension, difficulty.num_levels)
        im = hdc.gen_item_memory(nonce, config, self.train.n_features)
        am = hdc.train_quantized(train_levels, self.train.labels, im, self.train.num_classes)
        return hdc.evaluate_quantized(am, test_levels, self.test.labels, im)


def nonce_trial(nonce, train, test, difficulty):
    """Item memory from ``nonce``, encode, train, evaluate. Pure and deterministic."""
    return TaskData(train, test).trial(nonce, difficulty)


def _timed_trial(data, nonce, difficulty):
    start = time.perf_counter()
    acc = data.trial(nonce, difficulty)
    return nonce, acc, time.perf_counter() - start


def _better(a, b):
    """Whether trial ``a`` beats ``b``: higher accuracy, then smaller nonce."""
    fa, fb = a[1].fraction, b[1].fraction
    return fa > fb or (fa == fb and a[0] < b[0])


def mine_data(task, data, threads=1, stop_at_threshold=False, time_limit=None):
    """Search ``task``'s nonces on prepared ``data``.

    In budget mode (the default) the trial set is exactly the first
    ``nonce_budget`` nonces of the strategy, and the result does not depend on
    ``threads``. ``stop_at_threshold`` cuts the scan at the first nonce that
    meets the threshold (still deterministic); ``time_limit`` in seconds stops
    launching trials once exceeded and is not deterministic.
    """
    if task.dataset_hash != data.task_hash:
        raise ConfigurationError("mining task does not match the supplied datasets")
    nonces = task.nonce_strategy.nonces(task.nonce_budget)
    difficulty = task.difficulty
    batch = max(1, threads)
    started = time.perf_counter()
    done = []
    with ThreadPoolExecutor(max_workers=batch) as pool:
        for offset in range(0, len(nonces), batch):
            chunk = nonces[offset:offset + batch]
            done.extend(pool.map(lambda n: _timed_trial(data, n, difficulty), chunk))
            if stop_at_threshold:
                hit = next(
                    (i for i, t in enumerate(done) if t[1].meets(difficulty.accuracy_threshold)),
                    None,
                )
                if hit is not None:
                    done = done[: hit + 1]
                    break
            if time_limit is not None and time.perf_counter() - started > time_limit:
                break
    best = done[0]
    for candidate in done[1:]:
        if _better(candidate, best):
            best = candidate
    found_at = next(i for i, t in enumerate(done) if t[0] == best[0]) + 1
    return MiningResult(
        nonce=best[0],
        accuracy=best[1],
        nonce_time=statistics.median(t[2] for t in done),
        trials_used=len(done),
        found_at=found_at,
        trials=tuple((n, acc) for n, acc, _ in done),
    )


def mine(task, train, test, threads=1, stop_at_threshold=False, time_limit=None):
    return mine_data(task, TaskData(train, test), threads, stop_at_threshold, time_limit)


def measure_nonce_time(task, train, test, samples=3, data=None):
    """Median wall-clock seconds of ``samples`` single-threaded trials.

    Quantization is nonce-independent and prepared before the clock starts.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    data = data if data is not None else TaskData(train, test)
    data.levels(task.difficulty.num_levels)
    times = [
        _timed_trial(data, nonce, task.difficulty)[2]
        for nonce in task.nonce_strategy.nonces(samples)
    ]
    return statistics.median(times)


def nonce_time_table(data, difficulties, samples=5, start=0):
    """Median seconds per trial for each difficulty, sampled round-robin.

    Each of the ``samples`` rounds times every difficulty once (nonce
    ``start + round``), so slow drift in machine speed hits all of them alike.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    for difficulty in difficulties:
        data.levels(difficulty.num_levels)
    times = [[] for _ in difficulties]
    for r in range(samples):
        for column, difficulty in zip(times, difficulties):
            column.append(_timed_trial(data, (start + r) & NONCE_MASK, difficulty)[2])
    return [statistics.median(column) for column in times]

