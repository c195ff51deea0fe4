"""Run configuration: a TOML file (every key optional) validated into typed objects.

Keys::

    rounds, threads, clock ("logical" | "wall"), work_rate, tx_seed,
    txs_per_round, max_repeats, chain, log
    [dataset]     csv | train + test | [dataset.synthetic]; header, name,
                  split_fraction, split_seed
    [dataset.synthetic]  classes, features, samples_per_class, separation, seed
    [difficulty]  dimension, threshold, levels, ladder
    [controller]  window, t_low, t_high, margin, decay_step
    [chain_params] max_block_txs, reward, genesis_timestamp
    [[agents]]    id, seed, budget, inflate_claim

Thresholds, margins and times accept integers or strings such as ``"85/100"``;
TOML floats are read through their decimal text.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .blockchain import ChainParams
from .consensus import LogicalClock, MinerAgent, WallClock
from .dataset import load_csv, make_blobs, split
from .difficulty import ControllerParams, DEFAULT_LADDER, Difficulty, parse_fraction
from .errors import ConfigurationError
from .miner import TaskData

_TOP_KEYS = {
    "rounds", "threads", "clock", "work_rate", "tx_seed", "txs_per_round", "max_repeats",
    "chain", "log", "dataset", "difficulty", "controller", "chain_params", "agents",
}
_SECTION_KEYS = {
    "dataset": {"csv", "train", "test", "synthetic", "header", "name", "split_fraction", "split_seed"},
    "synthetic": {"classes", "features", "samples_per_class", "separation", "seed"},
    "difficulty": {"dimension", "threshold", "levels", "ladder"},
    "controller": {"window", "t_low", "t_high", "margin", "decay_step"},
    "chain_params": {"max_block_txs", "reward", "genesis_timestamp"},
    "agent": {"id", "seed", "budget", "inflate_claim"},
}


def _rational(value, key):
    if isinstance(value, float):
        value = repr(value)
    try:
        return parse_fraction(value)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{key}: {exc}") from None


def _check_keys(table, allowed, where):
    if not isinstance(table, dict):
        raise ConfigurationError(f"{where} must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _int(table, key, default, where, minimum=None):
    value = table.get(key, default)
    if type(value) is not int:
        raise ConfigurationError(f"{where}.{key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{where}.{key} must be >= {minimum}, got {value}")
    return value


@dataclass
class SyntheticSpec:
    classes: int = 4
    features: int = 8
    samples_per_class: int = 40
    separation: float = 1.0
    seed: int = 7

    def generate(self, name="synthetic"):
        return make_blobs(self.classes, self.features, self.samples_per_class,
                          self.separation, self.seed, name)


@dataclass
class DatasetSpec:
    csv: Path = None
    train: Path = None
    test: Path = None
    synthetic: SyntheticSpec = None
    header: bool = False
    name: str = None
    split_fraction: Fraction = Fraction(7, 10)
    split_seed: int = 0

    def __post_init__(self):
        sources = sum(x is not None for x in (self.csv, self.train, self.synthetic))
        if sources == 0:
            self.synthetic = SyntheticSpec()
        elif sources > 1:
            raise ConfigurationError("give exactly one of: csv, train+test, synthetic")
        if (self.train is None) != (self.test is None):
            raise ConfigurationError("train and test files must be given together")

    def load(self):
        """Return ``(train, test)`` datasets."""
        if self.train is not None:
            return (load_csv(self.train, self.header), load_csv(self.test, self.header))
        if self.csv is not None:
            full = load_csv(self.csv, self.header, self.name)
        else:
            full = self.synthetic.generate(self.name or "synthetic")
        return split(full, self.split_fraction, self.split_seed)

    def task_data(self):
        return TaskData(*self.load())


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    difficulty: Difficulty = field(default_factory=lambda: Difficulty(3000))
    controller: ControllerParams = None
    agents: list = None
    rounds: int = 3
    threads: int = 1
    clock: str = "logical"
    work_rate: int = 1_000_000_000
    tx_seed: int = 0
    txs_per_round: int = 4
    max_repeats: int = 100
    max_block_txs: int = 16
    reward: int = 50
    genesis_timestamp: int = 1_700_000_000_000
    chain_path: Path = Path("chain.jsonl")
    log_path: Path = Path("rounds.tsv")

    def __post_init__(self):
        if self.controller is None:
            self.controller = ControllerParams(self.difficulty)
        if self.agents is None:
            self.agents = [MinerAgent("miner-0", 1), MinerAgent("miner-1", 2)]
        ids = [a.miner_id for a in self.agents]
        if not ids:
            raise ConfigurationError("at least one agent is required")
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate agent ids: {ids}")
        if self.clock not in ("logical", "wall"):
            raise ConfigurationError(f"clock must be 'logical' or 'wall', got {self.clock!r}")
        for name in ("rounds", "threads", "work_rate"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.txs_per_round < 0 or self.max_repeats < 0:
            raise ConfigurationError("txs_per_round and max_repeats must be >= 0")

    def chain_params(self, data):
        return ChainParams(
            task_hash=data.task_hash,
            controller=self.controller,
            max_block_txs=self.max_block_txs,
            reward=self.reward,
            genesis_timestamp=self.genesis_timestamp,
        )

    def make_clock(self):
        return (LogicalClock if self.clock == "logical" else WallClock)(self.work_rate)


def _path(value, base, key):
    if not isinstance(value, str):
        raise ConfigurationError(f"{key} must be a path string")
    path = Path(value)
    return path if path.is_absolute() else base / path


def config_from_dict(raw, base_dir=Path(".")):
    base = Path(base_dir)
    _check_keys(raw, _TOP_KEYS, "config")

    ds_raw = raw.get("dataset", {})
    _check_keys(ds_raw, _SECTION_KEYS["dataset"], "[dataset]")
    synthetic = None
    if "synthetic" in ds_raw:
        syn = ds_raw["synthetic"]
        _check_keys(syn, _SECTION_KEYS["synthetic"], "[dataset.synthetic]")
        separation = syn.get("separation", 1.0)
        if not isinstance(separation, (int, float)) or separation < 0:
            raise ConfigurationError("dataset.synthetic.separation must be a non-negative number")
        synthetic = SyntheticSpec(
            classes=_int(syn, "classes", 4, "dataset.synthetic", 1),
            features=_int(syn, "features", 8, "dataset.synthetic", 1),
            samples_per_class=_int(syn, "samples_per_class", 40, "dataset.synthetic", 2),
            separation=float(separation),
            seed=_int(syn, "seed", 7, "dataset.synthetic", 0),
        )
    dataset = DatasetSpec(
        csv=_path(ds_raw["csv"], base, "dataset.csv") if "csv" in ds_raw else None,
        train=_path(ds_raw["train"], base, "dataset.train") if "train" in ds_raw else None,
        test=_path(ds_raw["test"], base, "dataset.test") if "test" in ds_raw else None,
        synthetic=synthetic,
        header=bool(ds_raw.get("header", False)),
        name=ds_raw.get("name"),
        split_fraction=_rational(ds_raw.get("split_fraction", "7/10"), "dataset.split_fraction"),
        split_seed=_int(ds_raw, "split_seed", 0, "dataset", 0),
    )

    diff_raw = raw.get("difficulty", {})
    _check_keys(diff_raw, _SECTION_KEYS["difficulty"], "[difficulty]")
    difficulty = Difficulty(
        _int(diff_raw, "dimension", 3000, "difficulty", 1),
        _rational(diff_raw.get("threshold", 0), "difficulty.threshold"),
        _int(diff_raw, "levels", 10, "difficulty", 2),
    )
    ladder = diff_raw.get("ladder", list(DEFAULT_LADDER))
    if not isinstance(ladder, list) or not all(type(d) is int and d > 0 for d in ladder):
        raise ConfigurationError("difficulty.ladder must be a list of positive integers")

    ctl_raw = raw.get("controller", {})
    _check_keys(ctl_raw, _SECTION_KEYS["controller"], "[controller]")
    controller = ControllerParams(
        initial=difficulty,
        ladder=tuple(ladder),
        window=_int(ctl_raw, "window", 10, "controller", 1),
        t_low=_rational(ctl_raw.get("t_low", 1), "controller.t_low"),
        t_high=_rational(ctl_raw.get("t_high", 30), "controller.t_high"),
        margin=_rational(ctl_raw.get("margin", "2/100"), "controller.margin"),
        decay_step=_rational(ctl_raw.get("decay_step", "1/100"), "controller.decay_step"),
    )

    cp_raw = raw.get("chain_params", {})
    _check_keys(cp_raw, _SECTION_KEYS["chain_params"], "[chain_params]")

    agents = None
    if "agents" in raw:
        if not isinstance(raw["agents"], list):
            raise ConfigurationError("[[agents]] must be an array of tables")
        agents = []
        for i, a in enumerate(raw["agents"]):
            where = f"agents[{i}]"
            _check_keys(a, _SECTION_KEYS["agent"], where)
            agents.append(MinerAgent(
                miner_id=str(a.get("id", f"miner-{i}")),
                seed=_int(a, "seed", i + 1, where, 0),
                budget=_int(a, "budget", 4, where, 1),
                inflate_claim=_int(a, "inflate_claim", 0, where, 0),
            ))

    return RunConfig(
        dataset=dataset,
        difficulty=difficulty,
        controller=controller,
        agents=agents,
        rounds=_int(raw, "rounds", 3, "config", 1),
        threads=_int(raw, "threads", 1, "config", 1),
        clock=raw.get("clock", "logical"),
        work_rate=_int(raw, "work_rate", 1_000_000_000, "config", 1),
        tx_seed=_int(raw, "tx_seed", 0, "config", 0),
        txs_per_round=_int(raw, "txs_per_round", 4, "config", 0),
        max_repeats=_int(raw, "max_repeats", 100, "config", 0),
        max_block_txs=_int(cp_raw, "max_block_txs", 16, "chain_params", 1),
        reward=_int(cp_raw, "reward", 50, "chain_params", 1),
        genesis_timestamp=_int(cp_raw, "genesis_timestamp", 1_700_000_000_000, "chain_params", 0),
        chain_path=_path(raw.get("chain", "chain.jsonl"), base, "chain"),
        log_path=_path(raw.get("log", "rounds.tsv"), base, "log"),
    )


def load_config(path):
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return config_from_dict(raw, path.parent)
