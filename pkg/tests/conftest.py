import numpy as np
import pytest

from hdcoin.dataset import Dataset, split
from hdcoin.miner import TaskData

from oracles import splitmix64


def uniform_blobs(seed, classes, features, per_class, separation, name="uniform"):
    """Blobs from splitmix64 uniforms, so pinned values never depend on numpy's RNG."""
    stream = splitmix64(seed)

    def u():
        return next(stream) / 2**64 * 2 - 1

    centers = [[u() * separation for _ in range(features)] for _ in range(classes)]
    rows, labels = [], []
    for i in range(classes * per_class):
        c = i % classes
        rows.append([centers[c][j] + u() for j in range(features)])
        labels.append(c)
    return Dataset(name, np.array(rows), np.array(labels), classes)


@pytest.fixture(scope="session")
def hard_split():
    """Overlapping 3-class instance: accuracy depends visibly on the nonce."""
    return split(uniform_blobs(11, 3, 6, 20, 0.8, "hard"), "1/2", 5)


@pytest.fixture(scope="session")
def hard_data(hard_split):
    return TaskData(*hard_split)


@pytest.fixture(scope="session")
def easy_split():
    return split(uniform_blobs(3, 4, 8, 25, 4.0, "easy"), "3/5", 1)


@pytest.fixture(scope="session")
def easy_data(easy_split):
    return TaskData(*easy_split)


SMALL_LADDER = (1000, 2000, 3000)


def small_params(data, ladder=SMALL_LADDER, **controller):
    from hdcoin.blockchain import ChainParams
    from hdcoin.difficulty import ControllerParams, Difficulty

    return ChainParams(data.task_hash, ControllerParams(Difficulty(ladder[0]), ladder, **controller),
                       max_block_txs=8)


def build_chain(data, rounds, agents=None, **kw):
    """Mine ``rounds`` blocks on ``data`` with cheap dimensions and two honest agents."""
    from hdcoin.consensus import MinerAgent, new_chain, run_simulation

    agents = agents or [MinerAgent("alice", 1, budget=3), MinerAgent("bob", 2, budget=3)]
    chain = new_chain(small_params(data), data)
    log = run_simulation(agents, rounds, chain, data, **kw)
    return chain, log


@pytest.fixture(scope="session")
def hard_chain(hard_data):
    return build_chain(hard_data, 4)[0]


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
