"""HDCoin: a proof-of-useful-work chain whose miners train hyperdimensional classifiers.

Mining a block means searching 32-bit nonces: each nonce seeds the item
memory of a record-encoding HDC classifier, which is trained on a shared
dataset and scored on its test split. The best nonce and its exact accuracy
go into the block header, and every peer re-runs that nonce to verify it.
"""
from .blockchain import Block, BlockHeader, Chain, ChainParams, Mempool, Transaction, validate_chain
from .consensus import MinerAgent, run_round, run_simulation, verify_claim
from .dataset import Dataset, dataset_hash, load_csv, make_blobs, save_csv, split
from .difficulty import ControllerParams, Difficulty, next_difficulty
from .hdc import ExactAccuracy
from .miner import (
    MiningResult, MiningTask, RandomNonces, Sequential, TaskData, mine, nonce_time_table,
    nonce_trial,
)

__version__ = "0.1.0"

__all__ = [
    "Block", "BlockHeader", "Chain", "ChainParams", "ControllerParams", "Dataset", "Difficulty",
    "ExactAccuracy", "Mempool", "MinerAgent", "MiningResult", "MiningTask", "RandomNonces",
    "Sequential", "TaskData", "Transaction", "dataset_hash", "load_csv", "make_blobs", "mine",
    "next_difficulty", "nonce_time_table", "nonce_trial", "run_round", "run_simulation", "save_csv", "split",
    "validate_chain", "verify_claim",
]
