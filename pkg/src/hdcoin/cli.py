"""``hdcoin`` command line.

Exit codes: 0 success, 2 configuration/input error, 3 chain validation
failure, 4 claim rejected by verification, 5 simulation round stalled.
"""
import argparse
import collections
import csv
import sys
from pathlib import Path

from . import kernels
from .blockchain import append_block_to_file, block_to_line, Chain, validate_chain
from .config import DatasetSpec, load_config, RunConfig, SyntheticSpec
from .consensus import read_round_log, RoundStalled, run_simulation, verify_claim, write_round_log
from .dataset import dataset_hash, load_csv, save_csv, split
from .difficulty import Difficulty, parse_fraction
from .errors import ChainFormatError, ConfigurationError, DatasetError
from .hdc import ExactAccuracy
from .miner import mine_data, MiningResult, MiningTask, nonce_time_table, RandomNonces, Sequential

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVALID_CHAIN = 3
EXIT_REJECTED = 4
EXIT_STALLED = 5


def _csv_ints(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _fraction(text):
    try:
        return parse_fraction(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_data_options(p):
    g = p.add_argument_group("data (overrides the config's [dataset])")
    g.add_argument("--csv", type=Path, help="single CSV, split with --split-fraction/--split-seed")
    g.add_argument("--train", type=Path, help="pre-split training CSV (needs --test)")
    g.add_argument("--test", type=Path, help="pre-split test CSV")
    g.add_argument("--header", action="store_true", help="CSV files start with a header row")
    g.add_argument("--split-fraction", type=_fraction, default=None)
    g.add_argument("--split-seed", type=int, default=None)
    g.add_argument("--synthetic", action="store_true", help="use generated Gaussian blobs")
    _add_synthetic_options(g)


def _add_synthetic_options(g):
    g.add_argument("--classes", type=int, default=None)
    g.add_argument("--features", type=int, default=None)
    g.add_argument("--samples-per-class", type=int, default=None)
    g.add_argument("--separation", type=float, default=None)
    g.add_argument("--seed", type=int, default=None, help="synthetic generator seed")


def _synthetic_from_args(args, base=None):
    spec = base or SyntheticSpec()
    for attr, arg in (("classes", "classes"), ("features", "features"),
                      ("samples_per_class", "samples_per_class"),
                      ("separation", "separation"), ("seed", "seed")):
        value = getattr(args, arg, None)
        if value is not None:
            setattr(spec, attr, value)
    return spec


def _config(args):
    return load_config(args.config) if getattr(args, "config", None) else RunConfig()


def _dataset_spec(args, config):
    spec = config.dataset
    fraction = args.split_fraction if args.split_fraction is not None else spec.split_fraction
    seed = args.split_seed if args.split_seed is not None else spec.split_seed
    header = args.header or spec.header
    if args.csv is not None:
        return DatasetSpec(csv=args.csv, header=header, split_fraction=fraction, split_seed=seed)
    if args.train is not None or args.test is not None:
        return DatasetSpec(train=args.train, test=args.test, header=header)
    synthetic_flags = any(getattr(args, a) is not None for a in
                          ("classes", "features", "samples_per_class", "separation", "seed"))
    if args.synthetic or synthetic_flags:
        return DatasetSpec(synthetic=_synthetic_from_args(args, spec.synthetic),
                           split_fraction=fraction, split_seed=seed)
    return DatasetSpec(csv=spec.csv, train=spec.train, test=spec.test, synthetic=spec.synthetic,
                       header=header, name=spec.name, split_fraction=fraction, split_seed=seed)


def _difficulty(args, config):
    base = config.difficulty
    return Difficulty(
        args.dimension if args.dimension is not None else base.dimension,
        args.threshold if args.threshold is not None else base.accuracy_threshold,
        args.levels if args.levels is not None else base.num_levels,
    )


def _add_model_options(p):
    p.add_argument("--dimension", type=int, default=None, help="hypervector dimension")
    p.add_argument("--levels", type=int, default=None, help="quantization levels")
    p.add_argument("--threshold", type=_fraction, default=None, help="accuracy threshold, e.g. 85/100")


# -- dataset ---------------------------------------------------------------

def cmd_dataset_hash(args):
    ds = load_csv(args.file, args.header, args.name)
    print(dataset_hash(ds).hex())
    return EXIT_OK


def cmd_dataset_split(args):
    ds = load_csv(args.file, args.header, args.name)
    train, test = split(ds, args.fraction, args.seed)
    save_csv(train, args.train_out)
    save_csv(test, args.test_out)
    for label, part in (("train", train), ("test", test)):
        counts = " ".join(str(c) for c in part.class_counts())
        print(f"{label}: {part.n_samples} samples, per class [{counts}], "
              f"hash {dataset_hash(part).hex()}")
    return EXIT_OK


def cmd_dataset_gen(args):
    spec = _synthetic_from_args(args)
    ds = spec.generate(args.out.stem)
    save_csv(ds, args.out)
    print(f"wrote {ds.n_samples} samples x {ds.n_features} features, {ds.num_classes} classes "
          f"to {args.out}")
    return EXIT_OK


# -- mining and verification ------------------------------------------------

def cmd_mine(args):
    config = _config(args)
    data = _dataset_spec(args, config).task_data()
    difficulty = _difficulty(args, config)
    strategy = RandomNonces(args.random_seed) if args.random_seed is not None else Sequential(args.start)
    task = MiningTask(data.task_hash, difficulty, args.budget, strategy)
    result = mine_data(task, data, threads=args.threads or config.threads,
                       stop_at_threshold=args.stop_at_threshold, time_limit=args.time_limit)
    print(f"task        {data.task_hash.hex()}")
    print(f"difficulty  d={difficulty.dimension} levels={difficulty.num_levels} "
          f"threshold={difficulty.accuracy_threshold}")
    print(f"nonce       {result.nonce}")
    print(f"accuracy    {result.accuracy}")
    print(f"meets       {'yes' if result.accuracy.meets(difficulty.accuracy_threshold) else 'no'}")
    print(f"trials      {result.trials_used} (best found at trial {result.found_at})")
    print(f"nonce_time  median {result.nonce_time:.4f}s [timing, not consensus]")
    return EXIT_OK


def cmd_verify(args):
    config = _config(args)
    data = _dataset_spec(args, config).task_data()
    difficulty = _difficulty(args, config)
    claim = MiningResult(args.nonce, args.claim, 0.0, 1, 1)
    verdict = verify_claim(claim, difficulty, data)
    if verdict:
        print(f"accept: nonce {args.nonce} reproduces {args.claim}")
        return EXIT_OK
    actual = data.trial(args.nonce, difficulty)
    print(f"reject: {verdict.reason} (claimed {args.claim}, recomputed {actual})")
    return EXIT_REJECTED


# -- chain -------------------------------------------------------------------

def cmd_simulate(args):
    config = _config(args)
    if args.rounds is not None:
        config.rounds = args.rounds
    if args.threads is not None:
        config.threads = args.threads
    chain_path = args.chain or config.chain_path
    log_path = args.log or config.log_path
    data = config.dataset.task_data()
    params = config.chain_params(data)
    chain = Chain.create(params, data.baseline)
    chain_path.write_text(block_to_line(chain.tip) + "\n")

    def on_round(outcome, record):
        append_block_to_file(chain_path, outcome.sealed_block)
        print(f"block {record.height:>3}  winner {record.winner:<10} nonce {record.nonce:>10}  "
              f"acc {record.accuracy}  d={record.dimension}  threshold {record.threshold}  "
              f"attempts {record.attempts}")

    log = run_simulation(
        config.agents, config.rounds, chain, data,
        tx_seed=config.tx_seed, txs_per_round=config.txs_per_round, clock=config.make_clock(),
        threads=config.threads, max_repeats=config.max_repeats, on_round=on_round,
    )
    write_round_log(log, log_path)
    reloaded = Chain.load(chain_path, params)
    violation = validate_chain(reloaded, data)
    if violation is not None:
        print(f"sealed chain failed validation at {violation}", file=sys.stderr)
        return EXIT_INVALID_CHAIN
    print(f"chain valid: {len(reloaded.blocks)} blocks -> {chain_path}; round log -> {log_path}")
    return EXIT_OK


def cmd_verify_chain(args):
    config = _config(args)
    data = config.dataset.task_data()
    try:
        chain = Chain.load(args.chain or config.chain_path, config.chain_params(data))
    except ChainFormatError as exc:
        print(f"invalid chain file: {exc}", file=sys.stderr)
        return EXIT_INVALID_CHAIN
    violation = validate_chain(chain, data)
    if violation is not None:
        print(f"invalid at {violation}", file=sys.stderr)
        return EXIT_INVALID_CHAIN
    print(f"ok: {len(chain.blocks)} blocks, tip {chain.tip.block_hash.hex()}")
    return EXIT_OK


def cmd_report(args):
    rows = read_round_log(args.log)
    if not rows:
        print("empty log")
        return EXIT_OK
    wins = collections.Counter(r["winner"] for r in rows)
    print(f"{'round':>5} {'winner':<12} {'accuracy':>12} {'dim':>6} {'threshold':>10} {'attempts':>8}")
    for r in rows:
        print(f"{r['round']:>5} {r['winner']:<12} {r['accuracy']:>12} {r['dimension']:>6} "
              f"{r['threshold']:>10} {r['attempts']:>8}")
    print("wins: " + ", ".join(f"{m}={n}" for m, n in sorted(wins.items())))
    return EXIT_OK


# -- benchmark -----------------------------------------------------------------

def best_accuracy_curve(result, counts):
    curve = result.best_curve()
    return [(n, curve[min(n, len(curve)) - 1]) for n in counts]


def cmd_benchmark(args):
    config = _config(args)
    data = _dataset_spec(args, config).task_data()
    base = _difficulty(args, config)
    backends = kernels.available_backends() if args.backend == "both" else [args.backend]
    print(f"dataset: {data.train.n_samples} train / {data.test.n_samples} test samples, "
          f"{data.train.n_features} features, {data.train.num_classes} classes")

    ladder = [Difficulty(dim, 0, base.num_levels) for dim in args.dims]
    columns = []
    for backend in backends:
        with kernels.use_backend(backend):
            columns.append(nonce_time_table(data, ladder, args.samples, args.start))
    time_rows = [[dim] + [column[i] for column in columns] for i, dim in enumerate(args.dims)]
    names = [kernels.active_backend() if b == "auto" else b for b in backends]
    print("\nnonce time (median wall-clock seconds per trial) [timing, not consensus]")
    print(f"{'dimension':>10} " + " ".join(f"{n:>12}" for n in names))
    for row in time_rows:
        print(f"{row[0]:>10} " + " ".join(f"{t:>12.4f}" for t in row[1:]))
    increasing = all(a[1] < b[1] for a, b in zip(time_rows, time_rows[1:]))
    print(f"strictly increasing in dimension: {'yes' if increasing else 'NO'}")

    curve_dim = args.curve_dimension or base.dimension
    task = MiningTask(data.task_hash, Difficulty(curve_dim, 0, base.num_levels), max(args.counts),
                      Sequential(args.start))
    result = mine_data(task, data, threads=args.threads or 1)
    curve = best_accuracy_curve(result, args.counts)
    print(f"\nmax accuracy vs number of nonces (d={curve_dim})")
    print(f"{'nonces':>7} {'best accuracy':>22}")
    for n, acc in curve:
        print(f"{n:>7} {str(acc):>22}")
    monotone = all(a[1].fraction <= b[1].fraction for a, b in zip(curve, curve[1:]))
    print(f"non-decreasing: {'yes' if monotone else 'NO'}")

    if args.csv_prefix:
        prefix = str(args.csv_prefix)
        with open(prefix + "_nonce_time.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dimension"] + [f"nonce_time_s_{n}" for n in names])
            for row in time_rows:
                w.writerow([row[0]] + [f"{t:.6f}" for t in row[1:]])
        with open(prefix + "_accuracy_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["nonces", "correct", "total", "accuracy"])
            for n, acc in curve:
                w.writerow([n, acc.correct, acc.total, f"{float(acc.fraction):.6f}"])
        print(f"\nCSV written to {prefix}_nonce_time.csv and {prefix}_accuracy_curve.csv")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="hdcoin", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="dataset tools").add_subparsers(dest="action", required=True)
    p = ds.add_parser("hash", help="print the canonical SHA-256 of a CSV dataset")
    p.add_argument("file", type=Path)
    p.add_argument("--header", action="store_true")
    p.add_argument("--name", help="dataset name used in the hash (default: file stem)")
    p.set_defaults(func=cmd_dataset_hash)

    p = ds.add_parser("split", help="stratified deterministic train/test split")
    p.add_argument("file", type=Path)
    p.add_argument("--fraction", type=_fraction, default="7/10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", type=Path, required=True)
    p.add_argument("--test-out", type=Path, required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--name")
    p.set_defaults(func=cmd_dataset_split)

    p = ds.add_parser("gen-synthetic", help="write a seeded Gaussian-blob CSV")
    _add_synthetic_options(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("mine", help="single-miner nonce search")
    p.add_argument("--config", type=Path)
    _add_data_options(p)
    _add_model_options(p)
    p.add_argument("--budget", type=int, default=8)
    p.add_argument("--start", type=int, default=0, help="first nonce of a sequential scan")
    p.add_argument("--random-seed", type=int, default=None, help="draw nonces from this seed instead")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--stop-at-threshold", action="store_true")
    p.add_argument("--time-limit", type=float, default=None, help="seconds; non-deterministic")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("verify", help="recompute a nonce and check a claimed accuracy")
    p.add_argument("--config", type=Path)
    _add_data_options(p)
    _add_model_options(p)
    p.add_argument("--nonce", type=int, required=True)
    p.add_argument("--claim", type=ExactAccuracy.parse, required=True, help="correct/total")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run a multi-miner simulation and write the chain")
    p.add_argument("--config", type=Path)
    p.add_argument("--rounds", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--chain", type=Path)
    p.add_argument("--log", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-chain", help="re-validate a chain file from genesis")
    p.add_argument("--config", type=Path)
    p.add_argument("--chain", type=Path)
    p.set_defaults(func=cmd_verify_chain)

    p = sub.add_parser("report", help="summarize a round log")
    p.add_argument("log", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("benchmark", help="nonce time vs dimension and accuracy vs nonce count")
    p.add_argument("--config", type=Path)
    _add_data_options(p)
    _add_model_options(p)
    p.add_argument("--dims", type=_csv_ints, default=[3000, 5000, 7000, 10000, 15000])
    p.add_argument("--samples", type=int, default=3, help="timing rounds; each round times every dimension once")
    p.add_argument("--counts", type=_csv_ints, default=[1, 2, 4, 8, 16])
    p.add_argument("--curve-dimension", type=int, default=None)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--backend", choices=["auto", "compiled", "python", "both"], default="auto")
    p.add_argument("--csv-prefix", type=Path, default=None)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChainFormatError as exc:
        print(f"invalid chain file: {exc}", file=sys.stderr)
        return EXIT_INVALID_CHAIN
    except RoundStalled as exc:
        print(f"stalled: {exc}", file=sys.stderr)
        return EXIT_STALLED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
