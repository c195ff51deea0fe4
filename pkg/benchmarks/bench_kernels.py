"""Compare the compiled and numpy backends on full nonce trials.

    python benchmarks/bench_kernels.py [--dims 3000,5000,7000,10000,15000] [--samples 5]

Each row reports the median seconds per trial for both backends, checks that
they produced the same accuracy, and prints the speedup.
"""
import argparse
import statistics
import time

from hdcoin import kernels
from hdcoin.dataset import make_blobs, split
from hdcoin.difficulty import DEFAULT_LADDER, Difficulty
from hdcoin.miner import TaskData


def time_trials(data, difficulty, nonces):
    times, accs = [], []
    for nonce in nonces:
        t0 = time.perf_counter()
        accs.append(data.trial(nonce, difficulty))
        times.append(time.perf_counter() - t0)
    return statistics.median(times), accs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", default=",".join(map(str, DEFAULT_LADDER)))
    parser.add_argument("--samples", type=int, default=5)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--features", type=int, default=20)
    parser.add_argument("--per-class", type=int, default=200)
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    train, test = split(make_blobs(args.classes, args.features, args.per_class, 1.0, 5), 0.7, 1)
    data = TaskData(train, test)
    nonces = range(args.samples)

    print(f"train {train.n_samples} x {train.n_features}, test {test.n_samples}, "
          f"{args.samples} trials per cell")
    print(f"{'dimension':>9}  " + "  ".join(f"{b:>10}" for b in backends) + "   speedup  same")
    for dim in (int(d) for d in args.dims.split(",")):
        difficulty = Difficulty(dim)
        data.levels(difficulty.num_levels)
        medians, results = {}, {}
        for backend in backends:
            with kernels.use_backend(backend):
                medians[backend], results[backend] = time_trials(data, difficulty, nonces)
        same = len({tuple(r) for r in results.values()}) == 1
        speedup = (medians["python"] / medians["compiled"]) if "compiled" in medians else 1.0
        print(f"{dim:>9}  " + "  ".join(f"{medians[b]:>9.3f}s" for b in backends)
              + f"  {speedup:>7.2f}x  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
