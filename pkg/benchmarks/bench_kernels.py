"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeats 5] [--hidden 90] [--length 30] [--batch 64]

Each case is run forward and backward; the median wall time over the
repeats is reported per backend, with the speed-up of the compiled core.
"""

import argparse
import statistics
import time

import numpy as np

from psjnet import numkernel as nk
from psjnet.data import make_synthetic_benchmark
from psjnet.model.sequence import Vocabulary, encode
from psjnet.trainer import OptimizerState, TrainConfig, init_params, train_step


def gru_case(T, B, d):
    rng = np.random.default_rng(0)
    vals = {"x": rng.normal(size=(T, B, d)), **{k: 0.1 * rng.normal(size=(d, 2 * d)) for k in ("W_z", "W_r", "W_h")}}

    def run():
        tape = nk.Tape()
        P = {k: tape.param(k, v) for k, v in vals.items()}
        H = nk.gru_sequence(P["x"], None, P["W_z"], P["W_r"], P["W_h"])
        nk.backward(tape, nk.sum(H))

    return run


def split_case(T, B, d, K, normalized):
    rng = np.random.default_rng(1)
    vals = {
        "bf": rng.normal(size=(T, B, d)),
        "bh": rng.normal(size=(T, B, d)),
        "rf": rng.normal(size=(K, d)),
        "rh": rng.normal(size=(K, d)),
        "uf": 0.1 * rng.normal(size=(d, d)),
        "uh": 0.1 * rng.normal(size=(d, d)),
    }

    def run():
        tape = nk.Tape()
        P = {k: tape.param(k, v) for k, v in vals.items()}
        out = nk.gated_split_scan(*(P[k] for k in ("bf", "bh", "rf", "rh", "uf", "uh")), normalized)
        nk.backward(tape, nk.sum(out))

    return run


def train_step_case(variant, d, batch):
    bench = make_synthetic_benchmark()
    voc = {dom: Vocabulary.from_sequences(dom, bench.train) for dom in "AB"}
    seqs = [encode(s, voc)[0] for s in bench.train][:batch]
    cfg = TrainConfig(variant=variant, hidden=d, batch=batch)
    params = init_params(cfg.model_config(), {dom: voc[dom].size for dom in "AB"}, 0)

    def run():
        # fresh copies so every repeat does the same work
        p = {k: v.copy() for k, v in params.items()}
        train_step(p, OptimizerState(), seqs, cfg, np.random.default_rng(0))

    return run


def median_seconds(fn, repeats):
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0], formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--repeats", type=int, default=5, help="timed runs per case")
    parser.add_argument("--hidden", type=int, default=90, help="hidden size")
    parser.add_argument("--length", type=int, default=30, help="sequence length")
    parser.add_argument("--batch", type=int, default=64, help="batch size")
    parser.add_argument("--k", type=int, default=4, help="number of roles")
    args = parser.parse_args(argv)

    T, B, d, K = args.length, args.batch, args.hidden, args.k
    cases = {
        "gru fwd+bwd": gru_case(T, B, d),
        "split scan fwd+bwd": split_case(T, B, d, K, False),
        "normalized split fwd+bwd": split_case(T, B, d, K, True),
        "psjnet1 train step": train_step_case("psjnet1", d, B),
        "psjnet2 train step": train_step_case("psjnet2", d, B),
    }
    backends = nk.available_backends()
    previous = nk.backend_name()
    print(f"T={T} B={B} d={d} K={K}, median of {args.repeats}")
    print(f"{'case':<26}" + "".join(f"{b:>12}" for b in backends) + ("     speed-up" if len(backends) > 1 else ""))
    try:
        for name, fn in cases.items():
            row = {}
            for b in backends:
                nk.use_backend(b)
                row[b] = median_seconds(fn, args.repeats)
            line = f"{name:<26}" + "".join(f"{row[b] * 1e3:>10.1f}ms" for b in backends)
            if "compiled" in row and "python" in row:
                line += f"{row['python'] / row['compiled']:>12.2f}x"
            print(line)
    finally:
        nk.use_backend(previous)


if __name__ == "__main__":
    main()
