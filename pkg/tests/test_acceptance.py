"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings

from psjnet import evaluation as ev
from psjnet import numkernel as nk
from psjnet import trainer as tr
from psjnet.data import (
    format_sequence,
    generate_raw_users,
    make_synthetic_benchmark,
    parse_sequence_line,
    simulate_shared_accounts,
    split_dataset,
    write_sequences,
)
from psjnet.model import checkpoint as ck
from psjnet.model import network as net
from psjnet.model.params import ModelConfig
from psjnet.model.sequence import MixedSequence, Vocabulary, encode, make_batch

from conftest import jittered_params, random_events
from test_checkpoint import checkpoints
from test_data import sequences

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def benchmark():
    bench = make_synthetic_benchmark()
    voc = {d: Vocabulary.from_sequences(d, bench.train) for d in "AB"}
    train = [encode(s, voc)[0] for s in bench.train]
    sizes = {d: voc[d].size for d in "AB"}
    return bench, voc, train, sizes


def test_1_gradient_correctness(acceptance, toy_seq):
    t0 = time.perf_counter()
    errors = {}
    for variant in ("psjnet1", "psjnet2"):
        cfg = ModelConfig(variant=variant, k=2, hidden=8)
        params = jittered_params(cfg, {"A": 20, "B": 15}, 0, scale=0.1)
        batch = make_batch([toy_seq], "train")

        def f(p, record=True):
            return net.batch_loss(p, batch, cfg, record=record)[0]

        errors[variant] = nk.grad_check(f, params, eps=1e-4).max_rel_err
    seconds = time.perf_counter() - t0
    ok = max(errors.values()) < 1e-3 and seconds < 60
    detail = ", ".join(f"{k} max rel err {v:.2e}" for k, v in errors.items()) + f", {seconds:.1f}s"
    assert acceptance(1, "full joint-loss gradient check", ok, detail)


def test_2_gate_normalization(acceptance):
    worst = 0.0
    d = 8
    for K in range(1, 6):
        for draw in range(100):
            rng = np.random.default_rng([K, draw])
            p = {
                "role_emb": rng.normal(size=(K, d)),
                "W_fA": rng.normal(size=(d, d)),
                "W_fB": rng.normal(size=(d, d)),
                "U_f": rng.normal(size=(d, d)),
                "V_f": rng.normal(size=(d, d)),
                "b_f": rng.normal(size=d),
                "W_h": rng.normal(size=(d, d)),
                "U_h": rng.normal(size=(d, d)),
                "V_h": rng.normal(size=(d, d)),
                "b_h": rng.normal(size=d),
            }
            _, gates, none_gate = net.psj2_split_step(p, rng.normal(size=d), rng.normal(size=d), rng.normal(size=(K, d)))
            worst = max(worst, float(np.max(np.abs(gates.sum(axis=0) + none_gate - 1.0))))
    assert acceptance(2, "K+1 normalized gates sum to one", worst <= 1e-12, f"worst deviation {worst:.1e}")


def test_3_causality(acceptance):
    checks = failures = 0
    for variant in ("psjnet1", "psjnet2"):
        rng = np.random.default_rng(3)
        cfg = ModelConfig(variant=variant, k=3, hidden=16)
        params = jittered_params(cfg, {"A": 12, "B": 12}, 9)
        for _ in range(50):
            ev_ = list(random_events(rng, int(rng.integers(4, 25)), 12, 12))
            base = net.target_probabilities(params, MixedSequence(tuple(ev_)), cfg)
            for t in range(len(ev_) - 1):
                tail = list(random_events(rng, len(ev_) - t - 1, 12, 12))
                new = net.target_probabilities(params, MixedSequence(tuple(ev_[: t + 1] + tail)), cfg)
                for dom in "AB":
                    got = dict(new[dom])
                    for pos, prob in base[dom]:
                        if pos <= t:
                            checks += 1
                            failures += got[pos] != prob
    assert acceptance(3, "future events leave earlier target probabilities bit-identical", failures == 0, f"{failures}/{checks} differ")


def test_4_metric_oracle(acceptance):
    rng = np.random.default_rng(4)
    S = rng.normal(size=(1000, 500))
    truths = rng.integers(500, size=1000)
    oracle = np.array([int(np.flatnonzero(np.lexsort((np.arange(500), -s)) == t)[0]) + 1 for s, t in zip(S, truths)])
    got = ev.ranks(S, truths)
    ok = np.array_equal(got, oracle)
    prev_hit = prev_rr = np.zeros(1000)
    for k in (5, 10, 20):
        hit = np.array([ev.recall_at_k(s, t, k) for s, t in zip(S, truths)], dtype=float)
        rr = np.array([ev.mrr_at_k(s, t, k) for s, t in zip(S, truths)])
        ok &= np.array_equal(hit, (oracle <= k).astype(float))
        ok &= np.array_equal(rr, np.where(oracle <= k, 1.0 / oracle, 0.0))
        ok &= bool(np.all(rr <= hit) and np.all(hit >= prev_hit) and np.all(rr >= prev_rr))
        prev_hit, prev_rr = hit, rr
    assert acceptance(4, "Recall@k and MRR@k match the full-sort oracle", bool(ok), "1000 vectors, V=500, k in 5/10/20")


def test_5_degeneracy(acceptance, toy_seq):
    rng = np.random.default_rng(5)
    d = 6
    p = {k: rng.normal(size=(d, d)) for k in ("W_fA", "W_fB", "U_f", "V_f", "W_h", "U_h", "V_h")}
    p.update(role_emb=rng.normal(size=(1, d)), b_f=rng.normal(size=d), b_h=rng.normal(size=d))
    out, per_role, _ = net.psj1_step(p, *rng.normal(size=(3, d)))
    k1 = np.array_equal(out, per_role[0])
    stage = {"v": rng.normal(size=d), "W_i": rng.normal(size=(d, d)), "W_j": rng.normal(size=(d, d))}
    lone = rng.normal(size=(1, d))
    n1 = np.array_equal(net._stage(stage["v"], stage["W_i"], stage["W_j"], lone, rng.normal(size=(3, d)))[0], lone[0])
    worst = 0.0
    for variant in ("psjnet1", "psjnet2"):
        cfg = ModelConfig(variant=variant, k=2, hidden=8)
        params = jittered_params(cfg, {"A": 20, "B": 15}, 1)
        for dom in "AB":
            params[f"dec.{dom}.W"][:] = 0.0
            params[f"dec.{dom}.b"][:] = 0.0
        loss = float(net.sequence_loss(toy_seq, params, cfg).data)
        worst = max(worst, abs(loss - (math.log(20) + math.log(15))))
    ok = k1 and n1 and worst <= 1e-9
    assert acceptance(5, "degenerate joins and uniform decoder", ok, f"K=1 exact {k1}, N=1 exact {n1}, loss error {worst:.1e}")


def test_6_overfit_sanity(acceptance, benchmark):
    _, voc, train, sizes = benchmark
    cases = ev.cases_from_encoded(train)
    rng_untrained = []
    for seed in range(3):
        rep = ev.evaluate_model(tr.init_params(ModelConfig(), sizes, seed), ModelConfig(), cases, (5,))
        rng_untrained.append(rep)
    untrained_ok = True
    untrained = {}
    for dom in "AB":
        hits = np.concatenate([r.hits(dom, 5) for r in rng_untrained])
        chance = 5 / sizes[dom]
        untrained[dom] = hits.mean()
        untrained_ok &= abs(hits.mean() - chance) <= 4 * math.sqrt(chance * (1 - chance) / hits.size)

    class Reached(Exception):
        pass

    reached = {}
    for variant in ("psjnet1", "psjnet2"):
        cfg = tr.TrainConfig(variant=variant, epochs=200, patience=0, seed=0)

        def check(epoch, params, loss):
            rep = ev.evaluate_model(params, cfg.model_config(), cases, (5,))
            if rep.recall("A", 5) >= 0.95 and rep.recall("B", 5) >= 0.95:
                reached[variant] = epoch
                raise Reached

        try:
            tr.train(train, [], cfg, sizes, on_epoch=check)
        except Reached:
            pass
    ok = untrained_ok and len(reached) == 2
    detail = (
        ", ".join(f"{v} reached at epoch {reached.get(v, '>200')}" for v in ("psjnet1", "psjnet2"))
        + f"; untrained Recall@5 A {untrained['A']:.3f} (5/V {5 / sizes['A']:.3f}), B {untrained['B']:.3f} (5/V {5 / sizes['B']:.3f})"
    )
    assert acceptance(6, "training Recall@5 >= 0.95 in both domains within 200 epochs", ok, detail)


def test_7_ablation_direction(acceptance, benchmark):
    bench, voc, train, sizes = benchmark
    valid = ev.prepare_cases(bench.valid, voc)
    test = ev.prepare_cases(bench.test, voc)
    hits = {}
    for ablate in (None, "psj"):
        runs = []
        for seed in range(5):
            cfg = tr.TrainConfig(ablate=ablate, epochs=60, patience=0, seed=seed)
            params, _ = tr.train(train, valid, cfg, sizes)
            rep = ev.evaluate_model(params, cfg.model_config(), test, (5,))
            runs.append({dom: rep.hits(dom, 5) for dom in "AB"})
        hits[ablate] = runs
    per_seed = {a: [np.mean([r[d].mean() for d in "AB"]) for r in runs] for a, runs in hits.items()}
    # per-case hit rates over the five seeds, both domains' cases stacked
    per_case = {a: np.concatenate([np.mean([r[d] for r in runs], axis=0) for d in "AB"]) for a, runs in hits.items()}
    full, ablated = float(np.mean(per_seed[None])), float(np.mean(per_seed["psj"]))
    res = ev.paired_t_test(per_case[None], per_case["psj"])
    by_domain = ", ".join(
        f"{d}: {np.mean([r[d].mean() for r in hits[None]]):.3f} vs {np.mean([r[d].mean() for r in hits['psj']]):.3f}" for d in "AB"
    )
    seed_p = ev.paired_t_test(per_seed[None], per_seed["psj"]).p
    ok = full > ablated and res.p < 0.05
    detail = f"mean Recall@5 {full:.3f} vs {ablated:.3f}; {by_domain}; per-case p={res.p:.3g} (n={res.n}), per-seed p={seed_p:.3g}"
    assert acceptance(7, "full PSJNet-II beats the -PSJ ablation on held-out Recall@5", ok, detail)


def test_8_simulator_invariants(acceptance, tmp_path):
    res = simulate_shared_accounts(generate_raw_users(200, seed=0))
    seqs_ok = all(4 <= len(s) <= 60 and s.n_a >= 5 and s.n_b >= 2 for s in res.sequences)
    groups_ok = all(2 <= len(g) <= 4 for g in res.accounts.values())
    n = len(res.sequences)
    parts = split_dataset(res.sequences, seed=0)
    split_ok = all(abs(len(p) - n * f) <= 1 for p, f in zip(parts, (0.75, 0.15, 0.10)))
    blobs = []
    for run in range(2):
        again = simulate_shared_accounts(generate_raw_users(200, seed=0))
        for name, part in zip(("train", "valid", "test"), split_dataset(again.sequences, seed=0)):
            write_sequences(tmp_path / f"{run}-{name}.txt", part)
        blobs.append(b"".join((tmp_path / f"{run}-{name}.txt").read_bytes() for name in ("train", "valid", "test")))
    same = blobs[0] == blobs[1]
    ok = seqs_ok and groups_ok and split_ok and same
    detail = f"{n} sequences, {len(res.accounts)} accounts, splits {[len(p) for p in parts]}, byte-identical {same}"
    assert acceptance(8, "simulator invariants, splits and reproducibility", ok, detail)


def test_9_optimizer_oracle(acceptance):
    cfg = tr.TrainConfig()
    params = {"theta": np.array(0.0)}
    tr.adam_step(params, {"theta": np.array(0.5)}, tr.OptimizerState(), cfg)
    first = float(params["theta"])
    ok = abs(first - (-0.001)) <= 1e-9

    worst = 0.0
    rng = np.random.default_rng(9)
    for _ in range(1000):
        theta, g1, g2 = rng.uniform(-1, 1), rng.uniform(-10, 10), rng.uniform(-10, 10)
        m = v = 0.0
        ref = theta
        for t, g in enumerate((g1, g2), 1):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref -= 0.001 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
        p, state = {"theta": np.array(theta)}, tr.OptimizerState()
        tr.adam_step(p, {"theta": np.array(g1)}, state, cfg)
        tr.adam_step(p, {"theta": np.array(g2)}, state, cfg)
        worst = max(worst, abs(float(p["theta"]) - ref))
    ok &= worst <= 1e-12

    clip_norm = 0.0
    for _ in range(1000):
        g = rng.standard_cauchy(size=50) * 10
        clip_norm = max(clip_norm, float(np.max(np.abs(tr.clip_gradients({"g": g})["g"]))))
    ok &= clip_norm <= 5
    detail = f"first step {first:.9f}, two-step error {worst:.1e}, max clipped |g| {clip_norm}"
    assert acceptance(9, "Adam matches the scalar oracle; clipping bounds gradients", ok, detail)


def test_10_determinism_and_round_trips(acceptance, benchmark):
    _, _, train, sizes = benchmark
    cfg = tr.TrainConfig(hidden=16, k=2, epochs=2, patience=0, seed=7)
    a, _ = tr.train(train, [], cfg, sizes)
    b, _ = tr.train(train, [], cfg, sizes)
    bitwise = all(a[k].tobytes() == b[k].tobytes() for k in a)

    counts = {"checkpoint": 0, "sequence": 0}

    @settings(max_examples=10_000, database=None)
    @given(checkpoints())
    def checkpoint_round_trip(ckpt):
        blob = ck.to_bytes(ckpt)
        assert ck.to_bytes(ck.from_bytes(blob)) == blob
        counts["checkpoint"] += 1

    @settings(max_examples=10_000, database=None)
    @given(sequences)
    def sequence_round_trip(seq):
        line = format_sequence(seq)
        assert parse_sequence_line(line) == seq and format_sequence(parse_sequence_line(line)) == line
        counts["sequence"] += 1

    failure = None
    try:
        checkpoint_round_trip()
        sequence_round_trip()
    except AssertionError as exc:
        failure = exc
    ok = bitwise and failure is None and min(counts.values()) >= 10_000
    detail = f"training bit-identical {bitwise}; fuzz cases {counts}"
    assert acceptance(10, "bit-reproducible training and byte-exact serializers", ok, detail)
