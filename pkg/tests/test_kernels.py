"""Compiled and pure-Python kernels agree; fused scans agree with the unrolled graph."""

import numpy as np
import pytest

from psjnet import numkernel as nk
from psjnet.model import network
from psjnet.model.params import ModelConfig
from psjnet.model.sequence import MixedSequence, make_batch

from conftest import jittered_params, random_events

BACKENDS = nk.available_backends()
needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")


@pytest.fixture
def backend():
    prev = nk.backend_name()
    yield nk.use_backend
    nk.use_backend(prev)


def _gru_grads(rng_seed, T=6, B=3, n=4, d=5):
    rng = np.random.default_rng(rng_seed)
    vals = {
        "x": rng.normal(size=(T, B, n)),
        "h0": rng.normal(size=(B, d)),
        "W_z": rng.normal(size=(d, n + d)),
        "W_r": rng.normal(size=(d, n + d)),
        "W_h": rng.normal(size=(d, n + d)),
    }
    probe = rng.normal(size=(T, B, d))
    tape = nk.Tape()
    P = {k: tape.param(k, v) for k, v in vals.items()}
    H = nk.gru_sequence(P["x"], P["h0"], P["W_z"], P["W_r"], P["W_h"])
    loss = nk.sum(H * probe)
    return H.data, nk.backward(tape, loss)


def _scan_grads(rng_seed, normalized, L=7, B=2, K=3, d=4):
    rng = np.random.default_rng(rng_seed)
    vals = {
        "bf": rng.normal(size=(L, B, d)),
        "bh": rng.normal(size=(L, B, d)),
        "rf": rng.normal(size=(K, d)),
        "rh": rng.normal(size=(K, d)),
        "uf": rng.normal(size=(d, d)) * 0.5,
        "uh": rng.normal(size=(d, d)) * 0.5,
    }
    out_shape = (K, L, B, d) if normalized else (L, B, d)
    probe = rng.normal(size=out_shape)
    tape = nk.Tape()
    P = {k: tape.param(k, v) for k, v in vals.items()}
    out = nk.gated_split_scan(*(P[k] for k in ("bf", "bh", "rf", "rh", "uf", "uh")), normalized)
    return out.data, nk.backward(tape, nk.sum(out * probe)), vals


def test_python_backend_always_available():
    assert "python" in BACKENDS


def test_use_backend_rejects_unknown(backend):
    with pytest.raises(ValueError):
        backend("cuda")


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_gru_backends_agree(backend, seed):
    backend("python")
    H_py, g_py = _gru_grads(seed)
    backend("compiled")
    H_c, g_c = _gru_grads(seed)
    np.testing.assert_allclose(H_c, H_py, rtol=0, atol=1e-13)
    for k in g_py:
        np.testing.assert_allclose(g_c[k], g_py[k], rtol=0, atol=1e-12, err_msg=k)


@needs_compiled
@pytest.mark.parametrize("normalized", [False, True])
@pytest.mark.parametrize("seed", range(3))
def test_split_scan_backends_agree(backend, normalized, seed):
    backend("python")
    o_py, g_py, _ = _scan_grads(seed, normalized)
    backend("compiled")
    o_c, g_c, _ = _scan_grads(seed, normalized)
    np.testing.assert_allclose(o_c, o_py, rtol=0, atol=1e-13)
    for k in g_py:
        np.testing.assert_allclose(g_c[k], g_py[k], rtol=0, atol=1e-12, err_msg=k)


@pytest.mark.parametrize("name", BACKENDS)
@pytest.mark.parametrize("normalized", [False, True])
def test_split_scan_gradients(backend, name, normalized):
    backend(name)
    _, _, vals = _scan_grads(9, normalized, L=4, B=2, K=2, d=3)
    probe = np.random.default_rng(99).normal(size=(2, 4, 2, 3) if normalized else (4, 2, 3))

    def f(p, record=True):
        tape = nk.Tape(record=record)
        P = {k: tape.param(k, v) for k, v in p.items()}
        out = nk.gated_split_scan(*(P[k] for k in ("bf", "bh", "rf", "rh", "uf", "uh")), normalized)
        return nk.sum(out * probe)

    assert nk.grad_check(f, vals, eps=1e-5).max_rel_err < 1e-7


@pytest.mark.parametrize("name", BACKENDS)
def test_gru_gradients(backend, name):
    backend(name)
    rng = np.random.default_rng(5)
    vals = {"x": rng.normal(size=(4, 2, 3)), "W_z": rng.normal(size=(3, 6)), "W_r": rng.normal(size=(3, 6)), "W_h": rng.normal(size=(3, 6))}
    probe = rng.normal(size=(4, 2, 3))

    def f(p, record=True):
        tape = nk.Tape(record=record)
        P = {k: tape.param(k, v) for k, v in p.items()}
        return nk.sum(nk.gru_sequence(P["x"], None, P["W_z"], P["W_r"], P["W_h"]) * probe)

    assert nk.grad_check(f, vals, eps=1e-5).max_rel_err < 1e-7


def test_scan_matches_unrolled_steps():
    rng = np.random.default_rng(1)
    L, B, K, d = 5, 2, 3, 4
    tape = nk.Tape(record=False)
    p = {k: tape.const(rng.normal(size=(d, d)) * 0.5) for k in ("U_f", "U_h")}
    bf, bh = tape.const(rng.normal(size=(L, B, d))), tape.const(rng.normal(size=(L, B, d)))
    rf, rh = tape.const(rng.normal(size=(K, 1, d))), tape.const(rng.normal(size=(K, 1, d)))
    fused1 = nk.gated_split_scan(bf, bh, nk.reshape(rf, (K, d)), nk.reshape(rh, (K, d)), p["U_f"], p["U_h"], False).data
    prev = tape.const(np.zeros((B, d)))
    for t in range(L):
        prev, _, _ = network.split_by_join_step(p, bf[t], bh[t], rf, rh, prev)
        np.testing.assert_allclose(fused1[t], prev.data, rtol=0, atol=1e-14)
    fused2 = nk.gated_split_scan(bf, bh, nk.reshape(rf, (K, d)), nk.reshape(rh, (K, d)), p["U_f"], p["U_h"], True).data
    prev = tape.const(np.zeros((K, B, d)))
    for t in range(L):
        prev, _, _ = network.split_step(p, bf[t], bh[t], rf, rh, prev)
        np.testing.assert_allclose(fused2[:, t], prev.data, rtol=0, atol=1e-14)


@pytest.mark.parametrize("variant", ["psjnet1", "psjnet2"])
def test_fused_and_unrolled_model_agree(monkeypatch, variant):
    rng = np.random.default_rng(2)
    cfg = ModelConfig(variant=variant, k=3, hidden=6)
    params = jittered_params(cfg, {"A": 9, "B": 9}, 4)
    batch = make_batch([MixedSequence(random_events(rng, n)) for n in (9, 14, 5)], "train")

    def run():
        loss, _ = network.batch_loss(params, batch, cfg)
        return float(loss.data), nk.backward(loss.tape, loss)

    l_fused, g_fused = run()
    monkeypatch.setattr(network, "FUSED_SPLIT", False)
    l_loop, g_loop = run()
    assert l_fused == pytest.approx(l_loop, rel=1e-13)
    for k in g_loop:
        np.testing.assert_allclose(g_fused[k], g_loop[k], rtol=1e-9, atol=1e-13, err_msg=k)
