"""Forward pass of both variants over padded batches, plus single-sequence helpers.

Conventions: weight matrices are stored in column-vector orientation
(``W @ h``); batched code works with row vectors and multiplies by ``W.T``.
Time-major tensors are (T, B, d); role-major tensors are (K, ...).
"""

from __future__ import annotations

import numpy as np

from .. import numkernel as nk
from ..errors import ConfigError, EmptyLossError, JoinError, NormalizationError, ShapeError
from .params import DIRECTIONS, direction_name, transfer_prefix
from .sequence import DOMAINS, make_batch, other

NEG = -1e30


# --------------------------------------------------------------------------
# units


def gru_step(w_z, w_r, w_h, x, h):
    """One GRU update written with the elementary primitives.

    ``x`` (..., n) and ``h`` (..., d) are row vectors; weights are (d, n + d).
    """
    xh = nk.concat([x, h], axis=-1)
    z = nk.sigmoid(xh @ w_z.T)
    r = nk.sigmoid(xh @ w_r.T)
    h_tilde = nk.tanh(nk.concat([x, r * h], axis=-1) @ w_h.T)
    return (1.0 - z) * h + z * h_tilde


def _split_terms(p, h_src_seq, h_tgt_seq):
    """Precompute the recurrence-free parts of the gate and candidate."""
    base_f = h_src_seq @ p["W_fA"].T + h_tgt_seq @ p["W_fB"].T + p["b_f"]
    base_h = h_src_seq @ p["W_h"].T + p["b_h"]
    role_f = p["role_emb"] @ p["V_f"].T
    role_h = p["role_emb"] @ p["V_h"].T
    k = role_f.shape[0]
    d = role_f.shape[1]
    return base_f, base_h, nk.reshape(role_f, (k, 1, d)), nk.reshape(role_h, (k, 1, d))


def split_by_join_step(p, base_f, base_h, role_f, role_h, prev):
    """Role gates, candidates and the averaged output for one source position.

    ``base_*`` (B, d) are the recurrence-free terms for this position, ``prev``
    (B, d) the previous averaged output.  Returns ``(output, per_role, gates)``
    with ``per_role`` and ``gates`` shaped (K, B, d).
    """
    gates = nk.sigmoid(base_f + prev @ p["U_f"].T + role_f)
    cand = nk.tanh(base_h + prev @ p["U_h"].T + role_h)
    per_role = gates * cand + (1.0 - gates) * prev
    return nk.mean(per_role, axis=0), per_role, gates


def split_step(p, base_f, base_h, role_f, role_h, prev_roles):
    """Normalised role gates with the inheritance ("none") gate.

    ``prev_roles`` is (K, B, d).  The none gate sees the role-averaged
    previous output.  Returns ``(new_roles, role_gates, none_gate)`` after
    normalisation so that gates sum to one element-wise.
    """
    raw = nk.sigmoid(base_f + prev_roles @ p["U_f"].T + role_f)
    raw_none = nk.sigmoid(base_f + nk.mean(prev_roles, axis=0) @ p["U_f"].T)
    total = nk.sum(raw, axis=0) + raw_none
    if np.any(total.data == 0.0):
        raise NormalizationError("all gates vanish at some coordinate")
    gates = raw / total
    none_gate = raw_none / total
    cand = nk.tanh(base_h + prev_roles @ p["U_h"].T + role_h)
    return gates * cand + none_gate * prev_roles, gates, none_gate


def _group(P, prefix):
    n = len(prefix) + 1
    return {k[n:]: v for k, v in P.items() if k.startswith(prefix + ".")}


def _gru_weights(P, prefix):
    return P[f"{prefix}.W_z"], P[f"{prefix}.W_r"], P[f"{prefix}.W_h"]


def _zero_prepend(tape, seq):
    # (T, B, d) -> (T + 1, B, d); row c is the state after c events
    _, B, d = seq.shape
    return nk.concat([tape.zeros((1, B, d)), seq], axis=0)


def _cutoff_mask(counts, width, allow_empty):
    # additive mask (..., width): 0 where index < count, NEG elsewhere
    idx = np.arange(width)
    keep = idx < counts[..., None]
    if allow_empty:
        keep = keep | ((counts[..., None] == 0) & (idx == 0))
    return np.where(keep, 0.0, NEG)


def join_batched(tape, p1, p2, roles, H_tgt, n_src, n_tgt):
    """Two-stage similarity join restricted to causal prefixes.

    ``roles`` (K, B, N, d) are the per-role transferred rows, ``H_tgt`` (B, M, d)
    the target-domain encoder rows; ``n_src`` / ``n_tgt`` (B, Q) give how many
    rows of each participate for every query.  Returns (B, Q, d).

    The pair score ``v.(W_i h_i + W_j g_j)`` splits into ``a_i + b_j`` and the
    max over ``j`` commutes with the (monotone) addition of ``a_i``, so the
    max is taken over ``b_j`` once per query; the result equals the row-wise
    maximum of the full similarity matrix.
    """
    K, B, N, d = roles.shape
    M = H_tgt.shape[1]
    mask_j = tape.const(_cutoff_mask(n_tgt, M, allow_empty=True)[None])  # (1, B, Q, M)
    mask_i = tape.const(_cutoff_mask(n_src, N, allow_empty=True)[None])  # (1, B, Q, N)

    a1 = (roles @ p1["W_i"].T) @ p1["v"]  # (K, B, N)
    b1 = (H_tgt @ p1["W_j"].T) @ p1["v"]  # (B, M)
    m1 = nk.max(nk.reshape(b1, (1, B, 1, M)) + mask_j, axis=-1)  # (1, B, Q)
    s1 = nk.reshape(a1, (K, B, 1, N)) + nk.reshape(m1, m1.shape + (1,)) + mask_i
    w1 = nk.softmax(s1, axis=-1)  # (K, B, Q, N)
    # contraction over positions: tile it so masked tail terms add exact zeros
    per_role = nk.matmul(w1, roles, tile_contraction=True)  # (K, B, Q, d)

    a2 = (per_role @ p2["W_i"].T) @ p2["v"]  # (K, B, Q)
    b2 = (H_tgt @ p2["W_j"].T) @ p2["v"]  # (B, M)
    m2 = nk.max(nk.reshape(b2, (1, B, 1, M)) + mask_j, axis=-1)  # (1, B, Q)
    w2 = nk.softmax(a2 + m2, axis=0)  # (K, B, Q)
    Q = w2.shape[2]
    return nk.sum(nk.reshape(w2, (K, B, Q, 1)) * per_role, axis=0)


# --------------------------------------------------------------------------
# batched forward

# The fused scan kernel is the default; the unrolled step-by-step graph is
# kept as a reference implementation (tests compare the two).
FUSED_SPLIT = True


def _split_scan(tape, p, base_f, base_h, role_f, role_h, normalized):
    K, _, d = role_f.shape
    if FUSED_SPLIT:
        return nk.gated_split_scan(
            base_f, base_h, nk.reshape(role_f, (K, d)), nk.reshape(role_h, (K, d)), p["U_f"], p["U_h"], normalized
        )
    L, B, _ = base_f.shape
    prev = tape.zeros((K, B, d) if normalized else (B, d))
    outs = []
    for i in range(L):
        step = split_step if normalized else split_by_join_step
        prev, _, _ = step(p, base_f[i], base_h[i], role_f, role_h, prev)
        outs.append(prev)
    return nk.stack(outs, axis=1 if normalized else 0)


def _cross(tape, P, cfg, batch, src, tgt, H, Hz, barange):
    """Cross-domain representation src->tgt for every tgt query, (B, Q, d)."""
    dn = direction_name(src, tgt)
    B = batch.size
    d = cfg.hidden
    K = cfg.k
    H_src = H[src]
    L_src = H_src.shape[0]
    q_other = batch.q_other[tgt]
    Qn = q_other.shape[1]

    if cfg.uses_split:
        p = _group(P, f"split.{dn}")
        tgt_at_src = Hz[tgt][batch.other_before[src].T, barange[None, :]]  # (L_src, B, d)
        base_f, base_h, role_f, role_h = _split_terms(p, H_src, tgt_at_src)
    if cfg.variant == "psjnet1":
        if cfg.uses_split:
            filtered = _split_scan(tape, p, base_f, base_h, role_f, role_h, normalized=False)
        else:
            filtered = H_src
        states = nk.gru_sequence(filtered, None, *_gru_weights(P, f"transfer.{dn}"))
        return _zero_prepend(tape, states)[q_other, barange[:, None]]

    # split-and-join
    if cfg.uses_split:
        filtered = _split_scan(tape, p, base_f, base_h, role_f, role_h, normalized=True)  # (K, L_src, B, d)
        role_inputs = [filtered[k] for k in range(K)]
    else:
        role_inputs = [H_src] * K
    role_states = [nk.gru_sequence(x, None, *_gru_weights(P, transfer_prefix(cfg, dn, k))) for k, x in enumerate(role_inputs)]
    if not cfg.uses_join:
        total = role_states[0]
        for s in role_states[1:]:
            total = total + s
        return _zero_prepend(tape, total)[q_other, barange[:, None]]
    roles = nk.transpose(nk.stack(role_states, axis=0), (0, 2, 1, 3))  # (K, B, L_src, d)
    H_tgt = nk.transpose(H[tgt], (1, 0, 2))  # (B, L_tgt, d)
    joined = join_batched(
        tape,
        _group(P, f"join.{dn}.s1"),
        _group(P, f"join.{dn}.s2"),
        roles,
        H_tgt,
        q_other,
        batch.q_in[tgt],
    )
    has_other = (q_other > 0).astype(np.float64).reshape(B, Qn, 1)
    return joined * tape.const(has_other)


def forward(P, batch, cfg, drop=None):
    """Logits ``{domain: Tensor (B, Q, V)}`` for every query in ``batch``.

    ``P`` maps parameter names to tensors on one tape; ``drop`` (optional) is
    applied to the encoder outputs and to the decoder input.
    """
    tape = next(iter(P.values())).tape
    drop = drop or (lambda t: t)
    B = batch.size
    barange = np.arange(B)
    H, Hz = {}, {}
    for dom in DOMAINS:
        x = P[f"emb.{dom}"][batch.items[dom].T]  # (L, B, d)
        H[dom] = drop(nk.gru_sequence(x, None, *_gru_weights(P, f"enc.{dom}")))
        Hz[dom] = _zero_prepend(tape, H[dom])
    logits = {}
    for src, tgt in DIRECTIONS:
        h_in = Hz[tgt][batch.q_in[tgt], barange[:, None]]  # (B, Q, d)
        if cfg.uses_cross:
            cross = _cross(tape, P, cfg, batch, src, tgt, H, Hz, barange)
        else:
            cross = tape.zeros(h_in.shape)
        hybrid = drop(nk.concat([h_in, cross], axis=-1))
        logits[tgt] = hybrid @ P[f"dec.{tgt}.W"].T + P[f"dec.{tgt}.b"]
    return logits


def nll(logits, batch, modes=("A", "B")):
    """Per-domain NLL averaged over each sequence's targets, then over sequences.

    Returns ``(total, {domain: Tensor})``.
    """
    parts = {}
    total = None
    for dom in modes:
        mask = batch.q_mask[dom] & (batch.q_target[dom] >= 0)
        per_seq = mask.sum(axis=1)
        n_seq = int((per_seq > 0).sum())
        if n_seq == 0:
            raise EmptyLossError(f"no domain-{dom} targets in batch")
        w = np.where(mask, 1.0 / np.maximum(per_seq, 1)[:, None], 0.0) / n_seq
        lp = nk.log_softmax(logits[dom], axis=-1)
        B, Q, _ = lp.shape
        tgt = np.where(mask, batch.q_target[dom], 0)
        picked = lp[np.arange(B)[:, None], np.arange(Q)[None, :], tgt]
        part = -nk.sum(picked * lp.tape.const(w))
        parts[dom] = part
        total = part if total is None else total + part
    return total, parts


MODES = {"joint": ("A", "B"), "A-only": ("A",), "B-only": ("B",)}


def register(tape, params):
    return {name: tape.param(name, value) for name, value in params.items()}


def batch_loss(params, batch, cfg, mode="joint", record=True, drop=None):
    tape = nk.Tape(record=record)
    P = register(tape, params)
    logits = forward(P, batch, cfg, drop=drop)
    total, parts = nll(logits, batch, MODES[mode])
    return total, parts


def sequence_loss(seq, params, cfg, mode="joint", record=False):
    """Joint / single-domain NLL of one encoded sequence under teacher forcing.

    Returns the loss tensor (its ``.tape`` holds the graph when ``record``).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {sorted(MODES)}")
    for dom in MODES[mode]:
        if not seq.targets(dom):
            raise EmptyLossError(f"sequence has no domain-{dom} targets")
    batch = make_batch([seq], "train", vocab_sizes=vocab_sizes_of(params))
    total, _ = batch_loss(params, batch, cfg, mode=mode, record=record)
    return total


def vocab_sizes_of(params):
    return {dom: params[f"emb.{dom}"].shape[0] for dom in DOMAINS}


def score_batch(params, batch, cfg):
    """Unnormalised scores (numpy) per domain for each query, no graph kept."""
    tape = nk.Tape(record=False)
    logits = forward(register(tape, params), batch, cfg)
    return {dom: logits[dom].data for dom in DOMAINS}


def target_probabilities(params, seq, cfg):
    """``P(target)`` for every teacher-forcing target of ``seq`` as
    ``{domain: [(position, prob), ...]}``."""
    batch = make_batch([seq], "train", vocab_sizes=vocab_sizes_of(params))
    scores = score_batch(params, batch, cfg)
    out = {}
    for dom in DOMAINS:
        rows = []
        positions = [pos for pos, _ in seq.targets(dom)]
        for q, pos in enumerate(positions):
            s = scores[dom][0, q]
            e = np.exp(s - s.max())
            p = e / e.sum()
            rows.append((pos, float(p[batch.q_target[dom][0, q]])))
        out[dom] = rows
    return out


# --------------------------------------------------------------------------
# single-sequence entry points (numpy in, numpy out)


def _const_tape():
    return nk.Tape(record=False)


def encode_sequence(seq, params):
    """Encoder states ``(H_A, H_B)`` of one encoded sequence, shapes (N, d), (M, d)."""
    sizes = vocab_sizes_of(params)
    tape = _const_tape()
    out = []
    for dom in DOMAINS:
        items = seq.items(dom)
        d = params[f"enc.{dom}.W_z"].shape[0]
        if not items:
            out.append(np.zeros((0, d)))
            continue
        batch = make_batch([seq], "final", vocab_sizes=sizes)
        emb = tape.const(params[f"emb.{dom}"])
        x = emb[batch.items[dom].T]
        w = [tape.const(params[f"enc.{dom}.{n}"]) for n in ("W_z", "W_r", "W_h")]
        out.append(nk.gru_sequence(x, None, *w).data[:, 0, :])
    return tuple(out)


def psj1_step(split_params, h_src, h_tgt, prev):
    """One split-by-join update for a single position (vectors of width d).

    Returns ``(output, per_role (K, d), gates (K, d))``.
    """
    tape = _const_tape()
    p = {k: tape.const(v) for k, v in split_params.items()}
    if p["role_emb"].shape[0] == 0:
        raise ConfigError("role count K must be >= 1")
    hs = tape.const(np.asarray(h_src)[None])
    ht = tape.const(np.asarray(h_tgt)[None])
    base_f, base_h, role_f, role_h = _split_terms(p, hs, ht)
    out, per_role, gates = split_by_join_step(p, base_f, base_h, role_f, role_h, tape.const(np.asarray(prev)[None]))
    return out.data[0], per_role.data[:, 0], gates.data[:, 0]


def psj2_split_step(split_params, h_src, h_tgt, prev_roles):
    """One normalised split update; returns ``(new_roles, gates, none_gate)``."""
    tape = _const_tape()
    p = {k: tape.const(v) for k, v in split_params.items()}
    hs = tape.const(np.asarray(h_src)[None])
    ht = tape.const(np.asarray(h_tgt)[None])
    base_f, base_h, role_f, role_h = _split_terms(p, hs, ht)
    prev = tape.const(np.asarray(prev_roles)[:, None, :])
    new, gates, none_gate = split_step(p, base_f, base_h, role_f, role_h, prev)
    return new.data[:, 0], gates.data[:, 0], none_gate.data[0]


def transfer(gru_params, inputs, h0=None):
    """Run a transfer GRU over rows of ``inputs`` (N, d); returns states (N, d)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    d = gru_params["W_z"].shape[0]
    if inputs.shape[0] == 0:
        return np.zeros((0, d))
    tape = _const_tape()
    w = [tape.const(gru_params[n]) for n in ("W_z", "W_r", "W_h")]
    h = None if h0 is None else tape.const(np.asarray(h0)[None])
    return nk.gru_sequence(tape.const(inputs[:, None, :]), h, *w).data[:, 0, :]


def psj1_transfer(gru_params, filtered):
    """Transferred states for the split-by-join outputs; the cross-domain
    representation is the last row, or zeros when there are no rows."""
    states = transfer(gru_params, filtered)
    final = states[-1] if len(states) else np.zeros(gru_params["W_z"].shape[0])
    return states, final


def psj2_role_transfer(role_params, per_role_filtered):
    """One independent transfer GRU per role; returns (K, N, d)."""
    return np.stack([transfer(p, x) for p, x in zip(role_params, per_role_filtered)])


def _stage(v, W_i, W_j, rows, H_tgt):
    S = np.array([[v @ (W_i @ r + W_j @ h) for h in H_tgt] for r in rows])
    best = S.max(axis=1)
    e = np.exp(best - best.max())
    w = e / e.sum()
    return w @ rows, S, w


def psj2_join(role_rows, H_tgt, stage1, stage2, cutoff_src=None, cutoff_tgt=None):
    """Two-stage join for one sequence with an explicit similarity matrix.

    ``role_rows`` (K, N, d); ``H_tgt`` (M, d); ``stage*`` dicts with ``v``,
    ``W_i``, ``W_j``.  Cutoffs keep the first ``cutoff_*`` rows.  Returns the
    joined vector (d,).
    """
    role_rows = np.asarray(role_rows, dtype=np.float64)
    H_tgt = np.asarray(H_tgt, dtype=np.float64)
    if role_rows.ndim != 3 or H_tgt.ndim != 2:
        raise ShapeError(f"join: expected (K, N, d) and (M, d), got {role_rows.shape} and {H_tgt.shape}")
    if cutoff_src is not None:
        role_rows = role_rows[:, :cutoff_src]
    if cutoff_tgt is not None:
        H_tgt = H_tgt[:cutoff_tgt]
    if role_rows.shape[0] == 0 or role_rows.shape[1] == 0 or H_tgt.shape[0] == 0:
        raise JoinError(f"empty participating set: roles {role_rows.shape}, target rows {H_tgt.shape}")
    per_role = np.stack([_stage(stage1["v"], stage1["W_i"], stage1["W_j"], rows, H_tgt)[0] for rows in role_rows])
    out, _, _ = _stage(stage2["v"], stage2["W_i"], stage2["W_j"], per_role, H_tgt)
    return out


def decode_scores(h_in, h_cross, W, b):
    """Probability vector over the target vocabulary."""
    h_in = np.asarray(h_in, dtype=np.float64)
    h_cross = np.asarray(h_cross, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if h_in.shape != h_cross.shape or W.ndim != 2 or W.shape[1] != h_in.size + h_cross.size:
        raise ShapeError(f"decode: W {W.shape} does not match inputs {h_in.shape} + {h_cross.shape}")
    tape = _const_tape()
    z = tape.const(W) @ tape.const(np.concatenate([h_in, h_cross])) + tape.const(b)
    return nk.softmax(z).data
