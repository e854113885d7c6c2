"""Recall@k / MRR@k over full-catalogue rankings, paired t-tests and POP."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateTestError
from .model.network import score_batch
from .model.sequence import DOMAINS, encode, make_batch

log = logging.getLogger(__name__)

DEFAULT_CUTOFFS = (5, 10, 20)


def rank_of(scores, truth):
    """1-based rank of ``truth``; ties go to the lower item index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= truth < scores.shape[-1]:
        raise IndexError(f"ground truth {truth} outside catalogue of size {scores.shape[-1]}")
    s = scores[truth]
    return int(1 + np.count_nonzero(scores > s) + np.count_nonzero(scores[:truth] == s))


def ranks(score_matrix, truths):
    """Vectorised :func:`rank_of` over rows of ``score_matrix``."""
    S = np.asarray(score_matrix, dtype=np.float64)
    t = np.asarray(truths, dtype=np.int64)
    if S.ndim != 2 or t.shape != (S.shape[0],):
        raise ValueError(f"expected (n, V) scores and n truths, got {S.shape} and {t.shape}")
    if np.any((t < 0) | (t >= S.shape[1])):
        raise IndexError(f"ground truth outside catalogue of size {S.shape[1]}")
    st = S[np.arange(len(t)), t][:, None]
    before = np.arange(S.shape[1])[None, :] < t[:, None]
    return 1 + np.count_nonzero(S > st, axis=1) + np.count_nonzero((S == st) & before, axis=1)


def recall_at_k(scores, truth, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    return int(rank_of(scores, truth) <= k)


def mrr_at_k(scores, truth, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    r = rank_of(scores, truth)
    return 1.0 / r if r <= k else 0.0


def hits_from_ranks(r, k):
    return (np.asarray(r) <= k).astype(np.float64)


def rr_from_ranks(r, k):
    r = np.asarray(r, dtype=np.float64)
    return np.where(r <= k, 1.0 / r, 0.0)


@dataclass
class TTestResult:
    t: float
    p: float
    n: int

    @property
    def significant(self):
        return self.p < 0.05


def paired_t_test(x, y):
    """Two-sided paired t-test of ``x`` against ``y`` on per-case values."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError(f"need two equal-length vectors with n >= 2, got {x.shape} and {y.shape}")
    diff = x - y
    n = diff.size
    sd = diff.std(ddof=1)
    if sd == 0.0:
        raise DegenerateTestError("differences have zero variance; t is undefined")
    t = diff.mean() / (sd / np.sqrt(n))
    p = 2.0 * stats.t.sf(abs(t), df=n - 1)
    return TTestResult(float(t), float(p), n)


@dataclass
class EvalReport:
    """Ranks of every evaluation case per domain, with metric accessors."""

    ranks: dict
    cutoffs: tuple = DEFAULT_CUTOFFS
    dropped: int = 0

    def n(self, domain):
        return len(self.ranks[domain])

    def hits(self, domain, k):
        return hits_from_ranks(self.ranks[domain], k)

    def reciprocal_ranks(self, domain, k):
        return rr_from_ranks(self.ranks[domain], k)

    def recall(self, domain, k):
        h = self.hits(domain, k)
        return float(h.mean()) if h.size else 0.0

    def mrr(self, domain, k):
        r = self.reciprocal_ranks(domain, k)
        return float(r.mean()) if r.size else 0.0

    def table(self, title="Results (%)"):
        cols = [f"{m}@{k}" for k in self.cutoffs for m in ("MRR", "Recall")]
        head = f"{'Domain':<8}" + "".join(f"{c:>11}" for c in cols)
        lines = [title, head, "-" * len(head)]
        for dom in DOMAINS:
            vals = []
            for k in self.cutoffs:
                vals += [100 * self.mrr(dom, k), 100 * self.recall(dom, k)]
            lines.append(f"{dom + '-domain':<8}" + "".join(f"{v:>11.2f}" for v in vals))
        return "\n".join(lines) + "\n"

    def key_values(self):
        lines = []
        for dom in DOMAINS:
            lines.append(f"n_cases.{dom}={self.n(dom)}")
            for k in self.cutoffs:
                lines.append(f"recall@{k}.{dom}={self.recall(dom, k):.6f}")
                lines.append(f"mrr@{k}.{dom}={self.mrr(dom, k):.6f}")
        lines.append(f"dropped_cases={self.dropped}")
        return "\n".join(lines) + "\n"


@dataclass
class EvalCases:
    """Evaluation inputs: encoded prefixes and per-domain ground-truth indices."""

    inputs: list = field(default_factory=list)
    truths: list = field(default_factory=list)
    dropped: int = 0

    def __len__(self):
        return len(self.inputs)


def prepare_cases(raw_sequences, vocabs):
    """Split raw sequences into model inputs and final-item ground truths.

    Ground truths outside the training vocabulary are dropped (and counted);
    unknown items inside the input are removed.
    """
    cases = EvalCases()
    unknown_inputs = 0
    for seq in raw_sequences:
        truth = []
        for dom in DOMAINS:
            gt = seq.ground_truth(dom)
            if gt is not None and gt not in vocabs[dom]:
                cases.dropped += 1
                gt = None
            truth.append(None if gt is None else vocabs[dom].index(gt))
        if truth == [None, None]:
            continue
        enc, n_unknown = encode(seq.without_ground_truths(), vocabs, drop_unknown=True)
        unknown_inputs += n_unknown
        cases.inputs.append(enc)
        cases.truths.append(tuple(truth))
    if cases.dropped or unknown_inputs:
        log.warning(
            "evaluation: %d ground truths and %d input events outside the training vocabulary were dropped",
            cases.dropped,
            unknown_inputs,
        )
    return cases


def cases_from_encoded(sequences):
    """Eval cases from already-encoded full sequences (no vocabulary filtering)."""
    cases = EvalCases()
    for seq in sequences:
        truth = (seq.ground_truth("A"), seq.ground_truth("B"))
        if truth == (None, None):
            continue
        cases.inputs.append(seq.without_ground_truths())
        cases.truths.append(truth)
    return cases


def _as_cases(cases):
    if isinstance(cases, EvalCases):
        return cases
    return cases_from_encoded(cases)


def score_cases(params, cfg, cases, batch_size=256):
    """Per-domain score matrices (n_cases, V) for the final query of each case."""
    cases = _as_cases(cases)
    out = {dom: [] for dom in DOMAINS}
    for start in range(0, len(cases), batch_size):
        inputs = cases.inputs[start : start + batch_size]
        batch = make_batch(inputs, "final")
        scores = score_batch(params, batch, cfg)
        for dom in DOMAINS:
            out[dom].append(scores[dom][:, 0, :])
    return {dom: (np.concatenate(v) if v else np.zeros((0, params[f"dec.{dom}.b"].shape[0]))) for dom, v in out.items()}


def report_from_scores(scores, cases, cutoffs=DEFAULT_CUTOFFS):
    cases = _as_cases(cases)
    result = {}
    for i, dom in enumerate(DOMAINS):
        rows = [c for c, t in enumerate(cases.truths) if t[i] is not None]
        truths = [cases.truths[c][i] for c in rows]
        S = scores[dom]
        if S.ndim == 1:
            S = np.broadcast_to(S, (len(rows), S.shape[0]))
        else:
            S = S[rows]
        result[dom] = ranks(S, truths) if rows else np.zeros(0, dtype=np.int64)
    return EvalReport(result, tuple(cutoffs), cases.dropped)


def evaluate_model(params, cfg, cases, cutoffs=DEFAULT_CUTOFFS):
    cases = _as_cases(cases)
    return report_from_scores(score_cases(params, cfg, cases), cases, cutoffs)


def pop_baseline(train_sequences, vocab_sizes):
    """Static per-domain popularity scores from encoded training sequences."""
    counts = {dom: np.zeros(vocab_sizes[dom]) for dom in DOMAINS}
    for seq in train_sequences:
        for dom, it in seq.events:
            counts[dom][it] += 1
    return counts


def evaluate_pop(train_sequences, vocab_sizes, cases, cutoffs=DEFAULT_CUTOFFS):
    scores = pop_baseline(train_sequences, vocab_sizes)
    return report_from_scores(scores, cases, cutoffs)
