"""Mixed two-domain sequences, vocabularies and padded mini-batches."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, VocabError

DOMAINS = ("A", "B")


def other(domain):
    return "B" if domain == "A" else "A"


@dataclass(frozen=True)
class MixedSequence:
    """One account's chronologically interleaved events.

    ``events`` holds ``(domain, item)`` pairs.  Items are raw ids (strings) as
    read from disk, or dense indices once encoded with a :class:`Vocabulary`.
    """

    events: tuple

    def __post_init__(self):
        for dom, _ in self.events:
            if dom not in DOMAINS:
                raise ValueError(f"unknown domain tag {dom!r}")

    def __len__(self):
        return len(self.events)

    def count(self, domain):
        return sum(1 for d, _ in self.events if d == domain)

    @property
    def n_a(self):
        return self.count("A")

    @property
    def n_b(self):
        return self.count("B")

    def items(self, domain):
        return [it for d, it in self.events if d == domain]

    def alignment(self, domain):
        """For each ``domain`` event, the 0-based index (within the other
        domain's sub-sequence) of the latest other-domain event before it,
        or -1 when there is none."""
        seen = -1
        out = []
        for d, _ in self.events:
            if d == domain:
                out.append(seen)
            else:
                seen += 1
        return out

    def targets(self, domain):
        """Teacher-forcing targets: ``(position, item)`` for every event of
        ``domain`` preceded by at least one event of the same domain."""
        out = []
        seen = False
        for pos, (d, it) in enumerate(self.events):
            if d != domain:
                continue
            if seen:
                out.append((pos, it))
            seen = True
        return out

    def ground_truth(self, domain):
        for d, it in reversed(self.events):
            if d == domain:
                return it
        return None

    def last_position(self, domain):
        for pos in range(len(self.events) - 1, -1, -1):
            if self.events[pos][0] == domain:
                return pos
        return None

    def without_ground_truths(self):
        """The evaluation input: the sequence with each domain's final event removed."""
        drop = {self.last_position(d) for d in DOMAINS} - {None}
        return MixedSequence(tuple(e for i, e in enumerate(self.events) if i not in drop))

    def swapped(self):
        return MixedSequence(tuple((other(d), it) for d, it in self.events))


class Vocabulary:
    """Bijection between one domain's item ids and dense indices ``0..size-1``."""

    def __init__(self, domain, ids):
        self.domain = domain
        self.ids = list(ids)
        self._index = {it: i for i, it in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise ValueError("duplicate item ids in vocabulary")

    @classmethod
    def from_sequences(cls, domain, sequences):
        seen = {}
        for seq in sequences:
            for d, it in seq.events:
                if d == domain and it not in seen:
                    seen[it] = len(seen)
        return cls(domain, sorted(seen, key=_id_sort_key))

    def __len__(self):
        return len(self.ids)

    def __contains__(self, item):
        return item in self._index

    @property
    def size(self):
        return len(self.ids)

    def index(self, item):
        try:
            return self._index[item]
        except KeyError:
            raise VocabError(f"item {item!r} not in domain {self.domain} vocabulary") from None

    def id(self, index):
        if not 0 <= index < len(self.ids):
            raise VocabError(f"index {index} outside domain {self.domain} vocabulary of size {len(self.ids)}")
        return self.ids[index]

    def digest(self):
        h = hashlib.sha256()
        for it in self.ids:
            h.update(str(it).encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()


def _id_sort_key(it):
    s = str(it)
    return (0, int(s), s) if s.isdigit() else (1, 0, s)


def encode(seq, vocabs, drop_unknown=False):
    """Map raw ids to indices.  Unknown items raise unless ``drop_unknown``;
    returns ``(encoded, n_dropped)``."""
    out = []
    dropped = 0
    for d, it in seq.events:
        voc = vocabs[d]
        if it in voc:
            out.append((d, voc.index(it)))
        elif drop_unknown:
            dropped += 1
        else:
            raise VocabError(f"item {it!r} not in domain {d} vocabulary")
    return MixedSequence(tuple(out)), dropped


def decode(seq, vocabs):
    return MixedSequence(tuple((d, vocabs[d].id(i)) for d, i in seq.events))


@dataclass
class Batch:
    """Padded arrays for a group of encoded sequences.

    Per domain ``X``: ``items[X]`` (B, Lx); ``other_before[X]`` (B, Lx) is the
    number of other-domain events preceding each X event.  Queries (one per
    prediction) are (B, Qx): ``q_in`` = X events before the prediction point,
    ``q_other`` = other-domain events before it, ``q_target`` the item index
    (-1 when unknown) and ``q_mask`` which slots are real.
    """

    size: int
    items: dict
    lengths: dict
    other_before: dict
    q_in: dict
    q_other: dict
    q_target: dict
    q_mask: dict

    def n_queries(self, domain):
        return int(self.q_mask[domain].sum())


def _pad(rows, width, fill=0):
    arr = np.full((len(rows), max(width, 1)), fill, dtype=np.int64)
    for b, r in enumerate(rows):
        arr[b, : len(r)] = r
    return arr


def make_batch(sequences, mode="train", targets=None, vocab_sizes=None):
    """Build a :class:`Batch` from encoded sequences.

    ``mode="train"``: one query per teacher-forcing target.  ``mode="final"``:
    one query per domain placed after the last event (the sequences are the
    inputs, e.g. with ground truths removed); ``targets`` optionally gives the
    ``(a_item, b_item)`` to score, ``None`` entries meaning unknown.
    """
    if mode not in ("train", "final"):
        raise ConfigError(f"unknown batch mode {mode!r}")
    B = len(sequences)
    items, lengths, other_before = {}, {}, {}
    q = {k: {} for k in ("in", "other", "target", "mask")}
    for dom in DOMAINS:
        rows, obs = [], []
        for seq in sequences:
            its = seq.items(dom)
            if vocab_sizes is not None:
                for it in its:
                    if not 0 <= it < vocab_sizes[dom]:
                        raise VocabError(f"index {it} outside domain {dom} vocabulary of size {vocab_sizes[dom]}")
            rows.append(its)
            obs.append([a + 1 for a in seq.alignment(dom)])
        width = max((len(r) for r in rows), default=0)
        items[dom] = _pad(rows, width)
        other_before[dom] = _pad(obs, width)
        lengths[dom] = np.array([len(r) for r in rows], dtype=np.int64)

        qin, qoth, qtgt = [], [], []
        for b, seq in enumerate(sequences):
            if mode == "train":
                n_x = n_y = 0
                a_in, a_oth, a_tgt = [], [], []
                for d, it in seq.events:
                    if d == dom:
                        if n_x > 0:
                            a_in.append(n_x)
                            a_oth.append(n_y)
                            a_tgt.append(it)
                        n_x += 1
                    else:
                        n_y += 1
            else:
                tgt = -1
                if targets is not None and targets[b] is not None:
                    t = targets[b][DOMAINS.index(dom)]
                    tgt = -1 if t is None else t
                a_in, a_oth, a_tgt = [seq.count(dom)], [seq.count(other(dom))], [tgt]
            qin.append(a_in)
            qoth.append(a_oth)
            qtgt.append(a_tgt)
        qw = max((len(r) for r in qin), default=0)
        q["in"][dom] = _pad(qin, qw)
        q["other"][dom] = _pad(qoth, qw)
        q["target"][dom] = _pad(qtgt, qw, fill=-1)
        mask = np.zeros((B, max(qw, 1)), dtype=bool)
        for b, r in enumerate(qin):
            mask[b, : len(r)] = True
        q["mask"][dom] = mask
    return Batch(
        size=B,
        items=items,
        lengths=lengths,
        other_before=other_before,
        q_in=q["in"],
        q_other=q["other"],
        q_target=q["target"],
        q_mask=q["mask"],
    )
