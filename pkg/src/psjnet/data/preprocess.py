"""Preprocessing of naturally shared smart-TV style watch logs."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from ..errors import ConfigError, FormatError, SimulationError
from ..model.sequence import MixedSequence


@dataclass
class PreprocessRules:
    min_records: int = 10
    min_watch_seconds: float = 300.0
    merge_gap_seconds: float = 600.0
    slice_length: int = 30
    min_per_domain: int = 6  # "more than five" of each domain

    def __post_init__(self):
        if self.slice_length < 1:
            raise ConfigError("slice length must be >= 1")


def preprocess_logs(events, rules=None):
    """Turn raw watch events (user id = account) into mixed sequences.

    Users with fewer than ``min_records`` plays or less than
    ``min_watch_seconds`` of total watch time are removed.  A play of the same
    item as the account's immediately preceding play, starting less than
    ``merge_gap_seconds`` later, is merged into it.  Each account's timeline
    is cut into consecutive ``slice_length``-event slices (the trailing
    partial slice included) and slices with fewer than ``min_per_domain``
    events in either domain are discarded.
    """
    rules = rules or PreprocessRules()
    by_user = defaultdict(list)
    for e in events:
        if e.duration is None:
            raise FormatError(f"event of user {e.user!r} at {e.timestamp} has no watch duration")
        by_user[e.user].append(e)

    sequences = []
    for user in sorted(by_user):
        tl = sorted(by_user[user], key=lambda e: e.timestamp)
        if len(tl) < rules.min_records or sum(e.duration for e in tl) < rules.min_watch_seconds:
            continue
        merged = []
        prev = None  # previous raw play, so chains of close replays collapse
        for e in tl:
            if (
                prev is not None
                and prev.domain == e.domain
                and prev.item == e.item
                and e.timestamp - prev.timestamp < rules.merge_gap_seconds
            ):
                prev = e
                continue
            merged.append(e)
            prev = e
        for start in range(0, len(merged), rules.slice_length):
            sl = merged[start : start + rules.slice_length]
            n_a = sum(1 for e in sl if e.domain == "A")
            if n_a >= rules.min_per_domain and len(sl) - n_a >= rules.min_per_domain:
                sequences.append(MixedSequence(tuple((e.domain, e.item) for e in sl)))
    if not sequences:
        raise SimulationError("no sequence survives preprocessing", stage="preprocess")
    return sequences
