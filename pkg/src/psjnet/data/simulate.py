"""Shared-account simulation from per-user two-domain logs, and dataset statistics."""

from __future__ import annotations

import datetime as _dt
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, SimulationError
from ..model.sequence import DOMAINS, MixedSequence

DEFAULT_INTERVALS = ((1996, 2000), (2001, 2003), (2004, 2006), (2007, 2009), (2010, 2012), (2013, 2015))


@dataclass
class SimConfig:
    intervals: tuple = DEFAULT_INTERVALS
    group_sizes: tuple = (2, 3, 4)
    min_a: int = 5
    min_b: int = 2
    min_length: int = 4
    max_length: int = 60
    freq_floor_a: int = 5
    freq_floor_b: int = 10
    min_user_records: int = 10
    fractions: tuple = (0.75, 0.15, 0.10)
    seed: int = 0

    def __post_init__(self):
        self.intervals = tuple(tuple(int(y) for y in iv) for iv in self.intervals)
        for lo, hi in self.intervals:
            if lo > hi:
                raise ConfigError(f"interval ({lo}, {hi}) is reversed")
        for (_, a_hi), (b_lo, _) in zip(self.intervals, self.intervals[1:]):
            if b_lo <= a_hi:
                raise ConfigError("intervals must be increasing and non-overlapping")
        if not self.group_sizes or min(self.group_sizes) < 1:
            raise ConfigError(f"group sizes must be positive, got {self.group_sizes}")
        if not 0 < self.min_length <= self.max_length:
            raise ConfigError(f"length bounds must satisfy 0 < min <= max, got ({self.min_length}, {self.max_length})")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {self.fractions}")


@dataclass
class DatasetStats:
    """Counts mirroring the usual dataset-statistics table."""

    items: dict = field(default_factory=dict)
    logs: dict = field(default_factory=dict)
    overlapped_users: int = 0
    sequences: int = 0
    accounts: int = 0
    splits: dict = field(default_factory=dict)

    @classmethod
    def of(cls, sequences, overlapped_users=0, accounts=0, splits=None):
        items = {d: set() for d in DOMAINS}
        logs = Counter()
        for seq in sequences:
            for dom, it in seq.events:
                items[dom].add(it)
                logs[dom] += 1
        return cls(
            items={d: len(items[d]) for d in DOMAINS},
            logs={d: logs[d] for d in DOMAINS},
            overlapped_users=overlapped_users,
            sequences=len(sequences),
            accounts=accounts,
            splits=dict(splits or {}),
        )

    def render(self, names=("A", "B")):
        rows = []
        for dom, label in zip(DOMAINS, names):
            rows.append((f"{label}-domain", ""))
            rows.append(("#Items", f"{self.items.get(dom, 0):,}"))
            rows.append(("#Logs", f"{self.logs.get(dom, 0):,}"))
        rows.append(("#Overlapped-users", f"{self.overlapped_users:,}"))
        rows.append(("#Accounts", f"{self.accounts:,}"))
        rows.append(("#Sequences", f"{self.sequences:,}"))
        for key, label in (("train", "#Training-sequences"), ("valid", "#Validation-sequences"), ("test", "#Test-sequences")):
            if key in self.splits:
                rows.append((label, f"{self.splits[key]:,}"))
        width = max(len(r[0]) for r in rows) + 2
        return "".join(f"{a:<{width}}{b:>12}\n" if b else f"{a}\n" for a, b in rows)


@dataclass
class SimResult:
    sequences: list
    accounts: dict  # account id -> tuple of member user ids (one interval each)
    sequence_accounts: list
    stats: DatasetStats


def year_of(ts):
    return _dt.datetime.fromtimestamp(int(ts), tz=_dt.timezone.utc).year


def _user_timelines(events):
    by_user = defaultdict(list)
    for e in events:
        by_user[e.user].append(e)
    # stable chronological order; ties keep input order
    return {u: sorted(evs, key=lambda e: e.timestamp) for u, evs in sorted(by_user.items())}


def merge_adjacent_duplicates(timeline):
    """Collapse runs of the same (domain, item) in one user's timeline."""
    out = []
    for e in timeline:
        if out and out[-1].domain == e.domain and out[-1].item == e.item:
            continue
        out.append(e)
    return out


def _frequent(timelines, cfg):
    freq = Counter((e.domain, e.item) for tl in timelines.values() for e in tl)
    floor = {"A": cfg.freq_floor_a, "B": cfg.freq_floor_b}
    return {key for key, n in freq.items() if n > floor[key[0]]}


def frequent_items(events, config=None):
    """``(domain, item)`` pairs passing the frequency floors, counted after
    per-user duplicate merging (the simulator's item filter)."""
    cfg = config or SimConfig()
    timelines = {u: merge_adjacent_duplicates(tl) for u, tl in _user_timelines(events).items()}
    return _frequent(timelines, cfg)


def _require(collection, stage):
    if not collection:
        raise SimulationError("no data survives", stage=stage)


def _groups(users, sizes, rng):
    """Randomly partition ``users`` into groups whose sizes come from ``sizes``.

    A remainder too small for the smallest size joins the last group when
    that stays within the largest size, otherwise it is dropped.
    """
    users = list(users)
    rng.shuffle(users)
    groups = []
    i = 0
    lo, hi = min(sizes), max(sizes)
    while len(users) - i >= lo:
        s = int(rng.choice(sizes))
        s = min(s, len(users) - i)
        if s < lo:
            break
        groups.append(users[i : i + s])
        i += s
    rest = users[i:]
    if rest and groups and len(groups[-1]) + len(rest) <= hi:
        groups[-1].extend(rest)
    return groups


def _fits(events, cfg):
    n_a = sum(1 for e in events if e.domain == "A")
    return n_a >= cfg.min_a and len(events) - n_a >= cfg.min_b and cfg.min_length <= len(events) <= cfg.max_length


def simulate_shared_accounts(events, config=None):
    """Build shared-account sequences from individual two-domain user logs.

    Stages: per-user chronological order and duplicate merging; item
    frequency floors; cross-domain users with enough records; interval
    bucketing; random 2-4 user grouping per interval; calendar-year slicing;
    per-sequence minima and length bounds (over-long slices keep their most
    recent ``max_length`` events and are re-checked).
    """
    cfg = config or SimConfig()
    rng = np.random.default_rng([cfg.seed, 0xACC7])
    _require(events, "input")

    timelines = {u: merge_adjacent_duplicates(tl) for u, tl in _user_timelines(events).items()}

    keep = _frequent(timelines, cfg)
    timelines = {u: [e for e in tl if (e.domain, e.item) in keep] for u, tl in timelines.items()}
    _require([u for u, tl in timelines.items() if tl], "frequency")

    cross = {}
    for u, tl in timelines.items():
        doms = {e.domain for e in tl}
        if doms == set(DOMAINS) and len(tl) > cfg.min_user_records:
            cross[u] = tl
    _require(cross, "cross-domain")

    accounts = {}
    seqs, seq_accounts = [], []
    for lo, hi in cfg.intervals:
        members = {}
        for u, tl in cross.items():
            part = [e for e in tl if lo <= year_of(e.timestamp) <= hi]
            if part:
                members[u] = part
        for group in _groups(sorted(members), cfg.group_sizes, rng):
            acct = f"acct-{len(accounts) + 1:06d}"
            accounts[acct] = tuple(group)
            merged = sorted((e for u in group for e in members[u]), key=lambda e: (e.timestamp, e.user))
            by_year = defaultdict(list)
            for e in merged:
                by_year[year_of(e.timestamp)].append(e)
            for year in sorted(by_year):
                sl = by_year[year]
                if len(sl) > cfg.max_length:
                    sl = sl[-cfg.max_length :]
                if _fits(sl, cfg):
                    seqs.append(MixedSequence(tuple((e.domain, e.item) for e in sl)))
                    seq_accounts.append(acct)
    _require(accounts, "grouping")
    _require(seqs, "constraints")
    stats = DatasetStats.of(seqs, overlapped_users=len(cross), accounts=len(set(seq_accounts)))
    return SimResult(seqs, accounts, seq_accounts, stats)
