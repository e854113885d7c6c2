"""Planted-role synthetic benchmark and a raw per-user log generator.

The benchmark mimics a shared account: several latent roles take turns, each
role walks its own block of A items, and B items are (with probability
``signal``) a fixed function of the acting role's latest A item.
"""

from __future__ import annotations

import datetime as _dt
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError
from ..model.sequence import MixedSequence
from .formats import RawEvent, atomic_write_text, write_sequences
from .simulate import DatasetStats
from .split import split_dataset


@dataclass
class SynthConfig:
    n_accounts: int = 64
    n_roles: int = 8
    items_per_role: int = 10
    n_items_b: int = 40
    roles_per_account: tuple = (2, 4)
    seqs_per_account: int = 4
    length: tuple = (12, 30)
    p_b: float = 0.4
    stickiness: float = 0.85
    noise: float = 0.05
    signal: float = 1.0
    fractions: tuple = (0.75, 0.15, 0.10)
    seed: int = 0

    def __post_init__(self):
        self.roles_per_account = tuple(int(v) for v in self.roles_per_account)
        self.length = tuple(int(v) for v in self.length)
        self.fractions = tuple(float(v) for v in self.fractions)
        if not 0.0 <= self.signal <= 1.0:
            raise ConfigError(f"signal strength must be in [0, 1], got {self.signal}")
        for name in ("p_b", "stickiness", "noise"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        lo, hi = self.roles_per_account
        if not 1 <= lo <= hi <= self.n_roles:
            raise ConfigError(f"roles per account {self.roles_per_account} incompatible with {self.n_roles} roles")
        if not 7 <= self.length[0] <= self.length[1]:
            raise ConfigError(f"length range must satisfy 7 <= lo <= hi, got {self.length}")
        if min(self.n_accounts, self.items_per_role, self.n_items_b, self.seqs_per_account) < 1:
            raise ConfigError("counts must be positive")

    @property
    def n_items_a(self):
        return self.n_roles * self.items_per_role

    def as_dict(self):
        return asdict(self)


@dataclass
class Benchmark:
    train: list
    valid: list
    test: list
    link: np.ndarray  # A item index -> linked B item index
    config: SynthConfig

    def splits(self):
        return {"train": self.train, "valid": self.valid, "test": self.test}


def successor(item, items_per_role):
    block = item - item % items_per_role
    return block + (item + 1) % items_per_role


class _Role:
    def __init__(self, role, cfg, rng):
        self.block = role * cfg.items_per_role
        self.last = None
        self.cfg = cfg
        self.rng = rng

    def next_a(self):
        cfg, rng = self.cfg, self.rng
        if self.last is None or rng.random() < cfg.noise:
            self.last = self.block + int(rng.integers(cfg.items_per_role))
        else:
            self.last = successor(self.last, cfg.items_per_role)
        return self.last

    def next_b(self, link):
        if self.rng.random() < self.cfg.signal:
            return int(link[self.last])
        return int(self.rng.integers(self.cfg.n_items_b))


def _sequence(roles, link, cfg, rng):
    """Body of random role turns, closed by a B then an A event of the acting role.

    The closing pair keeps both held-out items planted functions of the
    remaining (visible) history.
    """
    total = int(rng.integers(cfg.length[0], cfg.length[1] + 1))
    while True:
        events = []
        cur = roles[int(rng.integers(len(roles)))]
        for _ in range(total - 2):
            if rng.random() > cfg.stickiness:
                cur = roles[int(rng.integers(len(roles)))]
            if cur.last is None or rng.random() >= cfg.p_b:
                events.append(("A", cur.next_a()))
            else:
                events.append(("B", cur.next_b(link)))
        if cur.last is None:
            events[-1] = ("A", cur.next_a())
        events.append(("B", cur.next_b(link)))
        events.append(("A", cur.next_a()))
        n_a = sum(1 for d, _ in events if d == "A")
        if n_a >= 5 and len(events) - n_a >= 2:
            return events


def make_synthetic_benchmark(config=None):
    """Generate the benchmark; items are written as decimal string ids."""
    cfg = config or SynthConfig()
    rng = np.random.default_rng([cfg.seed, 0x5717])
    link = rng.integers(cfg.n_items_b, size=cfg.n_items_a)
    sequences = []
    for _ in range(cfg.n_accounts):
        k = int(rng.integers(cfg.roles_per_account[0], cfg.roles_per_account[1] + 1))
        members = rng.choice(cfg.n_roles, size=k, replace=False)
        roles = [_Role(int(r), cfg, rng) for r in members]
        for _ in range(cfg.seqs_per_account):
            events = _sequence(roles, link, cfg, rng)
            sequences.append(MixedSequence(tuple((d, str(i)) for d, i in events)))
    train, valid, test = split_dataset(sequences, cfg.fractions, seed=cfg.seed)
    return Benchmark(train, valid, test, link, cfg)


def write_splits(out_dir, splits, stats=None):
    """Write ``train.txt``/``valid.txt``/``test.txt`` (and ``stats.txt``); returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, seqs in splits.items():
        paths[name] = os.path.join(out_dir, f"{name}.txt")
        write_sequences(paths[name], seqs)
    if stats is not None:
        paths["stats"] = os.path.join(out_dir, "stats.txt")
        atomic_write_text(paths["stats"], stats.render())
    return paths


def split_stats(splits, overlapped_users=0, accounts=0):
    everything = [s for seqs in splits.values() for s in seqs]
    return DatasetStats.of(
        everything,
        overlapped_users=overlapped_users,
        accounts=accounts,
        splits={k: len(v) for k, v in splits.items()},
    )


def generate_raw_users(n_users=200, seed=0, n_items_a=150, n_items_b=80, years=(1996, 2015), durations=False):
    """Per-user two-domain event logs with timestamps, for the simulators.

    Each user prefers a few item clusters and is active for one to three
    consecutive years; roughly a third of users are single-domain.
    """
    rng = np.random.default_rng([seed, 0x0DA7A])
    events = []
    for u in range(n_users):
        start = int(rng.integers(years[0], years[1] + 1))
        span = int(rng.integers(1, 4))
        t0 = int(_dt.datetime(start, 1, 1, tzinfo=_dt.timezone.utc).timestamp())
        t1 = int(_dt.datetime(min(start + span, years[1] + 1), 1, 1, tzinfo=_dt.timezone.utc).timestamp()) - 1
        n = int(rng.integers(15, 90))
        kind = rng.random()
        p_b = 0.0 if kind < 0.15 else 1.0 if kind < 0.3 else float(rng.uniform(0.2, 0.6))
        fav_a = rng.integers(n_items_a, size=6)
        fav_b = rng.integers(n_items_b, size=4)
        times = np.sort(rng.integers(t0, t1 + 1, size=n))
        for t in times:
            if rng.random() < p_b:
                dom = "B"
                item = int(fav_b[rng.integers(4)]) if rng.random() < 0.7 else int(rng.integers(n_items_b))
            else:
                dom = "A"
                item = int(fav_a[rng.integers(6)]) if rng.random() < 0.7 else int(rng.integers(n_items_a))
            dur = float(rng.integers(20, 3600)) if durations else None
            events.append(RawEvent(f"u{u:05d}", dom, str(item), int(t), dur))
    return events
