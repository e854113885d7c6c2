import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psjnet.data import (
    PreprocessRules,
    RawEvent,
    SimConfig,
    SynthConfig,
    format_sequence,
    generate_raw_users,
    make_synthetic_benchmark,
    parse_sequence_line,
    preprocess_logs,
    read_raw_events,
    read_sequences,
    simulate_shared_accounts,
    split_dataset,
    write_raw_events,
    write_sequences,
)
from psjnet.data.simulate import frequent_items, merge_adjacent_duplicates
from psjnet.data.split import split_sizes
from psjnet.errors import ConfigError, FormatError, ParseError, SimulationError, SplitError
from psjnet.model.sequence import MixedSequence

item_ids = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Z", "Cc"), blacklist_characters=":"), min_size=1, max_size=8)
sequences = st.lists(st.tuples(st.sampled_from("AB"), item_ids), min_size=1, max_size=40).map(
    lambda ev: MixedSequence(tuple(ev))
)


# --------------------------------------------------------------------------
# sequence file format


def test_parse_example():
    seq = parse_sequence_line("A:12\tB:4\tA:7\n")
    assert seq.events == (("A", "12"), ("B", "4"), ("A", "7"))
    assert (seq.n_a, seq.n_b) == (2, 1)
    assert seq.ground_truth("A") == "7" and seq.ground_truth("B") == "4"
    assert seq.without_ground_truths().events == (("A", "12"),)


@pytest.mark.parametrize(
    "line, column",
    [("", 1), ("A:1\tC:2", 5), ("A:1\tB2", 5), ("A:1\tB:", 7), ("A:1\t\tB:2", 5)],
)
def test_parse_errors_carry_column(line, column):
    with pytest.raises(ParseError) as exc:
        parse_sequence_line(line)
    assert exc.value.column == column


@settings(max_examples=300)
@given(sequences)
def test_format_parse_round_trip(seq):
    line = format_sequence(seq)
    assert parse_sequence_line(line) == seq
    assert format_sequence(parse_sequence_line(line)) == line


def test_format_rejects_unwritable():
    with pytest.raises(FormatError):
        format_sequence(MixedSequence((("A", "a b"),)))
    with pytest.raises(FormatError):
        format_sequence(MixedSequence(()))


def test_sequence_file_round_trip(tmp_path):
    seqs = [parse_sequence_line("A:1\tB:2\tA:3"), parse_sequence_line("B:x\tA:y")]
    path = tmp_path / "s.txt"
    write_sequences(path, seqs)
    assert read_sequences(path) == seqs
    assert path.read_bytes() == b"A:1\tB:2\tA:3\nB:x\tA:y\n"


def test_sequence_file_error_names_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("A:1\tB:2\nA:1\tQ:2\n")
    with pytest.raises(ParseError, match=":2:"):
        read_sequences(path)


def test_raw_event_round_trip(tmp_path):
    events = [RawEvent("u1", "A", "7", 100, 12.5), RawEvent("u2", "B", "x", 0)]
    path = tmp_path / "raw.tsv"
    write_raw_events(path, events)
    assert read_raw_events(path) == events


def test_raw_event_validation(tmp_path):
    with pytest.raises(FormatError):
        RawEvent("u", "C", "1", 0)
    with pytest.raises(FormatError):
        RawEvent("u", "A", "1", -1)
    path = tmp_path / "raw.tsv"
    path.write_text("u\tA\t1\n")
    with pytest.raises(FormatError, match=":1:"):
        read_raw_events(path)


# --------------------------------------------------------------------------
# shared-account simulator


@pytest.fixture(scope="module")
def simulated():
    return simulate_shared_accounts(generate_raw_users(200, seed=0))


def test_simulated_sequence_invariants(simulated):
    assert len(simulated.sequences) > 20
    for seq in simulated.sequences:
        assert 4 <= len(seq) <= 60
        assert seq.n_a >= 5 and seq.n_b >= 2
    assert all(2 <= len(users) <= 4 for users in simulated.accounts.values())
    assert set(simulated.sequence_accounts) <= set(simulated.accounts)


def test_simulated_users_belong_to_one_account_per_interval(simulated):
    seen = Counter(u for users in simulated.accounts.values() for u in users)
    assert max(seen.values()) <= len(SimConfig().intervals)


def test_simulated_splits(simulated):
    n = len(simulated.sequences)
    parts = split_dataset(simulated.sequences, seed=3)
    for part, frac in zip(parts, (0.75, 0.15, 0.10)):
        assert abs(len(part) - n * frac) <= 1


def test_simulation_is_byte_identical(tmp_path):
    paths = []
    for run in range(2):
        res = simulate_shared_accounts(generate_raw_users(200, seed=0))
        paths.append(tmp_path / f"run{run}.txt")
        write_sequences(paths[-1], res.sequences)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_merged_account_is_union_of_members():
    t0 = 946684800  # 2000-01-01 UTC
    events = [RawEvent("u1", "AB"[i % 3 == 2], f"p{i}", t0 + 10 * i) for i in range(12)]
    events += [RawEvent("u2", "AB"[i % 3 == 2], f"q{i}", t0 + 10 * i + 5) for i in range(12)]
    cfg = SimConfig(
        intervals=((2000, 2000),), group_sizes=(2,), freq_floor_a=0, freq_floor_b=0,
        min_user_records=0, min_a=1, min_b=1, min_length=1,
    )
    res = simulate_shared_accounts(events, cfg)
    assert [sorted(g) for g in res.accounts.values()] == [["u1", "u2"]]
    (seq,) = res.sequences
    assert Counter(seq.events) == Counter((e.domain, e.item) for e in events)
    # chronological interleaving of the two members
    assert [it[0] for _, it in seq.events] == ["p", "q"] * 12


def test_over_long_slices_keep_most_recent_events():
    t0 = 946684800
    events = [RawEvent(u, "AB"[i % 2], f"{u}-{i}", t0 + 10 * i) for u in ("u1", "u2") for i in range(50)]
    cfg = SimConfig(intervals=((2000, 2000),), group_sizes=(2,), freq_floor_a=0, freq_floor_b=0, min_user_records=0)
    (seq,) = simulate_shared_accounts(events, cfg).sequences
    assert len(seq) == 60
    assert seq.events[-1] == ("B", "u2-49")


@pytest.mark.parametrize(
    "stage, events, cfg",
    [
        ("input", "empty", SimConfig()),
        ("frequency", "raw", SimConfig(freq_floor_a=10**6, freq_floor_b=10**6)),
        ("cross-domain", "a-only", SimConfig()),
        ("grouping", "raw", SimConfig(group_sizes=(10**6,))),
        ("constraints", "raw", SimConfig(min_a=61)),
    ],
)
def test_simulation_error_names_stage(stage, events, cfg):
    raw = generate_raw_users(60, seed=1)
    events = {"empty": [], "raw": raw, "a-only": [e for e in raw if e.domain == "A"]}[events]
    with pytest.raises(SimulationError) as exc:
        simulate_shared_accounts(events, cfg)
    assert exc.value.stage == stage


def test_merge_adjacent_duplicates():
    tl = [RawEvent("u", d, i, t) for t, (d, i) in enumerate([("A", "1"), ("A", "1"), ("B", "1"), ("A", "1"), ("A", "2")])]
    assert [(e.domain, e.item) for e in merge_adjacent_duplicates(tl)] == [("A", "1"), ("B", "1"), ("A", "1"), ("A", "2")]


raw_events = st.lists(
    st.builds(
        RawEvent,
        user=st.sampled_from(["u1", "u2", "u3"]),
        domain=st.sampled_from("AB"),
        item=st.sampled_from(["1", "2", "3", "4"]),
        timestamp=st.integers(0, 50),
    ),
    max_size=40,
)


@given(raw_events, raw_events, st.integers(0, 3), st.integers(0, 3))
def test_frequency_filter_is_monotone(base, extra, floor_a, floor_b):
    cfg = SimConfig(freq_floor_a=floor_a, freq_floor_b=floor_b)
    assert frequent_items(base, cfg) <= frequent_items(base + extra, cfg)


# --------------------------------------------------------------------------
# watch-log preprocessing


def plays(user, domains, start=0, gap=1000, duration=100.0, prefix=None):
    prefix = prefix or user
    return [RawEvent(user, d, f"{prefix}{i}", start + gap * i, duration) for i, d in enumerate(domains)]


def test_preprocess_drops_small_users():
    rules = PreprocessRules(min_per_domain=1)
    keep = plays("good", "AB" * 5)
    few = plays("few", "AB" * 4 + "A")
    out = preprocess_logs(keep + few, rules)
    assert len(out) == 1 and out[0].events[0] == ("A", "good0")


def test_preprocess_drops_short_watch_time():
    rules = PreprocessRules(min_per_domain=1)
    short = plays("short", "AB" * 5, duration=29.9)
    enough = plays("enough", "AB" * 5, duration=30.0)
    out = preprocess_logs(short + enough, rules)
    assert [s.events[0][1] for s in out] == ["enough0"]


def test_preprocess_merges_close_replays():
    rules = PreprocessRules(min_per_domain=1)
    base = plays("u", "AB" * 5)
    replay = [RawEvent("u", "B", "u9", base[-1].timestamp + 300, 50.0)]
    late = [RawEvent("u", "B", "u9", base[-1].timestamp + 300 + 600, 50.0)]
    (merged,) = preprocess_logs(base + replay, rules)
    assert len(merged) == 10
    (kept,) = preprocess_logs(base + replay + late, rules)
    assert len(kept) == 11


def test_preprocess_domain_minimum():
    six = plays("six", "A" * 6 + "B" * 24)
    five = plays("five", "A" * 5 + "B" * 25)
    out = preprocess_logs(six + five)
    assert len(out) == 1 and (out[0].n_a, out[0].n_b) == (6, 24)
    with pytest.raises(SimulationError) as exc:
        preprocess_logs(five)
    assert exc.value.stage == "preprocess"


def test_preprocess_slices():
    (first, second) = preprocess_logs(plays("u", "AB" * 25))
    assert (len(first), len(second)) == (30, 20)
    # a 10-event tail has only five of each domain
    assert len(preprocess_logs(plays("u", "AB" * 20))) == 1
    assert first.events[-1] == ("B", "u29") and second.events[0] == ("A", "u30")


def test_preprocess_requires_durations():
    with pytest.raises(FormatError):
        preprocess_logs([RawEvent("u", "A", "1", 0)])


def test_preprocess_raw_users_end_to_end():
    out = preprocess_logs(generate_raw_users(100, seed=2, durations=True))
    assert out and all(len(s) <= 30 and s.n_a >= 6 and s.n_b >= 6 for s in out)


# --------------------------------------------------------------------------
# splits


def test_split_example():
    seqs = [MixedSequence((("A", str(i)),)) for i in range(100)]
    train, valid, test = split_dataset(seqs, seed=0)
    assert (len(train), len(valid), len(test)) == (75, 15, 10)
    assert sorted(train + valid + test, key=lambda s: int(s.events[0][1])) == seqs
    assert split_dataset(seqs, seed=0) == (train, valid, test)
    assert split_dataset(seqs, seed=1) != (train, valid, test)


def test_split_all_train():
    seqs = [MixedSequence((("A", "1"),))] * 5
    assert split_dataset(seqs, (1, 0, 0)) == (seqs, [], [])


def test_split_errors():
    with pytest.raises(SplitError):
        split_dataset([MixedSequence((("A", "1"),))] * 2)
    with pytest.raises(ConfigError):
        split_dataset([], (0.5, 0.6, -0.1))
    with pytest.raises(ConfigError):
        split_dataset([], (0.5, 0.5))


@given(st.integers(0, 2000), st.lists(st.integers(0, 100), min_size=3, max_size=3).filter(any))
def test_split_sizes_apportion(n, weights):
    fractions = [w / sum(weights) for w in weights]
    sizes = split_sizes(n, fractions)
    assert sum(sizes) == n
    assert all(abs(s - n * f) < 1 for s, f in zip(sizes, fractions))


# --------------------------------------------------------------------------
# planted-role synthetic benchmark


@pytest.mark.parametrize("signal", [-0.1, 1.5, math.nan])
def test_signal_out_of_range(signal):
    with pytest.raises(ConfigError):
        SynthConfig(signal=signal)


def test_benchmark_invariants():
    bench = make_synthetic_benchmark()
    everything = bench.train + bench.valid + bench.test
    assert len(everything) == 64 * 4
    assert (len(bench.train), len(bench.valid), len(bench.test)) == tuple(split_sizes(256, (0.75, 0.15, 0.10)))
    for seq in everything:
        assert 12 <= len(seq) <= 30 and seq.n_a >= 5 and seq.n_b >= 2
        assert seq.events[-2][0] == "B" and seq.events[-1][0] == "A"
    assert make_synthetic_benchmark().splits() == bench.splits()


def a_to_b_pairs(bench):
    """``(preceding A item, B item)`` for every B event that has an A event before it."""
    pairs = []
    for seq in bench.train + bench.valid + bench.test:
        last_a = None
        for d, it in seq.events:
            if d == "A":
                last_a = int(it)
            elif last_a is not None:
                pairs.append((last_a, int(it)))
    return np.array(pairs)


def plug_in_mutual_information(x, y):
    joint = Counter(zip(x.tolist(), y.tolist()))
    px, py = Counter(x.tolist()), Counter(y.tolist())
    n = len(x)
    return sum(c / n * math.log(c * n / (px[a] * py[b])) for (a, b), c in joint.items())


def test_full_signal_single_role_is_deterministic():
    bench = make_synthetic_benchmark(SynthConfig(roles_per_account=(1, 1), signal=1.0))
    pairs = a_to_b_pairs(bench)
    assert len(pairs) > 500
    assert np.array_equal(pairs[:, 1], bench.link[pairs[:, 0]])


def test_zero_signal_carries_no_information():
    cfg = SynthConfig(roles_per_account=(1, 1), signal=0.0)
    bench = make_synthetic_benchmark(cfg)
    a, b = a_to_b_pairs(bench).T
    hits = np.mean(b == bench.link[a])
    p = 1 / cfg.n_items_b
    assert abs(hits - p) <= 4 * math.sqrt(p * (1 - p) / len(a))
    # plug-in MI is biased upward, so compare against a permutation null
    rng = np.random.default_rng(0)
    observed = plug_in_mutual_information(a, b)
    null = np.array([plug_in_mutual_information(a, rng.permutation(b)) for _ in range(200)])
    assert observed <= null.mean() + 4 * null.std()
    informative = make_synthetic_benchmark(SynthConfig(roles_per_account=(1, 1), signal=1.0))
    assert plug_in_mutual_information(*a_to_b_pairs(informative).T) > null.mean() + 20 * null.std()
