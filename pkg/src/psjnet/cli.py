"""Command-line interface: ``psjnet <subcommand> [flags]``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .errors import ConfigError, PSJNetError

log = logging.getLogger("psjnet")

# Defaults for every training flag; --help echoes these.
TRAIN_DEFAULTS = {
    "variant": "psjnet2",
    "k": 4,
    "hidden": 90,
    "keep_prob": 0.8,
    "lr": 0.001,
    "clip": (-5.0, 5.0),
    "batch": 64,
    "epochs": 30,
    "patience": 5,
    "seed": 0,
    "ablate": None,
    "share_role_transfer": False,
}

_CASTS = {
    "variant": str,
    "k": int,
    "hidden": int,
    "keep_prob": float,
    "lr": float,
    "batch": int,
    "epochs": int,
    "patience": int,
    "seed": int,
}


# --------------------------------------------------------------------------
# config files and flag resolution


def read_config_file(path):
    """``key=value`` lines; ``#`` starts a comment, keys use flag spelling with
    ``-`` or ``_``.  ``clip`` takes two numbers separated by space or comma."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key not in TRAIN_DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                if key == "clip":
                    lo, hi = value.replace(",", " ").split()
                    out[key] = (float(lo), float(hi))
                elif key == "ablate":
                    out[key] = None if value.lower() in ("", "none") else value
                elif key == "share_role_transfer":
                    out[key] = value.lower() in ("1", "true", "yes", "on")
                else:
                    out[key] = _CASTS[key](value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


def resolve_train_config(args):
    """Flags override the config file, which overrides the defaults."""
    from .trainer import TrainConfig

    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key, default in TRAIN_DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = tuple(flag) if key == "clip" else flag
        elif key in file_values:
            resolved[key] = file_values[key]
        else:
            resolved[key] = default
    if resolved["ablate"] == "none":
        resolved["ablate"] = None
    return TrainConfig(**resolved)


def threads():
    value = os.environ.get("PSJNET_THREADS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f"PSJNET_THREADS must be a positive integer, got {value!r}") from None


# --------------------------------------------------------------------------
# manifests


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    def __init__(self, command, argv):
        self.data = {
            "command": command,
            "argv": list(argv),
            "version": __version__,
            "config": {},
            "seed": None,
            "inputs": {},
            "outputs": {},
            "timings": {},
        }
        self._t0 = time.perf_counter()

    def config(self, cfg, seed=None):
        self.data["config"] = cfg
        self.data["seed"] = seed

    def input(self, path):
        if path:
            self.data["inputs"][os.path.abspath(path)] = sha256_file(path)

    def output(self, path):
        self.data["outputs"][os.path.abspath(path)] = sha256_file(path)

    def timing(self, name, seconds):
        self.data["timings"][name] = round(seconds, 6)

    def write(self, path):
        from .data.formats import atomic_write_text

        self.data["timings"]["wall_seconds"] = round(time.perf_counter() - self._t0, 6)
        atomic_write_text(path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def _manifest_path(args, directory, command):
    if args.manifest:
        return args.manifest
    return os.path.join(directory or ".", f"manifest.{command}.json")


# --------------------------------------------------------------------------
# shared helpers


def _load_split(path):
    from .data.formats import read_sequences

    seqs = read_sequences(path)
    if not seqs:
        raise PSJNetError(f"{path} contains no sequences")
    return seqs


def _vocabs(train_seqs):
    from .model.sequence import DOMAINS, Vocabulary

    return {dom: Vocabulary.from_sequences(dom, train_seqs) for dom in DOMAINS}


def _parse_cutoffs(text):
    try:
        ks = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"cutoffs must be comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive")
    return ks


def _fractions(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"fractions must be three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("fractions need exactly three values")
    return vals


def _train_model(train_seqs, valid_seqs, cfg, on_epoch=None):
    from .evaluation import prepare_cases
    from .model.sequence import encode
    from .trainer import train

    vocabs = _vocabs(train_seqs)
    encoded = [encode(s, vocabs)[0] for s in train_seqs]
    valid_cases = prepare_cases(valid_seqs, vocabs) if valid_seqs else None
    sizes = {dom: v.size for dom, v in vocabs.items()}
    params, history = train(encoded, valid_cases, cfg, sizes, on_epoch=on_epoch)
    return params, history, vocabs


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    from .data.synthetic import SynthConfig, make_synthetic_benchmark, split_stats, write_splits

    man = RunManifest("synth", args.argv)
    cfg = SynthConfig(
        n_accounts=args.accounts,
        n_roles=args.roles,
        items_per_role=args.items_per_role,
        n_items_b=args.items_b,
        seqs_per_account=args.seqs_per_account,
        signal=args.signal,
        noise=args.noise,
        stickiness=args.stickiness,
        fractions=args.fractions,
        seed=args.seed,
    )
    bench = make_synthetic_benchmark(cfg)
    stats = split_stats(bench.splits(), accounts=cfg.n_accounts)
    paths = write_splits(args.out, bench.splits(), stats)
    man.config(cfg.as_dict(), cfg.seed)
    for p in paths.values():
        man.output(p)
    man.write(_manifest_path(args, args.out, "synth"))
    sys.stdout.write(stats.render())
    return 0


def cmd_simulate(args):
    from .data.formats import read_raw_events
    from .data.simulate import SimConfig, simulate_shared_accounts
    from .data.split import split_dataset
    from .data.synthetic import generate_raw_users, split_stats, write_splits

    man = RunManifest("simulate", args.argv)
    if args.input:
        events = read_raw_events(args.input)
        man.input(args.input)
    else:
        events = generate_raw_users(args.demo_users, seed=args.seed)
    cfg = SimConfig(seed=args.seed, fractions=args.fractions)
    result = simulate_shared_accounts(events, cfg)
    splits = dict(zip(("train", "valid", "test"), split_dataset(result.sequences, cfg.fractions, cfg.seed)))
    stats = split_stats(splits, overlapped_users=result.stats.overlapped_users, accounts=result.stats.accounts)
    paths = write_splits(args.out, splits, stats)
    man.config({"fractions": list(cfg.fractions), "demo_users": None if args.input else args.demo_users}, cfg.seed)
    for p in paths.values():
        man.output(p)
    man.write(_manifest_path(args, args.out, "simulate"))
    sys.stdout.write(stats.render())
    return 0


def cmd_preprocess(args):
    from .data.formats import read_raw_events
    from .data.preprocess import preprocess_logs
    from .data.split import split_dataset
    from .data.synthetic import split_stats, write_splits

    man = RunManifest("preprocess", args.argv)
    events = read_raw_events(args.input)
    man.input(args.input)
    seqs = preprocess_logs(events)
    splits = dict(zip(("train", "valid", "test"), split_dataset(seqs, args.fractions, args.seed)))
    stats = split_stats(splits, accounts=len({e.user for e in events}))
    paths = write_splits(args.out, splits, stats)
    man.config({"fractions": list(args.fractions)}, args.seed)
    for p in paths.values():
        man.output(p)
    man.write(_manifest_path(args, args.out, "preprocess"))
    sys.stdout.write(stats.render())
    return 0


def cmd_train(args):
    from .data.formats import atomic_write_text
    from .model.checkpoint import Checkpoint, save

    cfg = resolve_train_config(args)
    if cfg.keep_prob != 1.0:
        log.info("dropout: keeping each unit with probability %.2f (--keep-prob)", cfg.keep_prob)
    man = RunManifest("train", args.argv)
    man.config(cfg.as_dict(), cfg.seed)
    train_seqs = _load_split(args.train)
    man.input(args.train)
    valid_seqs = []
    if args.valid:
        valid_seqs = _load_split(args.valid)
        man.input(args.valid)
    t0 = time.perf_counter()
    params, history, vocabs = _train_model(train_seqs, valid_seqs, cfg)
    man.timing("train_seconds", time.perf_counter() - t0)
    ckpt = Checkpoint(params, cfg.model_config(), vocabs, cfg.as_dict())
    save(args.checkpoint, ckpt)
    hist_path = args.history or os.path.splitext(args.checkpoint)[0] + ".history.csv"
    atomic_write_text(hist_path, history.to_csv())
    man.output(args.checkpoint)
    man.output(hist_path)
    man.write(_manifest_path(args, os.path.dirname(os.path.abspath(args.checkpoint)), "train"))
    sys.stdout.write(history.to_csv())
    return 0


def _evaluate_checkpoint(ckpt, test_seqs, cutoffs):
    from .evaluation import evaluate_model, prepare_cases

    if ckpt.vocabs is None:
        raise PSJNetError("checkpoint has no vocabulary; cannot map item ids")
    cases = prepare_cases(test_seqs, ckpt.vocabs)
    return evaluate_model(ckpt.params, ckpt.model_config, cases, cutoffs)


def cmd_evaluate(args):
    from .errors import DegenerateTestError
    from .evaluation import evaluate_pop, prepare_cases, paired_t_test
    from .model.checkpoint import load
    from .model.sequence import DOMAINS, encode

    man = RunManifest("evaluate", args.argv)
    ckpt = load(args.checkpoint)
    man.input(args.checkpoint)
    test_seqs = _load_split(args.test)
    man.input(args.test)
    man.config({"cutoffs": list(args.cutoffs), "model": ckpt.model_config.as_dict()}, None)
    report = _evaluate_checkpoint(ckpt, test_seqs, args.cutoffs)
    out = [report.table(f"Results (%) for {os.path.basename(args.checkpoint)}"), report.key_values()]
    if args.pop_train:
        train_seqs = _load_split(args.pop_train)
        man.input(args.pop_train)
        encoded = [encode(s, ckpt.vocabs, drop_unknown=True)[0] for s in train_seqs]
        pop = evaluate_pop(encoded, ckpt.vocab_sizes, prepare_cases(test_seqs, ckpt.vocabs), args.cutoffs)
        out.append(pop.table("POP (%)"))
    if args.compare:
        other_ckpt = load(args.compare)
        man.input(args.compare)
        other = _evaluate_checkpoint(other_ckpt, test_seqs, args.cutoffs)
        lines = [f"Paired t-test: {os.path.basename(args.checkpoint)} vs {os.path.basename(args.compare)}"]
        for dom in DOMAINS:
            if report.n(dom) != other.n(dom):
                raise PSJNetError(f"domain {dom}: case counts differ ({report.n(dom)} vs {other.n(dom)}); vocabularies disagree")
            for k in args.cutoffs:
                for name, fn in (("Recall", "hits"), ("MRR", "reciprocal_ranks")):
                    x, y = getattr(report, fn)(dom, k), getattr(other, fn)(dom, k)
                    try:
                        res = paired_t_test(x, y)
                        verdict = "significant" if res.significant else "not significant"
                        lines.append(f"  {dom}-domain {name}@{k}: t={res.t:.4f} p={res.p:.4g} ({verdict})")
                    except (DegenerateTestError, ValueError) as exc:
                        lines.append(f"  {dom}-domain {name}@{k}: n/a ({exc})")
        out.append("\n".join(lines) + "\n")
    text = "\n".join(out)
    if args.output:
        from .data.formats import atomic_write_text

        atomic_write_text(args.output, text)
        man.output(args.output)
    sys.stdout.write(text)
    man.write(_manifest_path(args, os.path.dirname(os.path.abspath(args.checkpoint)), "evaluate"))
    return 0


def cmd_recommend(args):
    import numpy as np

    from .data.formats import parse_sequence_line
    from .errors import ParseError
    from .model.checkpoint import load
    from .model.network import score_batch
    from .model.sequence import DOMAINS, encode, make_batch

    line = args.sequence if args.sequence is not None else sys.stdin.readline()
    line = line.rstrip("\n")
    if not line.strip():
        raise PSJNetError("recommend needs a non-empty sequence such as 'A:12<TAB>B:4'")
    try:
        seq = parse_sequence_line(line)
    except ParseError:
        # allow spaces as separators on the command line
        seq = parse_sequence_line("\t".join(line.split()))
    ckpt = load(args.checkpoint)
    if ckpt.vocabs is None:
        raise PSJNetError("checkpoint has no vocabulary; cannot map item ids")
    enc, dropped = encode(seq, ckpt.vocabs, drop_unknown=True)
    if dropped:
        log.warning("%d unknown item(s) ignored", dropped)
    if len(enc) == 0:
        raise PSJNetError("no known items in the sequence")
    scores = score_batch(ckpt.params, make_batch([enc], "final"), ckpt.model_config)
    for dom in DOMAINS:
        s = scores[dom][0, 0]
        order = np.lexsort((np.arange(s.size), -s))[: args.topk]
        items = " ".join(str(ckpt.vocabs[dom].id(int(i))) for i in order)
        sys.stdout.write(f"{dom}\t{items}\n")
    man = RunManifest("recommend", args.argv)
    man.input(args.checkpoint)
    man.config({"topk": args.topk, "sequence": line}, None)
    man.write(_manifest_path(args, os.path.dirname(os.path.abspath(args.checkpoint)), "recommend"))
    return 0


def _sweep_one(job):
    k, cfg_dict, train_seqs, valid_seqs, test_seqs, cutoffs = job
    from .trainer import TrainConfig

    cfg = TrainConfig.from_dict({**cfg_dict, "k": k})
    from .model.checkpoint import Checkpoint

    params, _, vocabs = _train_model(train_seqs, valid_seqs, cfg)
    ckpt = Checkpoint(params, cfg.model_config(), vocabs, cfg.as_dict())
    return k, _evaluate_checkpoint(ckpt, test_seqs, cutoffs)


def sweep_table(reports, cutoffs):
    from .model.sequence import DOMAINS

    cols = [f"{m}@{c}" for c in cutoffs for m in ("MRR", "Recall")]
    lines = []
    for dom in DOMAINS:
        head = f"{dom + '-domain':<10}" + "".join(f"{c:>11}" for c in cols)
        lines += [head, "-" * len(head)]
        for k in sorted(reports):
            r = reports[k]
            vals = []
            for c in cutoffs:
                vals += [100 * r.mrr(dom, c), 100 * r.recall(dom, c)]
            lines.append(f"{'K=' + str(k):<10}" + "".join(f"{v:>11.2f}" for v in vals))
        lines.append("")
    return "\n".join(lines)


def cmd_sweep_k(args):
    cfg = resolve_train_config(args)
    man = RunManifest("sweep-k", args.argv)
    man.config({**cfg.as_dict(), "ks": list(args.ks), "cutoffs": list(args.cutoffs)}, cfg.seed)
    train_seqs, valid_seqs, test_seqs = _load_split(args.train), _load_split(args.valid), _load_split(args.test)
    for p in (args.train, args.valid, args.test):
        man.input(p)
    jobs = [(k, cfg.as_dict(), train_seqs, valid_seqs, test_seqs, args.cutoffs) for k in args.ks]
    workers = min(threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    text = sweep_table(dict(results), args.cutoffs)
    if args.output:
        from .data.formats import atomic_write_text

        atomic_write_text(args.output, text)
        man.output(args.output)
    sys.stdout.write(text)
    man.write(_manifest_path(args, os.path.dirname(os.path.abspath(args.output or ".")), "sweep-k"))
    return 0


# --------------------------------------------------------------------------
# parser


def _ks(text):
    ks = _parse_cutoffs(text)
    return ks


def _add_train_flags(p):
    d = TRAIN_DEFAULTS
    g = p.add_argument_group("model and optimisation (flags > --config file > defaults)")
    g.add_argument("--config", metavar="PATH", help="key=value file with any of the flags below")
    g.add_argument("--variant", choices=("psjnet1", "psjnet2"), help=f"model variant (default {d['variant']})")
    g.add_argument("--k", type=int, metavar="INT", help=f"number of latent roles K (default {d['k']})")
    g.add_argument("--hidden", type=int, metavar="INT", help=f"embedding and hidden size (default {d['hidden']})")
    g.add_argument(
        "--keep-prob",
        type=float,
        metavar="FLOAT",
        help=f"dropout keep probability (default {d['keep_prob']}; use 0.2 for a drop probability of 0.8)",
    )
    g.add_argument("--lr", type=float, metavar="FLOAT", help=f"Adam learning rate (default {d['lr']})")
    g.add_argument(
        "--clip", type=float, nargs=2, metavar=("LO", "HI"), help="element-wise gradient clip range (default -5 5)"
    )
    g.add_argument("--batch", type=int, metavar="INT", help=f"mini-batch size (default {d['batch']})")
    g.add_argument("--epochs", type=int, metavar="INT", help=f"maximum epochs (default {d['epochs']})")
    g.add_argument(
        "--patience", type=int, metavar="INT", help=f"early-stop patience in epochs, 0 disables (default {d['patience']})"
    )
    g.add_argument("--seed", type=int, metavar="INT", help=f"random seed (default {d['seed']})")
    g.add_argument(
        "--ablate",
        choices=("psj", "sj", "s", "j", "none"),
        help="ablation: psj (no cross-domain part), sj (psjnet1 without split/join), "
        "s (psjnet2 without split), j (psjnet2 without join); default none",
    )
    g.add_argument(
        "--share-role-transfer",
        action="store_true",
        default=None,
        help="psjnet2: one transfer GRU shared by all roles (default: one per role)",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="psjnet",
        description="Shared-account cross-domain sequential recommendation.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"psjnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.add_argument("--manifest", metavar="PATH", help="where to write the run manifest (default: next to the outputs)")
        return p

    p = add("synth", "generate the planted-role synthetic benchmark")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--accounts", type=int, default=64, help="number of shared accounts")
    p.add_argument("--roles", type=int, default=8, help="number of latent roles overall")
    p.add_argument("--items-per-role", type=int, default=10, help="A items per role")
    p.add_argument("--items-b", type=int, default=40, help="B catalogue size")
    p.add_argument("--seqs-per-account", type=int, default=4, help="sequences per account")
    p.add_argument("--signal", type=float, default=1.0, help="probability that a B item follows its role's latest A item")
    p.add_argument("--noise", type=float, default=0.05, help="probability of a random A item within the role's block")
    p.add_argument("--stickiness", type=float, default=0.85, help="probability the acting role continues")
    p.add_argument("--fractions", type=_fractions, default=(0.75, 0.15, 0.10), help="train,valid,test fractions")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_synth)

    p = add("simulate", "build shared accounts from per-user two-domain logs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH", help="raw events TSV: user, domain, item, unix seconds")
    src.add_argument("--demo-users", type=int, metavar="N", help="simulate from N generated users instead")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--fractions", type=_fractions, default=(0.75, 0.15, 0.10), help="train,valid,test fractions")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_simulate)

    p = add("preprocess", "turn raw watch logs with durations into sequences")
    p.add_argument("--input", required=True, metavar="PATH", help="raw events TSV with a duration column")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--fractions", type=_fractions, default=(0.75, 0.15, 0.10), help="train,valid,test fractions")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_preprocess)

    p = add("train", "train a model and write a checkpoint and history")
    p.add_argument("--train", required=True, metavar="PATH", help="training sequences")
    p.add_argument("--valid", metavar="PATH", help="validation sequences (early stopping)")
    p.add_argument("--checkpoint", required=True, metavar="PATH", help="checkpoint to write")
    p.add_argument("--history", metavar="PATH", help="history CSV (default: <checkpoint>.history.csv)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = add("evaluate", "Recall@k / MRR@k of a checkpoint on a test split")
    p.add_argument("--checkpoint", required=True, metavar="PATH", help="checkpoint to evaluate")
    p.add_argument("--test", required=True, metavar="PATH", help="test sequences")
    p.add_argument("--cutoffs", type=_parse_cutoffs, default=(5, 10, 20), help="comma-separated cutoffs")
    p.add_argument("--compare", metavar="PATH", help="second checkpoint for a paired t-test")
    p.add_argument("--pop-train", metavar="PATH", help="also report the POP baseline counted on these sequences")
    p.add_argument("--output", metavar="PATH", help="also write the report here")
    p.set_defaults(func=cmd_evaluate)

    p = add("recommend", "top-k items per domain for one sequence")
    p.add_argument("--checkpoint", required=True, metavar="PATH", help="checkpoint to use")
    p.add_argument("--sequence", metavar="LINE", help="sequence line (default: read one line from stdin)")
    p.add_argument("--topk", type=int, default=10, help="items to list per domain")
    p.set_defaults(func=cmd_recommend)

    p = add("sweep-k", "train and evaluate psjnet for several role counts K")
    p.add_argument("--train", required=True, metavar="PATH", help="training sequences")
    p.add_argument("--valid", required=True, metavar="PATH", help="validation sequences")
    p.add_argument("--test", required=True, metavar="PATH", help="test sequences")
    p.add_argument("--ks", type=_ks, default=(1, 2, 3, 4, 5), help="comma-separated role counts")
    p.add_argument("--cutoffs", type=_parse_cutoffs, default=(5, 10, 20), help="comma-separated cutoffs")
    p.add_argument("--output", metavar="PATH", help="also write the grid here")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep_k)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    args.argv = argv
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if getattr(args, "topk", 1) < 1:
            raise ConfigError("--topk must be >= 1")
        return args.func(args)
    except (PSJNetError, OSError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"psjnet {args.command}: error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
