"""Initialisation, Adam with element-wise clipping, dropout and the training loop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import numkernel as nk
from .errors import ConfigError, NumericsError, ShapeError, TrainingError
from .model.network import batch_loss, forward, nll, register
from .model.params import ModelConfig, is_bias, param_shapes
from .model.sequence import make_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    hidden: int = 90
    keep_prob: float = 0.8
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: tuple = (-5.0, 5.0)
    batch: int = 64
    epochs: int = 30
    patience: int = 5
    seed: int = 0
    k: int = 4
    variant: str = "psjnet2"
    ablate: str | None = None
    share_role_transfer: bool = False

    def __post_init__(self):
        self.clip = tuple(float(c) for c in self.clip)
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigError(f"keep probability must be in (0, 1], got {self.keep_prob}")
        if not self.clip[0] < self.clip[1]:
            raise ConfigError(f"clip range must satisfy lo < hi, got {self.clip}")
        if self.batch < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch}")
        if self.lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.lr}")
        self.model_config()

    def model_config(self):
        return ModelConfig(
            variant=self.variant,
            k=self.k,
            hidden=self.hidden,
            ablate=self.ablate,
            share_role_transfer=self.share_role_transfer,
        )

    def as_dict(self):
        d = asdict(self)
        d["clip"] = list(self.clip)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


# --------------------------------------------------------------------------
# initialisation


def xavier_init(shape, seed):
    """Glorot-uniform tensor; fans come from the trailing two dims (vectors use their length)."""
    shape = tuple(shape)
    if len(shape) == 0 or any(s <= 0 for s in shape):
        raise ShapeError(f"xavier_init needs a non-empty shape, got {shape}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_out, fan_in = shape[-2], shape[-1]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_params(cfg, vocab_sizes, seed):
    """Fresh parameters for ``cfg`` (a ModelConfig); biases start at zero."""
    rng = np.random.default_rng([seed, 0x5EED])
    params = {}
    for name, shape in param_shapes(cfg, vocab_sizes).items():
        params[name] = np.zeros(shape) if is_bias(name) else xavier_init(shape, rng)
    return params


# --------------------------------------------------------------------------
# optimisation


def clip_gradients(grads, lo=-5.0, hi=5.0):
    if not lo < hi:
        raise ConfigError(f"clip range must satisfy lo < hi, got ({lo}, {hi})")
    return {k: np.clip(g, lo, hi) for k, g in grads.items()}


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state, config):
    """In-place Adam update of ``params``; returns ``(params, state)``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[name] -= config.lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return params, state


def apply_dropout(h, keep_prob, training, rng):
    """Inverted dropout on a tensor or array; identity outside training."""
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError(f"keep probability must be in (0, 1], got {keep_prob}")
    if not training or keep_prob == 1.0:
        return h
    shape = h.shape
    mask = (rng.random(shape) < keep_prob) / keep_prob
    if isinstance(h, nk.Tensor):
        return h * h.tape.const(mask)
    return h * mask


# --------------------------------------------------------------------------
# training loop


def make_batches(n_items, lengths, batch_size, rng, pool=8):
    """Shuffled, length-bucketed index batches.

    Indices are shuffled, cut into pools of ``pool * batch_size``, sorted by
    length inside each pool and chunked; batch order is shuffled again.
    """
    order = rng.permutation(n_items)
    batches = []
    span = pool * batch_size
    for start in range(0, n_items, span):
        chunk = order[start : start + span]
        chunk = chunk[np.argsort(np.asarray(lengths)[chunk], kind="stable")]
        batches.extend(chunk[i : i + batch_size] for i in range(0, len(chunk), batch_size))
    perm = rng.permutation(len(batches))
    return [batches[i] for i in perm]


@dataclass
class History:
    rows: list = field(default_factory=list)

    HEADER = "epoch,train_loss,val_mrr20_A,val_mrr20_B,wall_seconds"

    def add(self, epoch, loss, mrr_a, mrr_b, wall):
        self.rows.append((epoch, loss, mrr_a, mrr_b, wall))

    def to_csv(self):
        lines = [self.HEADER]
        lines += [f"{e},{l:.6f},{a:.6f},{b:.6f},{w:.3f}" for e, l, a, b, w in self.rows]
        return "\n".join(lines) + "\n"


def train_step(params, state, seqs, config, rng, mcfg=None):
    """One forward/backward/clip/Adam step on a list of encoded sequences."""
    mcfg = mcfg or config.model_config()
    batch = make_batch(seqs, "train")

    def drop(t):
        return apply_dropout(t, config.keep_prob, True, rng)

    loss, _ = batch_loss(params, batch, mcfg, drop=drop)
    grads = nk.backward(loss.tape, loss)
    loss.tape.release()
    grads = clip_gradients(grads, *config.clip)
    adam_step(params, grads, state, config)
    return float(loss.data)


def train(train_seqs, valid_seqs, config, vocab_sizes, on_epoch=None):
    """Train on encoded sequences; returns ``(best_params, history)``.

    Every epoch shuffles and buckets the training set, then validation MRR@20
    per domain is measured; the parameters with the best summed validation
    MRR are kept and training stops after ``patience`` epochs without
    improvement.
    """
    from .evaluation import evaluate_model

    train_seqs = [s for s in train_seqs if s.targets("A") or s.targets("B")]
    if not train_seqs:
        raise TrainingError("training set has no sequences with targets", epoch=0)
    mcfg = config.model_config()
    params = init_params(mcfg, vocab_sizes, config.seed)
    state = OptimizerState()
    shuffle_rng = np.random.default_rng([config.seed, 1])
    drop_rng = np.random.default_rng([config.seed, 2])
    history = History()
    best = (-math.inf, {k: v.copy() for k, v in params.items()})
    stale = 0
    lengths = [len(s) for s in train_seqs]
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        losses = []
        for b, idx in enumerate(make_batches(len(train_seqs), lengths, config.batch, shuffle_rng)):
            seqs = [train_seqs[i] for i in idx]
            loss = train_step(params, state, seqs, config, drop_rng, mcfg)
            if not math.isfinite(loss):
                raise TrainingError("loss diverged", epoch=epoch, batch=b)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        if valid_seqs:
            report = evaluate_model(params, mcfg, valid_seqs, cutoffs=(20,))
            mrr_a, mrr_b = report.mrr("A", 20), report.mrr("B", 20)
        else:
            mrr_a = mrr_b = float("nan")
        wall = time.perf_counter() - t0
        history.add(epoch, train_loss, mrr_a, mrr_b, wall)
        log.info("epoch %d loss %.4f val MRR@20 A %.4f B %.4f (%.1fs)", epoch, train_loss, mrr_a, mrr_b, wall)
        if on_epoch is not None:
            on_epoch(epoch, params, train_loss)
        score = (mrr_a + mrr_b) if valid_seqs else -train_loss
        if score > best[0]:
            best = (score, {k: v.copy() for k, v in params.items()})
            stale = 0
        else:
            stale += 1
            if config.patience and stale >= config.patience:
                break
    return best[1], history


__all__ = [
    "TrainConfig",
    "OptimizerState",
    "History",
    "xavier_init",
    "init_params",
    "clip_gradients",
    "adam_step",
    "apply_dropout",
    "make_batches",
    "train_step",
    "train",
    "forward",
    "nll",
    "register",
]
