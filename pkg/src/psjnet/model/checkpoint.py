"""Single-file checkpoints: a JSON header followed by raw float64 tensors.

Layout::

    PSJNET-CKPT 1\n
    <header byte length, 12 decimal digits>\n
    <header: compact JSON, sorted keys>\n
    <each tensor in header order, little-endian float64, C order>

Everything that goes into the file is canonicalised (sorted keys, fixed
separators, ids as strings), so saving a loaded checkpoint reproduces the
original bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from ..errors import CheckpointError, ConfigError
from .params import ModelConfig, param_shapes
from .sequence import DOMAINS, Vocabulary

MAGIC = b"PSJNET-CKPT 1\n"
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    params: dict
    model_config: ModelConfig
    vocabs: dict | None = None
    train_config: dict | None = None

    @property
    def vocab_sizes(self):
        return {dom: self.params[f"emb.{dom}"].shape[0] for dom in DOMAINS}


def _header(ckpt):
    vocab = None
    if ckpt.vocabs is not None:
        vocab = {
            dom: {"ids": [str(i) for i in ckpt.vocabs[dom].ids], "sha256": ckpt.vocabs[dom].digest()} for dom in DOMAINS
        }
    return {
        "format": 1,
        "model": ckpt.model_config.as_dict(),
        "train": ckpt.train_config,
        "vocab": vocab,
        "params": [[name, list(ckpt.params[name].shape)] for name in sorted(ckpt.params)],
    }


def to_bytes(ckpt):
    header = json.dumps(_header(ckpt), sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")
    parts = [MAGIC, b"%012d\n" % len(header), header, b"\n"]
    for name in sorted(ckpt.params):
        arr = np.asarray(ckpt.params[name])
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"parameter {name!r} has non-finite values")
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())
    return b"".join(parts)


def from_bytes(blob):
    if not blob.startswith(MAGIC):
        raise CheckpointError("not a psjnet checkpoint (bad magic line)")
    pos = len(MAGIC)
    try:
        n = int(blob[pos : pos + 12])
    except ValueError:
        raise CheckpointError("corrupt header length") from None
    pos += 13
    try:
        header = json.loads(blob[pos : pos + n].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from None
    pos += n + 1
    if header.get("format") != 1:
        raise CheckpointError(f"unsupported checkpoint format {header.get('format')!r}")
    try:
        cfg = ModelConfig(**header["model"])
    except (TypeError, ConfigError) as exc:
        raise CheckpointError(f"invalid model config in checkpoint: {exc}") from None

    params = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape, dtype=np.int64))
        end = pos + count * _DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError(f"truncated data for parameter {name!r}")
        params[name] = np.frombuffer(blob, dtype=_DTYPE, count=count, offset=pos).reshape(shape).astype(np.float64)
        pos = end
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after the last tensor")

    sizes = {dom: params[f"emb.{dom}"].shape[0] for dom in DOMAINS if f"emb.{dom}" in params}
    expected = param_shapes(cfg, sizes) if len(sizes) == 2 else {}
    got = {k: tuple(v.shape) for k, v in params.items()}
    if got != {k: tuple(v) for k, v in expected.items()}:
        raise CheckpointError("parameter names/shapes do not match the stored model config")

    vocabs = None
    if header["vocab"] is not None:
        vocabs = {}
        for dom in DOMAINS:
            entry = header["vocab"][dom]
            voc = Vocabulary(dom, entry["ids"])
            if voc.digest() != entry["sha256"]:
                raise CheckpointError(f"domain {dom} vocabulary hash mismatch")
            if voc.size != sizes[dom]:
                raise CheckpointError(f"domain {dom} vocabulary size {voc.size} != embedding rows {sizes[dom]}")
            vocabs[dom] = voc
    return Checkpoint(params, cfg, vocabs, header["train"])


def save(path, ckpt):
    """Atomically write ``ckpt`` to ``path``."""
    blob = to_bytes(ckpt)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load(path):
    try:
        with open(path, "rb") as fh:
            return from_bytes(fh.read())
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
