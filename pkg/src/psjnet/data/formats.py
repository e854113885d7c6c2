"""Text formats: sequence files (one account slice per line) and raw event logs."""

from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass

from ..errors import FormatError, ParseError
from ..model.sequence import DOMAINS, MixedSequence

_ITEM = re.compile(r"[^\s:]+")


def parse_sequence_line(line):
    """Parse ``"A:12\\tB:4\\tA:7"`` into a :class:`MixedSequence` of string ids.

    A single trailing newline is tolerated.  Columns in errors are 1-based
    character offsets of the offending token.
    """
    if line.endswith("\n"):
        line = line[:-1]
    if line == "":
        raise ParseError("empty sequence line", column=1)
    events = []
    col = 1
    for token in line.split("\t"):
        dom, sep, item = token.partition(":")
        if not sep:
            raise ParseError(f"token {token!r} lacks a ':' separator", column=col)
        if dom not in DOMAINS:
            raise ParseError(f"unknown domain {dom!r} in token {token!r}", column=col)
        if not _ITEM.fullmatch(item):
            raise ParseError(f"bad item id {item!r} in token {token!r}", column=col + 2)
        events.append((dom, item))
        col += len(token) + 1
    return MixedSequence(tuple(events))


def format_sequence(seq):
    """Inverse of :func:`parse_sequence_line` (no trailing newline)."""
    if len(seq) == 0:
        raise FormatError("cannot serialise an empty sequence")
    out = []
    for dom, item in seq.events:
        item = str(item)
        if not _ITEM.fullmatch(item):
            raise FormatError(f"item id {item!r} cannot be written (whitespace or ':')")
        out.append(f"{dom}:{item}")
    return "\t".join(out)


def atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_sequences(path, sequences):
    atomic_write_text(path, "".join(format_sequence(s) + "\n" for s in sequences))


def read_sequences(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_sequence_line(line))
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}", column=exc.column) from None
    return out


@dataclass(frozen=True)
class RawEvent:
    user: str
    domain: str
    item: str
    timestamp: int
    duration: float | None = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise FormatError(f"unknown domain {self.domain!r}")
        if self.timestamp < 0:
            raise FormatError(f"negative timestamp {self.timestamp}")
        if self.duration is not None and self.duration < 0:
            raise FormatError(f"negative duration {self.duration}")


def read_raw_events(path):
    """Tab-separated ``user, domain, item, unix-seconds[, duration-seconds]``.

    Blank lines and lines starting with ``#`` are skipped.
    """
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) not in (4, 5):
                raise FormatError(f"{path}:{lineno}: expected 4 or 5 tab-separated columns, got {len(cols)}")
            try:
                ts = int(cols[3])
                dur = float(cols[4]) if len(cols) == 5 and cols[4] != "" else None
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            events.append(RawEvent(cols[0], cols[1], cols[2], ts, dur))
    return events


def write_raw_events(path, events):
    lines = []
    for e in events:
        cols = [e.user, e.domain, e.item, str(e.timestamp)]
        if e.duration is not None:
            cols.append(repr(float(e.duration)))
        lines.append("\t".join(cols) + "\n")
    atomic_write_text(path, "".join(lines))
