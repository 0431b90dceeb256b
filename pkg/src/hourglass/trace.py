"""Trace file model and the plain-text trace grammar."""
from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .core import ConfigError

TRACE_VERSION = 1


class TraceParseError(ConfigError):
    def __init__(self, line: int, column: int, reason: str):
        super().__init__(f"line {line}, column {column}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


class AlignmentWarning(UserWarning):
    pass


class OpKind(enum.Enum):
    LOAD = "L"
    STORE = "S"
    THINK = "D"


@dataclass(frozen=True)
class TraceOp:
    core: int
    kind: OpKind
    value: int  # byte address for L/S, cycles for D

    @property
    def address(self) -> Optional[int]:
        return None if self.kind is OpKind.THINK else self.value

    def format(self) -> str:
        if self.kind is OpKind.THINK:
            return f"{self.core} D {self.value}"
        return f"{self.core} {self.kind.value} {self.value:#x}"


@dataclass
class TraceFile:
    n_cores: int
    streams: list = field(default_factory=list)  # per-core lists of TraceOp
    comment: str = ""
    version: int = TRACE_VERSION

    def __post_init__(self):
        while len(self.streams) < self.n_cores:
            self.streams.append([])

    @classmethod
    def from_ops(cls, n_cores: int, ops, comment: str = "") -> "TraceFile":
        tf = cls(n_cores, comment=comment)
        for op in ops:
            tf.streams[op.core].append(op)
        return tf

    def ops(self):
        for stream in self.streams:
            yield from stream

    def __len__(self) -> int:
        return sum(len(s) for s in self.streams)


_LINE = re.compile(r"^(?P<core>\S+)\s+(?P<kind>\S+)\s+(?P<arg>\S+)\s*$")


def parse_trace(text: str, n_cores: Optional[int] = None, line_bytes: Optional[int] = None) -> TraceFile:
    """Parse the one-directive-per-line trace grammar.

    ``n_cores`` bounds the accepted core ids; without it the file's own header
    comment (``# cores: N``) or the largest id seen decides.  Addresses not
    aligned to ``line_bytes`` are aligned down with an :class:`AlignmentWarning`.
    """
    ops = []
    comments = []
    header_cores = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            m = re.match(r"cores:\s*(\d+)$", body)
            if m:
                header_cores = int(m.group(1))
            elif not body.startswith("version:"):
                comments.append(body)
            continue
        col0 = len(raw) - len(raw.lstrip()) + 1
        m = _LINE.match(stripped)
        if m is None:
            raise TraceParseError(lineno, col0, "expected '<core> L|S <hexaddr>' or '<core> D <cycles>'")
        core_txt, kind_txt, arg = m.group("core"), m.group("kind"), m.group("arg")
        if not core_txt.isdigit():
            raise TraceParseError(lineno, col0, f"bad core id {core_txt!r}")
        core = int(core_txt)
        limit = n_cores if n_cores is not None else header_cores
        if limit is not None and core >= limit:
            raise TraceParseError(lineno, col0, f"unknown core id {core}")
        kind_col = col0 + stripped.index(kind_txt, len(core_txt))
        arg_col = col0 + stripped.rindex(arg)
        try:
            kind = OpKind(kind_txt)
        except ValueError:
            raise TraceParseError(lineno, kind_col, f"unknown op {kind_txt!r}") from None
        if kind is OpKind.THINK:
            if not arg.isdigit():
                raise TraceParseError(lineno, arg_col, f"think time must be a non-negative integer, got {arg!r}")
            ops.append(TraceOp(core, kind, int(arg)))
            continue
        try:
            addr = int(arg, 16)
        except ValueError:
            raise TraceParseError(lineno, arg_col, f"bad hex address {arg!r}") from None
        if addr < 0:
            raise TraceParseError(lineno, arg_col, "negative address")
        if line_bytes and addr % line_bytes:
            aligned = addr - addr % line_bytes
            warnings.warn(f"line {lineno}: address {addr:#x} aligned down to {aligned:#x}", AlignmentWarning)
            addr = aligned
        ops.append(TraceOp(core, kind, addr))
    count = n_cores or header_cores or (max((op.core for op in ops), default=-1) + 1)
    return TraceFile.from_ops(count, ops, comment="\n".join(comments))


def format_trace(trace: TraceFile) -> str:
    lines = [f"# version: {trace.version}", f"# cores: {trace.n_cores}"]
    lines += [f"# {c}" for c in trace.comment.splitlines() if c]
    # round-robin interleave keeps files readable; per-core order is what matters
    streams = [list(s) for s in trace.streams]
    idx = 0
    while any(streams):
        for s in streams:
            if len(s) > idx:
                lines.append(s[idx].format())
        idx += 1
        if all(len(s) <= idx for s in streams):
            break
    return "\n".join(lines) + "\n"
