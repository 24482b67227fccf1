"""Recorded logit traces: canonical on-disk format, reader, and replay provider.

A trace captures per-step logits from both streams so a decode can be
replayed bit-for-bit without the original model.  Serialization is
canonical — a loaded trace re-serializes to identical bytes — so traces can
be diffed and pinned in tests.  Floats are written with 17 significant
digits (round-trip exact for IEEE doubles); negative infinity is written as
the string "-inf" since JSON has no literal for it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from codedec.core import Context, LogitVector, StepRecord, Vocabulary
from codedec.providers.base import ProviderError

TRACE_FORMAT_VERSION = 1


class TraceFormatError(ValueError):
    """The trace file is malformed or has an unsupported format version."""


@dataclass(frozen=True)
class TraceStep:
    step: int
    logits_v: LogitVector
    logits_d: Optional[LogitVector]
    recorded_choice: int


@dataclass(frozen=True)
class TraceHeader:
    n: int
    vocab: tuple[str, ...]
    eos_id: Optional[int]
    model: str
    prompt: str
    k: float
    alpha: float
    beta: float
    note: str
    format_version: int = TRACE_FORMAT_VERSION


@dataclass(frozen=True)
class TraceFile:
    header: TraceHeader
    steps: tuple[TraceStep, ...]

    def __post_init__(self) -> None:
        h = self.header
        if h.n != len(h.vocab):
            raise TraceFormatError(f"header n={h.n} but vocab has {len(h.vocab)} entries")
        if h.eos_id is not None and not 0 <= h.eos_id < h.n:
            raise TraceFormatError(f"eos_id {h.eos_id} outside vocabulary of {h.n}")
        for i, step in enumerate(self.steps):
            if step.step != i:
                raise TraceFormatError(f"steps must be dense from 0; found {step.step} at index {i}")
            if len(step.logits_v) != h.n:
                raise TraceFormatError(f"step {i}: logits_v has {len(step.logits_v)} entries, expected {h.n}")
            if step.logits_d is not None and len(step.logits_d) != h.n:
                raise TraceFormatError(f"step {i}: logits_d has {len(step.logits_d)} entries, expected {h.n}")
            if not 0 <= step.recorded_choice < h.n:
                raise TraceFormatError(f"step {i}: recorded_choice {step.recorded_choice} outside vocabulary")

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(tokens=self.header.vocab, eos_id=self.header.eos_id)

    def has_description_stream(self) -> bool:
        return all(s.logits_d is not None for s in self.steps)


# --- canonical writer ---------------------------------------------------

def _fmt_float(x: float) -> str:
    if x == -math.inf:
        return '"-inf"'
    if not math.isfinite(x):
        raise TraceFormatError(f"traces cannot store {x}")
    return format(float(x), ".17g")


def _fmt_array(logits: Optional[LogitVector]) -> str:
    if logits is None:
        return "null"
    return "[" + ", ".join(_fmt_float(v) for v in logits.scores.tolist()) + "]"


def serialize_trace(trace: TraceFile) -> str:
    """Canonical text form: fixed key order, one step per line, 17-digit floats."""
    h = trace.header
    header = (
        "{"
        f'"format_version": {h.format_version}, '
        f'"n": {h.n}, '
        f'"vocab": {json.dumps(list(h.vocab), ensure_ascii=False)}, '
        f'"eos_id": {json.dumps(h.eos_id)}, '
        f'"model": {json.dumps(h.model, ensure_ascii=False)}, '
        f'"prompt": {json.dumps(h.prompt, ensure_ascii=False)}, '
        f'"k": {_fmt_float(h.k)}, '
        f'"alpha": {_fmt_float(h.alpha)}, '
        f'"beta": {_fmt_float(h.beta)}, '
        f'"note": {json.dumps(h.note, ensure_ascii=False)}'
        "}"
    )
    step_lines = [
        "{"
        f'"step": {s.step}, '
        f'"logits_v": {_fmt_array(s.logits_v)}, '
        f'"logits_d": {_fmt_array(s.logits_d)}, '
        f'"recorded_choice": {s.recorded_choice}'
        "}"
        for s in trace.steps
    ]
    body = ",\n".join(step_lines)
    steps_block = "[\n" + body + "\n]" if step_lines else "[]"
    return '{\n"header": ' + header + ',\n"steps": ' + steps_block + "\n}\n"


def _parse_score(value: object, where: str) -> float:
    if value == "-inf":
        return -math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceFormatError(f"{where}: expected a number or \"-inf\", got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise TraceFormatError(f"{where}: non-finite value {x}")
    return x


def _parse_array(value: object, where: str) -> Optional[LogitVector]:
    if value is None:
        return None
    if not isinstance(value, list):
        raise TraceFormatError(f"{where}: expected an array")
    scores = np.array([_parse_score(v, where) for v in value], dtype=np.float64)
    return LogitVector(scores)


def deserialize_trace(text: str) -> TraceFile:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"trace is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "header" not in raw or "steps" not in raw:
        raise TraceFormatError("trace must be an object with 'header' and 'steps'")
    h = raw["header"]
    if not isinstance(h, dict):
        raise TraceFormatError("header must be an object")
    version = h.get("format_version")
    if version != TRACE_FORMAT_VERSION:
        raise TraceFormatError(
            f"unsupported trace format_version {version!r}; this build reads {TRACE_FORMAT_VERSION}"
        )
    required = {"format_version", "n", "vocab", "eos_id", "model", "prompt", "k", "alpha", "beta", "note"}
    missing = required - h.keys()
    if missing:
        raise TraceFormatError(f"header missing keys: {sorted(missing)}")
    unknown = h.keys() - required
    if unknown:
        raise TraceFormatError(f"header has unknown keys: {sorted(unknown)}")
    vocab = h["vocab"]
    if not isinstance(vocab, list) or not all(isinstance(t, str) for t in vocab):
        raise TraceFormatError("vocab must be an array of strings")
    header = TraceHeader(
        n=h["n"],
        vocab=tuple(vocab),
        eos_id=h["eos_id"],
        model=h["model"],
        prompt=h["prompt"],
        k=_parse_score(h["k"], "header.k"),
        alpha=_parse_score(h["alpha"], "header.alpha"),
        beta=_parse_score(h["beta"], "header.beta"),
        note=h["note"],
    )
    raw_steps = raw["steps"]
    if not isinstance(raw_steps, list):
        raise TraceFormatError("steps must be an array")
    steps = []
    for i, s in enumerate(raw_steps):
        if not isinstance(s, dict):
            raise TraceFormatError(f"step {i} must be an object")
        steps.append(
            TraceStep(
                step=s.get("step", -1),
                logits_v=_parse_array(s.get("logits_v"), f"step {i}.logits_v"),
                logits_d=_parse_array(s.get("logits_d"), f"step {i}.logits_d"),
                recorded_choice=s.get("recorded_choice", -1),
            )
        )
        if steps[-1].logits_v is None:
            raise TraceFormatError(f"step {i}: logits_v is required")
    return TraceFile(header=header, steps=tuple(steps))


def load_trace(path: str) -> TraceFile:
    with open(path, "r", encoding="utf-8") as f:
        return deserialize_trace(f.read())


def save_trace(trace: TraceFile, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_trace(trace))


def trace_from_records(
    records: Sequence[StepRecord],
    vocabulary: Vocabulary,
    model: str,
    prompt: str,
    k: float,
    alpha: float,
    beta: float,
    note: str = "",
) -> TraceFile:
    """Package decode step records as a trace (recorded_choice = what was emitted)."""
    header = TraceHeader(
        n=vocabulary.size,
        vocab=vocabulary.tokens,
        eos_id=vocabulary.eos_id,
        model=model,
        prompt=prompt,
        k=k,
        alpha=alpha,
        beta=beta,
        note=note,
    )
    steps = tuple(
        TraceStep(
            step=r.step,
            logits_v=r.logits_v,
            logits_d=r.logits_d,
            recorded_choice=r.chosen,
        )
        for r in records
    )
    return TraceFile(header=header, steps=steps)


# --- replay -------------------------------------------------------------

def trace_next_logits(trace: TraceFile, side: str, step: int) -> LogitVector:
    """Logits recorded for one side at one step.

    Raises IndexError past the end of the trace and ValueError when the
    description side was never recorded.
    """
    if side not in ("v", "d"):
        raise ValueError(f"side must be 'v' or 'd', got {side!r}")
    if not 0 <= step < len(trace.steps):
        raise IndexError(f"step {step} out of range for trace of {len(trace.steps)} steps")
    entry = trace.steps[step]
    if side == "v":
        return entry.logits_v
    if entry.logits_d is None:
        raise ValueError(f"step {step} has no description-side logits")
    return entry.logits_d


class TraceReplayProvider:
    """LogitProvider that replays one side of a recorded trace.

    The step index is recovered from the context: step = len(context) -
    base_len, where base_len is the context length the recording started
    from.  max_context is set so decoding past the end of the trace aborts
    with a context-overflow error rather than an obscure lookup failure.
    """

    def __init__(self, trace: TraceFile, side: str, base_len: int = 0) -> None:
        if side not in ("v", "d"):
            raise ValueError(f"side must be 'v' or 'd', got {side!r}")
        if side == "d" and not trace.has_description_stream():
            raise ValueError("trace has no description-side logits")
        if not trace.steps:
            raise ValueError("cannot replay an empty trace")
        self.trace = trace
        self.side = side
        self.base_len = base_len
        self.vocabulary = trace.vocabulary()
        self.max_context = base_len + len(trace.steps) - 1

    def next_logits(self, context: Context) -> LogitVector:
        step = len(context.token_ids) - self.base_len
        if not 0 <= step < len(self.trace.steps):
            raise ProviderError(
                f"context of length {len(context.token_ids)} maps to step {step}, "
                f"outside the recorded range [0, {len(self.trace.steps)})"
            )
        return trace_next_logits(self.trace, self.side, step)
