"""Token-level trace tables: per step, the top-j tokens by visual logit,
description logit, and contrasted logit, with the divergence-derived
weights annotated and argmax flips highlighted."""

from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np

from codedec.core import LogitVector, argmax_token
from codedec.harness.config import ConfigError
from codedec.providers.trace import TraceFile
from codedec.strategies import code_step


def parse_step_range(text: Optional[str], length: int) -> tuple[int, int]:
    """Parse ``N`` or ``A:B`` (either side optional) against a trace length.

    Open ends clamp to the trace; explicit indices must be in range (stop
    may equal length).  An empty range like ``3:3`` is allowed.
    """
    if text is None or text == ":":
        return 0, length

    def parse_bound(part: str, default: int, limit: int) -> int:
        if part == "":
            return default
        try:
            value = int(part)
        except ValueError as exc:
            raise ConfigError(f"bad step range {text!r}: {part!r} is not an integer") from exc
        if not 0 <= value <= limit:
            raise ConfigError(
                f"step {value} out of range for a trace of {length} steps"
            )
        return value

    if ":" in text:
        start_text, _, stop_text = text.partition(":")
        start = parse_bound(start_text.strip(), 0, length)  # start == length is an empty range
        stop = parse_bound(stop_text.strip(), length, length)
        return start, max(stop, start)
    single = parse_bound(text.strip(), 0, max(length - 1, 0))
    if length == 0:
        raise ConfigError("trace has no steps")
    return single, single + 1


def _top_entries(scores: np.ndarray, vocab: tuple[str, ...], top_j: int) -> list[tuple[str, float]]:
    order = np.argsort(-scores, kind="stable")[:top_j]
    return [(vocab[int(i)], float(scores[int(i)])) for i in order]


def _jsonable_score(x: float) -> Any:
    return "-inf" if x == -math.inf else x


def trace_step_views(trace: TraceFile, start: int, stop: int, top_j: int, k: float) -> list[dict[str, Any]]:
    """Structured per-step view; the contrast is recomputed at the given k."""
    vocab = trace.header.vocab
    views: list[dict[str, Any]] = []
    for t in range(start, stop):
        entry = trace.steps[t]
        lv = entry.logits_v
        view: dict[str, Any] = {
            "step": t,
            "recorded_choice": entry.recorded_choice,
            "greedy_choice": argmax_token(lv),
            "top_v": _top_entries(lv.scores, vocab, top_j),
        }
        if entry.logits_d is not None:
            _, record = code_step(lv, entry.logits_d, k, step=t)
            view.update(
                {
                    "divergence": record.divergence,
                    "alpha_t": record.alpha_t,
                    "beta_t": record.beta_t,
                    "head_size": len(record.head_set),
                    "contrast_choice": record.chosen,
                    "flip": record.chosen != view["greedy_choice"],
                    "top_d": _top_entries(entry.logits_d.scores, vocab, top_j),
                    "top_contrast": _top_entries(
                        record.contrasted_logits.scores, vocab, top_j
                    ),
                }
            )
        views.append(view)
    return views


def render_trace_machine(trace: TraceFile, start: int, stop: int, top_j: int, k: float) -> dict[str, Any]:
    steps = []
    for view in trace_step_views(trace, start, stop, top_j, k):
        out = dict(view)
        for key in ("top_v", "top_d", "top_contrast"):
            if key in out:
                out[key] = [
                    {"token": token, "score": _jsonable_score(score)}
                    for token, score in out[key]
                ]
        steps.append(out)
    return {
        "command": "trace",
        "model": trace.header.model,
        "n": trace.header.n,
        "k": k,
        "top_j": top_j,
        "steps": steps,
    }


def _fmt_score(score: float) -> str:
    return "   -inf" if score == -math.inf else f"{score:7.2f}"


def _row(label: str, entries: list[tuple[str, float]], marker: str = " ") -> str:
    cells = [f"{token:>12} {_fmt_score(score)}" for token, score in entries]
    return f"{marker} {label:<12}| " + " | ".join(cells)


def render_trace_human(trace: TraceFile, start: int, stop: int, top_j: int, k: float) -> str:
    lines = [
        f"trace: model={trace.header.model!r} n={trace.header.n} steps={len(trace.steps)} k={k:g}"
    ]
    views = trace_step_views(trace, start, stop, top_j, k)
    if not views:
        lines.append("(empty step range)")
        return "\n".join(lines) + "\n"
    vocab = trace.header.vocab
    for view in views:
        header = f"step {view['step']}"
        if "divergence" in view:
            header += (
                f"   D_bd={view['divergence']:.4f}"
                f"  alpha_t={view['alpha_t']:.4f}"
                f"  beta_t={view['beta_t']:.4f}"
                f"  head={view['head_size']}"
            )
            if view["flip"]:
                header += (
                    f"   FLIP: {vocab[view['greedy_choice']]}"
                    f" -> {vocab[view['contrast_choice']]}"
                )
        lines.append(header)
        lines.append(_row("visual", view["top_v"]))
        if "top_d" in view:
            lines.append(_row("description", view["top_d"]))
            lines.append(
                _row("contrast", view["top_contrast"], marker="*" if view["flip"] else " ")
            )
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"
