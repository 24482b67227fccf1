"""Writer for the recorded-trace document format.

Implements the published schema independently of the decoding engine
that reads it: a single JSON document with a one-line header object
({format_version: 1, n, vocab, eos_id, model, prompt, k, alpha, beta,
note}) and one step object per line ({step, logits_v, logits_d,
recorded_choice}).  Floats carry 17 significant digits so values
round-trip bit-exactly; negative infinity is the string "-inf".
"""

from __future__ import annotations

import json
import math
from typing import Optional, Sequence

TRACE_FORMAT_VERSION = 1

#: decoding defaults the recorded fixtures target
DEFAULT_K = 0.3
DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 0.1


def _fmt_float(x: float) -> str:
    if x == -math.inf:
        return '"-inf"'
    if not math.isfinite(x):
        raise ValueError(f"traces cannot store {x}")
    return format(float(x), ".17g")


def _fmt_array(values: Optional[Sequence[float]]) -> str:
    if values is None:
        return "null"
    return "[" + ", ".join(_fmt_float(v) for v in values) + "]"


def render_trace(
    vocab: Sequence[str],
    eos_id: Optional[int],
    model: str,
    prompt: str,
    steps: Sequence[dict],
    k: float = DEFAULT_K,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    note: str = "",
) -> str:
    """Serialize to the canonical text layout (one step per line)."""
    header = (
        "{"
        f'"format_version": {TRACE_FORMAT_VERSION}, '
        f'"n": {len(vocab)}, '
        f'"vocab": {json.dumps(list(vocab), ensure_ascii=False)}, '
        f'"eos_id": {json.dumps(eos_id)}, '
        f'"model": {json.dumps(model, ensure_ascii=False)}, '
        f'"prompt": {json.dumps(prompt, ensure_ascii=False)}, '
        f'"k": {_fmt_float(k)}, '
        f'"alpha": {_fmt_float(alpha)}, '
        f'"beta": {_fmt_float(beta)}, '
        f'"note": {json.dumps(note, ensure_ascii=False)}'
        "}"
    )
    step_lines = []
    for s in steps:
        if len(s["logits_v"]) != len(vocab) or (
            s["logits_d"] is not None and len(s["logits_d"]) != len(vocab)
        ):
            raise ValueError(f"step {s['step']}: logit arity does not match the vocabulary")
        step_lines.append(
            "{"
            f'"step": {s["step"]}, '
            f'"logits_v": {_fmt_array(s["logits_v"])}, '
            f'"logits_d": {_fmt_array(s["logits_d"])}, '
            f'"recorded_choice": {s["recorded_choice"]}'
            "}"
        )
    body = ",\n".join(step_lines)
    steps_block = "[\n" + body + "\n]" if step_lines else "[]"
    return '{\n"header": ' + header + ',\n"steps": ' + steps_block + "\n}\n"


def write_trace(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
