"""Run reports: provider-call accounting, throughput/latency, serialization.

Machine-readable output is the canonical artifact and must be byte-identical
across reruns with the same seed and fixtures, so timing fields are excluded
from it for decode/compare (bench exists to measure timing and is the
documented exception).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Optional

from codedec.core import Context, DecodeConfig, LogitVector, StepRecord, Vocabulary


def canonical_json(payload: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


class CountingProvider:
    """Wraps a provider, counting calls and recording per-call wall times."""

    def __init__(self, inner) -> None:
        self.inner = inner
        self.calls = 0
        self.call_ms: list[float] = []

    @property
    def vocabulary(self) -> Vocabulary:
        return self.inner.vocabulary

    @property
    def max_context(self) -> Optional[int]:
        return self.inner.max_context

    def next_logits(self, context: Context) -> LogitVector:
        start = time.perf_counter()
        logits = self.inner.next_logits(context)
        self.call_ms.append((time.perf_counter() - start) * 1000.0)
        self.calls += 1
        return logits


@dataclass
class RunReport:
    """Everything a single decode run produced, plus its cost accounting."""

    strategy: str
    label: str
    provider_name: str
    config: DecodeConfig
    token_ids: list[int]
    text: str
    records: list[StepRecord]
    wall_seconds: float
    calls_v: int
    calls_d: int
    setup_seconds: Optional[float] = None
    divergence_from_recorded: Optional[list[int]] = field(default=None)

    @property
    def emitted(self) -> int:
        return len(self.token_ids)

    @property
    def tokens_per_second(self) -> float:
        return self.emitted / max(self.wall_seconds, 1e-12)

    @property
    def ms_per_token(self) -> float:
        return self.wall_seconds * 1000.0 / max(self.emitted, 1)

    def step_rows(self) -> list[dict[str, Any]]:
        rows = []
        for r in self.records:
            rows.append(
                {
                    "step": r.step,
                    "chosen": r.chosen,
                    "divergence": r.divergence,
                    "alpha_t": r.alpha_t,
                    "beta_t": r.beta_t,
                    "head_size": None if r.head_set is None else len(r.head_set),
                }
            )
        return rows

    def to_machine(self, include_timing: bool = False) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "strategy": self.strategy,
            "label": self.label,
            "provider": self.provider_name,
            "config": self.config.as_dict(),
            "tokens": list(self.token_ids),
            "text": self.text,
            "steps": self.step_rows(),
            "provider_calls": {"v": self.calls_v, "d": self.calls_d},
            "divergence_from_recorded": self.divergence_from_recorded,
        }
        if include_timing:
            payload["timing"] = {
                "wall_ms": self.wall_seconds * 1000.0,
                "tokens_per_second": self.tokens_per_second,
                "ms_per_token": self.ms_per_token,
                "setup_ms": None
                if self.setup_seconds is None
                else self.setup_seconds * 1000.0,
            }
        return payload

    def to_text(self) -> str:
        lines = [
            f"strategy: {self.label}   provider: {self.provider_name}",
            f"tokens ({self.emitted}): {' '.join(str(t) for t in self.token_ids)}",
            f"text: {self.text}",
        ]
        if any(r.divergence is not None for r in self.records):
            lines.append(f"{'step':>4}  {'chosen':>6}  {'D_bd':>8}  {'alpha_t':>8}  {'beta_t':>8}  {'head':>5}")
            for r in self.records:
                lines.append(
                    f"{r.step:>4}  {r.chosen:>6}  {r.divergence:>8.4f}  "
                    f"{r.alpha_t:>8.4f}  {r.beta_t:>8.4f}  {len(r.head_set):>5}"
                )
        lines.append(
            f"wall: {self.wall_seconds * 1000.0:.2f} ms   "
            f"throughput: {self.tokens_per_second:.1f} tok/s   "
            f"latency: {self.ms_per_token:.3f} ms/tok"
        )
        lines.append(f"provider calls: v={self.calls_v} d={self.calls_d}")
        if self.setup_seconds is not None:
            lines.append(f"description setup: {self.setup_seconds * 1000.0:.2f} ms (excluded from per-token latency)")
        if self.divergence_from_recorded is not None:
            if self.divergence_from_recorded:
                steps = " ".join(str(s) for s in self.divergence_from_recorded)
                lines.append(f"diverges from recorded choices at steps: {steps}")
            else:
                lines.append("matches recorded choices at every step")
        return "\n".join(lines) + "\n"
