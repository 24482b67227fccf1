"""Shared domain types and numerically stable probability primitives.

All probability math is done in double precision.  ``-inf`` is the sole
masking sentinel for logits: a masked entry maps to probability exactly 0
and is excluded before max-subtraction.  Ties are always broken toward the
lowest token index so that traces are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

NEG_INF = float("-inf")

#: Canonical instruction used to elicit a comprehensive description of the
#: visual content.  Shipped as a constant so every component (engine, CLI,
#: model server) agrees on the exact wording.
DESCRIPTION_PROMPT = (
    "Provide a detailed description of the image, covering all visible "
    "elements and their interactions, so as to thoroughly answer any "
    "potential questions about the image."
)

STRATEGIES = ("greedy", "nucleus", "beam", "cd_fixed", "code")
SELECTORS = ("argmax", "sample")

#: Strategies that contrast a second (description/amateur) logit stream and
#: therefore need a d-side provider: 2 provider calls per emitted token.
DUAL_STREAM_STRATEGIES = ("cd_fixed", "code")


def _as_score_array(values: Union[np.ndarray, Sequence[float]]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D array of scores, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-string <-> token-index mapping, with an optional EOS id."""

    tokens: tuple[str, ...]
    eos_id: Optional[int] = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.tokens) == 0:
            raise ValueError("vocabulary must contain at least one token")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        if self.eos_id is not None and not 0 <= self.eos_id < len(self.tokens):
            raise ValueError(f"eos_id {self.eos_id} out of range for size {len(self.tokens)}")
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise KeyError(f"token {token!r} not in vocabulary") from None

    def text(self, token_ids: Iterable[int]) -> str:
        """Space-joined rendering of a token-id sequence, EOS excluded."""
        return " ".join(
            self.tokens[i] for i in token_ids if self.eos_id is None or i != self.eos_id
        )

    @classmethod
    def anonymous(cls, n: int, eos_id: Optional[int] = None) -> "Vocabulary":
        """Placeholder vocabulary for sources that only report a size."""
        return cls(tuple(f"<tok{i}>" for i in range(n)), eos_id=eos_id)


@dataclass(frozen=True)
class LogitVector:
    """Raw per-token scores; entries are finite or ``-inf``, never ``+inf``/NaN."""

    scores: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_score_array(self.scores)
        if np.isnan(arr).any() or np.isposinf(arr).any():
            raise ValueError("logits must not contain NaN or +inf")
        if not np.isfinite(arr).any():
            raise ValueError("empty support")
        object.__setattr__(self, "scores", arr)

    def __len__(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class ProbDistribution:
    """Normalized probabilities over the vocabulary."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_score_array(self.probs)
        if (arr < 0).any():
            raise ValueError("probabilities must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within 1e-9")
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class Context:
    """Conditioning prefix: query tokens plus everything generated so far."""

    token_ids: tuple[int, ...] = ()

    def extend(self, token_id: int) -> "Context":
        return Context(self.token_ids + (int(token_id),))

    def __len__(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class ContextPair:
    """The visual-side and description-side conditioning contexts.

    Both sides address the same vocabulary and are extended identically with
    each generated token; only their prefixes differ (actual visual content
    on one side, the self-generated description on the other).
    """

    visual_ctx: Context
    description_ctx: Context

    def extend(self, token_id: int) -> "ContextPair":
        return ContextPair(self.visual_ctx.extend(token_id), self.description_ctx.extend(token_id))


@dataclass(frozen=True)
class DecodeConfig:
    """Strategy selection plus every decoding hyperparameter.

    Defaults follow the conventional settings for these methods: nucleus
    top_p=0.95 at temperature 1.0, 5 beams, fixed-contrast alpha=1.0 /
    beta=0.1, and smoothing k=0.3 for the divergence-driven strategy.
    """

    strategy: str = "greedy"
    alpha: float = 1.0  # fixed-contrast amplification (cd_fixed only)
    beta: float = 0.1  # fixed plausibility cutoff (cd_fixed only)
    k: float = 0.3  # divergence smoothing exponent (code only)
    top_p: float = 0.95
    temperature: float = 1.0
    num_beams: int = 5
    max_tokens: int = 32
    rng_seed: int = 0
    selector: str = "argmax"

    def validate(self) -> list[str]:
        """Return a list of violated-field messages (empty when valid)."""
        problems = []
        if self.strategy not in STRATEGIES:
            problems.append(f"strategy: {self.strategy!r} not one of {STRATEGIES}")
        if not self.alpha >= 0:
            problems.append(f"alpha: must be >= 0, got {self.alpha!r}")
        if not 0.0 <= self.beta <= 1.0:
            problems.append(f"beta: must be in [0, 1], got {self.beta!r}")
        if not self.k > 0:
            problems.append(f"k: must be > 0, got {self.k!r}")
        if not 0.0 < self.top_p <= 1.0:
            problems.append(f"top_p: must be in (0, 1], got {self.top_p!r}")
        if not self.temperature > 0:
            problems.append(f"temperature: must be > 0, got {self.temperature!r}")
        if not (isinstance(self.num_beams, int) and self.num_beams >= 1):
            problems.append(f"num_beams: must be a positive integer, got {self.num_beams!r}")
        if not (isinstance(self.max_tokens, int) and self.max_tokens >= 1):
            problems.append(f"max_tokens: must be a positive integer, got {self.max_tokens!r}")
        if not (isinstance(self.rng_seed, int) and self.rng_seed >= 0):
            problems.append(f"rng_seed: must be a non-negative integer, got {self.rng_seed!r}")
        if self.selector not in SELECTORS:
            problems.append(f"selector: {self.selector!r} not one of {SELECTORS}")
        return problems

    def with_overrides(self, **kwargs) -> "DecodeConfig":
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.field_names()}

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class StepRecord:
    """Per-step audit record enabling token-level case studies.

    For the divergence-driven strategy all fields are populated and
    ``alpha_t + beta_t == 1`` holds exactly (both derive from the same
    divergence value).  Single-stream strategies leave the d-side fields
    as ``None``; fixed-contrast decoding fills the head set and contrast
    but has no per-step divergence.  ``contrasted_logits`` holds the
    effective scores fed to the final selection, i.e. tokens cut from the
    candidate pool appear as ``-inf``.
    """

    step: int
    logits_v: LogitVector
    chosen: int
    logits_d: Optional[LogitVector] = None
    divergence: Optional[float] = None
    alpha_t: Optional[float] = None
    beta_t: Optional[float] = None
    head_set: Optional[frozenset[int]] = None
    contrasted_logits: Optional[LogitVector] = None

    def __post_init__(self) -> None:
        if self.alpha_t is not None and not 0.0 <= self.alpha_t <= 1.0:
            raise ValueError(f"alpha_t out of [0, 1]: {self.alpha_t!r}")
        if self.beta_t is not None and not 0.0 <= self.beta_t <= 1.0:
            raise ValueError(f"beta_t out of [0, 1]: {self.beta_t!r}")
        if self.head_set is not None and self.chosen not in self.head_set:
            raise ValueError(f"chosen token {self.chosen} not in the candidate head set")


def softmax(logits: LogitVector, temperature: float = 1.0) -> ProbDistribution:
    """Temperature softmax with max-subtraction; ``-inf`` maps to exactly 0.

    Raises ``ValueError`` on non-positive temperature; an all-masked input
    is impossible by the ``LogitVector`` invariant but reported as
    ``"empty support"`` for raw arrays that slip through.
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature!r}")
    scores = logits.scores if isinstance(logits, LogitVector) else _as_score_array(logits)
    finite = np.isfinite(scores)
    if not finite.any():
        raise ValueError("empty support")
    scaled = scores / temperature  # -inf stays -inf
    shifted = scaled - scaled[finite].max()
    weights = np.exp(shifted)  # exp(-inf) == 0 exactly
    return ProbDistribution(weights / weights.sum())


def log_softmax(logits: LogitVector, temperature: float = 1.0) -> np.ndarray:
    """Log-probabilities matching :func:`softmax`; masked entries are ``-inf``."""
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature!r}")
    scores = logits.scores if isinstance(logits, LogitVector) else _as_score_array(logits)
    finite = np.isfinite(scores)
    if not finite.any():
        raise ValueError("empty support")
    scaled = scores / temperature
    shifted = scaled - scaled[finite].max()
    log_norm = np.log(np.exp(shifted).sum())
    out = shifted - log_norm
    out[~finite] = NEG_INF
    return out


def argmax_token(x: Union[LogitVector, ProbDistribution, np.ndarray, Sequence[float]]) -> int:
    """Index of the maximal entry; ties break toward the lowest index."""
    if isinstance(x, LogitVector):
        arr = x.scores
    elif isinstance(x, ProbDistribution):
        arr = x.probs
    else:
        arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("argmax of an empty vector")
    return int(np.argmax(arr))
