"""Provider interface: any deterministic source of next-token logits."""

from __future__ import annotations

from typing import Optional, Protocol, runtime_checkable

from codedec.core import Context, LogitVector, Vocabulary


class ProviderError(Exception):
    """A logit source failed to answer (load, lookup, or transport)."""


class ContextOverflowError(ProviderError):
    """Conditioning context exceeds the provider's declared maximum length."""


@runtime_checkable
class LogitProvider(Protocol):
    """Deterministic next-token scorer over a fixed vocabulary.

    Implementations must be pure functions of the context: sampling lives in
    the strategies, never in a provider.  ``max_context`` is ``None`` for
    unbounded sources.
    """

    vocabulary: Vocabulary
    max_context: Optional[int]

    def next_logits(self, context: Context) -> LogitVector: ...
