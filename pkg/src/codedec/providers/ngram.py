"""Toy word-level n-gram model with additive smoothing and backoff.

Small enough to train in milliseconds, deterministic, and with a fully
inspectable distribution — the standard test bed for the decoding
strategies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from codedec.core import Context, LogitVector, Vocabulary

EOS_TOKEN = "</s>"


def tokenize_words(text: str) -> list[str]:
    """Whitespace word tokenizer used throughout the toy setting."""
    return text.split()


def build_vocabulary(lines: Sequence[str], eos_token: str = EOS_TOKEN) -> Vocabulary:
    """Sorted unique words across all lines, plus a trailing eos token."""
    words = sorted({w for line in lines for w in tokenize_words(line)})
    if eos_token in words:
        raise ValueError(f"corpus already contains the reserved token {eos_token!r}")
    tokens = tuple(words) + (eos_token,)
    return Vocabulary(tokens=tokens, eos_id=len(tokens) - 1)


def encode_line(vocabulary: Vocabulary, line: str, append_eos: bool = True) -> list[int]:
    ids = [vocabulary.index(w) for w in tokenize_words(line)]
    if append_eos and vocabulary.eos_id is not None:
        ids.append(vocabulary.eos_id)
    return ids


def encode_known_words(vocabulary: Vocabulary, text: str) -> list[int]:
    """Encode a free-text prompt, silently dropping out-of-vocabulary words."""
    known = []
    for word in tokenize_words(text):
        try:
            known.append(vocabulary.index(word))
        except KeyError:
            continue
    return known


@dataclass
class NGramModel:
    """Count-based n-gram next-token model; also a LogitProvider.

    ``counts[o]`` maps an (o-1)-token context tuple to a count vector over
    the vocabulary.  Prediction backs off from the highest order whose
    context was seen in training down to the unigram, then applies additive
    smoothing, so every logit is finite.
    """

    vocabulary: Vocabulary
    order: int
    smoothing: float
    counts: dict[int, dict[tuple[int, ...], np.ndarray]] = field(repr=False)
    max_context: Optional[int] = None

    def next_logits(self, context: Context) -> LogitVector:
        ids = context.token_ids
        n = self.vocabulary.size
        for o in range(self.order, 0, -1):
            if len(ids) < o - 1:
                continue
            key = tuple(ids[len(ids) - (o - 1) :]) if o > 1 else ()
            vector = self.counts[o].get(key)
            if vector is not None:
                probs = (vector + self.smoothing) / (vector.sum() + self.smoothing * n)
                return LogitVector(np.log(probs))
        raise AssertionError("unigram table always matches")  # pragma: no cover


def ngram_train(
    sequences: Sequence[Sequence[int]],
    vocabulary: Vocabulary,
    order: int = 2,
    smoothing: float = 1.0,
) -> NGramModel:
    """Count all 1..order-grams over the training sequences.

    The unigram table is keyed by the empty context, so prediction is
    defined for any context once at least one token has been seen.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if smoothing <= 0:
        raise ValueError(f"smoothing must be > 0, got {smoothing}")
    if not any(len(seq) for seq in sequences):
        raise ValueError("empty corpus")
    n = vocabulary.size
    counts: dict[int, dict[tuple[int, ...], np.ndarray]] = {
        o: {} for o in range(1, order + 1)
    }
    for seq in sequences:
        for o in range(1, order + 1):
            for i in range(o - 1, len(seq)):
                key = tuple(seq[i - o + 1 : i])
                vector = counts[o].get(key)
                if vector is None:
                    vector = counts[o][key] = np.zeros(n)
                token = seq[i]
                if not 0 <= token < n:
                    raise ValueError(f"token id {token} outside vocabulary of {n}")
                vector[token] += 1.0
    return NGramModel(
        vocabulary=vocabulary, order=order, smoothing=smoothing, counts=counts
    )


def train_from_text(text: str, order: int = 2, smoothing: float = 1.0) -> NGramModel:
    """Build vocabulary and model from newline-separated corpus text."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty corpus")
    vocabulary = build_vocabulary(lines)
    sequences = [encode_line(vocabulary, line) for line in lines]
    return ngram_train(sequences, vocabulary, order=order, smoothing=smoothing)
