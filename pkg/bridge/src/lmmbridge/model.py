"""Deterministic toy multimodal backend.

Stands in for a real vision-language model at desk scale: a fixed
word-level vocabulary, projection weights drawn once from a seeded
generator, and image "features" derived by hashing the image reference
(file bytes when the path exists, the reference string otherwise).
Every output is a pure function of its inputs, so served logits,
generated descriptions, and recorded traces are bit-reproducible.

The input to the scorer is a sequence of slots: a slot is either a token
id or one image-patch feature vector.  Real backends would plug in here
behind the same slot interface; the registry ships only ``toy``.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path
from typing import Sequence, Union

import numpy as np

Slot = Union[int, np.ndarray]

VOCAB: tuple[str, ...] = (
    "<image>", "</s>", "a", "all", "and", "blue", "bowl", "bright", "cat",
    "color", "cup", "dog", "green", "image", "in", "is", "it", "kitchen",
    "large", "no", "of", "on", "photo", "red", "scene", "shows", "small",
    "table", "the", "this", "what", "white", "with", "yes",
)
IMAGE_TOKEN = "<image>"
EOS_TOKEN = "</s>"

HIDDEN = 16
FEATURES = 8
PATCHES = 4
#: recency weighting of earlier slots; the most recent slot has weight 1
DECAY = 0.8
#: inflates patch embeddings so visual content survives the recency decay
PATCH_GAIN = 2.5
LOGIT_SCALE = 3.0
WEIGHT_SEED = 0xC0DEC

_WORD = re.compile(r"[a-z']+|<image>|</s>")


class ModelError(Exception):
    """The requested model cannot be provided."""


class ToyMultimodalModel:
    """Seeded random-projection scorer over token and image-patch slots."""

    def __init__(self, name: str = "toy") -> None:
        self.name = name
        self.vocab = VOCAB
        self.n = len(VOCAB)
        self.image_id = VOCAB.index(IMAGE_TOKEN)
        self.eos_id = VOCAB.index(EOS_TOKEN)
        self._index = {word: i for i, word in enumerate(VOCAB)}
        rng = np.random.default_rng(WEIGHT_SEED)
        self._embed = rng.normal(0.0, 1.0, (self.n, HIDDEN))
        self._project = rng.normal(0.0, 1.0, (FEATURES, HIDDEN))
        self._out = rng.normal(0.0, 1.0, (HIDDEN, self.n))
        self._bias = rng.normal(0.0, 0.5, self.n)
        # the placeholder is an input-only token; make sure greedy loops
        # can never emit it
        self._bias[self.image_id] = -12.0
        # discourage (without forbidding) immediate end-of-sequence so
        # generated descriptions have some substance
        self._bias[self.eos_id] = -2.0
        self._patch_masks = rng.uniform(0.5, 1.5, (PATCHES, FEATURES))

    # --- text ----------------------------------------------------------
    def tokenize(self, text: str) -> list[int]:
        """Word-level ids; words outside the toy vocabulary are dropped."""
        return [
            self._index[w] for w in _WORD.findall(text.lower()) if w in self._index
        ]

    def text(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocab[i] for i in ids)

    # --- vision --------------------------------------------------------
    def image_features(self, image_ref: str) -> np.ndarray:
        """Content hash of the image, folded into FEATURES floats in [-1, 1)."""
        path = Path(image_ref)
        try:
            payload = path.read_bytes() if path.is_file() else image_ref.encode("utf-8")
        except OSError:
            payload = image_ref.encode("utf-8")
        digest = hashlib.sha256(payload).digest()
        pairs = np.frombuffer(digest[: 2 * FEATURES], dtype="<u2").astype(np.float64)
        return pairs / 65535.0 * 2.0 - 1.0

    def patch_slots(self, features: np.ndarray) -> list[np.ndarray]:
        return [features * mask for mask in self._patch_masks]

    # --- scoring -------------------------------------------------------
    def _slot_embedding(self, slot: Slot) -> np.ndarray:
        if isinstance(slot, np.ndarray):
            return PATCH_GAIN * (slot @ self._project)
        if not 0 <= slot < self.n:
            raise ValueError(f"token id {slot} out of range for n={self.n}")
        return self._embed[slot]

    def next_logits(self, slots: Sequence[Slot]) -> np.ndarray:
        state = np.zeros(HIDDEN)
        for j, slot in enumerate(slots):
            state += DECAY ** (len(slots) - 1 - j) * self._slot_embedding(slot)
        return np.tanh(state) @ self._out * LOGIT_SCALE + self._bias

    def greedy(
        self, slots: Sequence[Slot], max_tokens: int, min_tokens: int = 0
    ) -> list[int]:
        """Greedy continuation; stops at EOS (not emitted) or the cap."""
        current = list(slots)
        out: list[int] = []
        for _ in range(max_tokens):
            logits = self.next_logits(current)
            logits[self.image_id] = -np.inf
            if len(out) < min_tokens:
                logits[self.eos_id] = -np.inf
            choice = int(np.argmax(logits))
            if choice == self.eos_id:
                break
            out.append(choice)
            current.append(choice)
        return out


def load_model(model_id: str, device: str = "cpu") -> ToyMultimodalModel:
    """Model registry.  Only the deterministic toy backend ships; real
    checkpoints would register here behind the same slot interface."""
    if model_id != "toy":
        raise ModelError(f"unknown model {model_id!r}; available: toy")
    if device != "cpu":
        raise ModelError(f"the toy backend runs on cpu only, got device {device!r}")
    return ToyMultimodalModel(name=model_id)
