"""One serving session: loaded image, self-generated description, logits.

The session realizes the two conditioning modes the decode protocol
exposes.  Side "v" scores the image patches followed by the caller's
context.  Side "d" scores the same sequence with the description token
ids substituted where the image patches were — after substitution the
input contains no image content at all.  Side "d" is only meaningful
once ``describe`` has generated that description; before then it is a
session error with a stable code.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from lmmbridge.model import ToyMultimodalModel

#: canonical instruction used to elicit the comprehensive description;
#: must match the decoding engine's constant word for word
DESCRIPTION_PROMPT = (
    "Provide a detailed description of the image, covering all visible "
    "elements and their interactions, so as to thoroughly answer any "
    "potential questions about the image."
)

DEFAULT_DESCRIPTION_TOKENS = 12


class SessionError(Exception):
    """Request-level failure with a stable protocol error code."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message


class BridgeSession:
    """Model handle plus the visual content and description it serves from."""

    def __init__(
        self,
        model: ToyMultimodalModel,
        description_prompt: str = DESCRIPTION_PROMPT,
        max_description_tokens: int = DEFAULT_DESCRIPTION_TOKENS,
    ) -> None:
        if max_description_tokens < 1:
            raise ValueError(
                f"max_description_tokens must be >= 1, got {max_description_tokens}"
            )
        self.model = model
        self.description_prompt = description_prompt
        self.max_description_tokens = max_description_tokens
        self.image_ref: Optional[str] = None
        self.image: Optional[np.ndarray] = None
        self.description: Optional[list[int]] = None
        self.prompt: Optional[str] = None

    # --- Step 1: self-description -------------------------------------
    def describe(self, image: str, prompt: Optional[str] = None) -> str:
        """Load the image and greedy-generate its description."""
        prompt_text = prompt if prompt is not None else self.description_prompt
        features = self.model.image_features(image)
        slots = list(self.model.patch_slots(features)) + self.model.tokenize(prompt_text)
        ids = self.model.greedy(
            slots, self.max_description_tokens, min_tokens=1
        )
        self.image_ref = image
        self.image = features
        self.description = ids
        self.prompt = prompt_text
        return self.model.text(ids)

    # --- conditioning sequences ---------------------------------------
    def input_slots(self, side: str, context: Sequence[int]) -> list:
        if side == "v":
            prefix = (
                self.model.patch_slots(self.image) if self.image is not None else []
            )
            return [*prefix, *context]
        if side == "d":
            if self.description is None:
                raise SessionError("description_not_generated", "description not generated")
            return [*self.description, *context]
        raise SessionError("invalid_params", f"side must be 'v' or 'd', got {side!r}")

    def input_ids(self, side: str, context: Sequence[int]) -> list[int]:
        """Token-id view of the conditioning sequence; image patches show
        as the placeholder id.  This is what the substitution invariant
        is stated over."""
        ids = []
        for slot in self.input_slots(side, context):
            ids.append(self.model.image_id if isinstance(slot, np.ndarray) else int(slot))
        return ids

    def logits(self, side: str, context: Sequence[int]) -> np.ndarray:
        for token in context:
            if not 0 <= int(token) < self.model.n:
                raise SessionError(
                    "invalid_params",
                    f"context id {token} out of range for n={self.model.n}",
                )
        return self.model.next_logits(self.input_slots(side, context))

    # --- trace recording ----------------------------------------------
    def record_steps(
        self, image: str, query: str, steps: int
    ) -> tuple[list[dict], list[int]]:
        """Greedy-decode ``steps`` tokens, dumping both logit streams.

        Returns (step dicts for the trace writer, query token ids).  The
        recorded choice at each step is the argmax of the visual-stream
        logits; decoding stops early on EOS.
        """
        if steps < 1:
            raise ValueError(f"steps must be >= 1, got {steps}")
        self.describe(image)
        query_ids = self.model.tokenize(query)
        context = list(query_ids)
        records: list[dict] = []
        for t in range(steps):
            logits_v = self.logits("v", context)
            logits_d = self.logits("d", context)
            choice = int(np.argmax(logits_v))
            records.append(
                {
                    "step": t,
                    "logits_v": [float(x) for x in logits_v],
                    "logits_d": [float(x) for x in logits_d],
                    "recorded_choice": choice,
                }
            )
            context.append(choice)
            if choice == self.model.eos_id:
                break
        return records, query_ids
