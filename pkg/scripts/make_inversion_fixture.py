#!/usr/bin/env python3
"""Construct the case-study trace where the contrast flips the greedy choice.

The target pattern at the flip step, from the published token-level case
study: the ground-truth token scores 15.02 on the visual stream and 16.66
after the contrast, while the distractor scores 15.34 pre and 15.30 post —
so greedy picks the distractor and the contrast flips the argmax.

Given fixed visual logits, the post-contrast value c = (1 + a) * v - a * d
determines the description logit d = v + (v - c) / a for any contrast
weight a — but a itself is 1 minus the divergence between the two
distributions, which depends on d.  We solve that fixed point by damped
iteration, with the tail of the vocabulary sharing identical logits across
streams so the two distributions differ mainly at the two tokens of
interest.  All arithmetic goes through the independent oracle; the engine
is only used to serialize the result.

Writes tests/fixtures/inversion_case.trace.json (canonical form).
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import oracle_code_step, oracle_softmax  # noqa: E402

from codedec.providers.trace import (  # noqa: E402
    TraceFile,
    TraceHeader,
    TraceStep,
    save_trace,
)
from codedec.core import LogitVector  # noqa: E402

VOCAB = (
    "Fage", "Yoplait", "shows", "a", "container", "of", "yogurt", "brand",
    "the", "image", "with", "on", "table", "white", "plastic", "cup",
    "lid", "spoon", "label", "logo", "text", "red", "blue", "</s>",
)
TRUTH = VOCAB.index("Fage")        # ground-truth token, hurt by the description
DISTRACTOR = VOCAB.index("Yoplait")  # greedy's (wrong) choice

V_TRUTH, V_DISTRACTOR = 15.02, 15.34       # pre-contrast logits
C_TRUTH, C_DISTRACTOR = 16.66, 15.30       # post-contrast targets
K = 0.3
TAIL_LOGIT = 13.15  # spreads visual mass so the divergence stays moderate
EOS_LOGIT = 5.0


def flip_step_logits() -> tuple[list[float], list[float], dict]:
    n = len(VOCAB)
    logits_v = [TAIL_LOGIT] * n
    logits_v[TRUTH] = V_TRUTH
    logits_v[DISTRACTOR] = V_DISTRACTOR
    logits_v[-1] = EOS_LOGIT

    alpha = 0.5
    for _ in range(500):
        logits_d = list(logits_v)
        logits_d[TRUTH] = V_TRUTH + (V_TRUTH - C_TRUTH) / alpha
        logits_d[DISTRACTOR] = V_DISTRACTOR + (V_DISTRACTOR - C_DISTRACTOR) / alpha
        result = oracle_code_step(logits_v, logits_d, K)
        new_alpha = result["alpha_t"]
        if abs(new_alpha - alpha) < 1e-15:
            alpha = new_alpha
            break
        alpha = 0.5 * alpha + 0.5 * new_alpha
    result = oracle_code_step(logits_v, logits_d, K)
    return logits_v, logits_d, result


def agreement_step_logits(favored: int) -> list[float]:
    logits = [12.0 + 0.05 * i for i in range(len(VOCAB))]
    logits[favored] = 16.0
    logits[-1] = EOS_LOGIT
    return logits


def main() -> None:
    logits_v, logits_d, result = flip_step_logits()
    contrast = result["contrast"]
    checks = {
        "alpha_t": result["alpha_t"],
        "beta_t": result["beta_t"],
        "head": sorted(result["head"]),
        "contrast[TRUTH]": contrast[TRUTH],
        "contrast[DISTRACTOR]": contrast[DISTRACTOR],
    }
    for name, value in checks.items():
        print(f"{name}: {value}")
    assert abs(contrast[TRUTH] - C_TRUTH) < 1e-9, "truth target missed"
    assert abs(contrast[DISTRACTOR] - C_DISTRACTOR) < 1e-9, "distractor target missed"
    assert result["head"] == {TRUTH, DISTRACTOR}, "head must be exactly the two tokens"
    dist = result["dist"]
    assert max(range(len(dist)), key=dist.__getitem__) == TRUTH, "contrast must pick truth"
    greedy = max(range(len(logits_v)), key=logits_v.__getitem__)
    assert greedy == DISTRACTOR, "greedy must pick the distractor"
    p_v = oracle_softmax(logits_v)
    print(f"P_v[TRUTH]={p_v[TRUTH]:.4f} P_v[DISTRACTOR]={p_v[DISTRACTOR]:.4f}")

    steps = []
    for t, favored in enumerate((VOCAB.index("shows"), VOCAB.index("a"))):
        logits = agreement_step_logits(favored)
        steps.append(
            TraceStep(
                step=t,
                logits_v=LogitVector(logits),
                logits_d=LogitVector(logits),
                recorded_choice=favored,
            )
        )
    steps.append(
        TraceStep(
            step=2,
            logits_v=LogitVector(logits_v),
            logits_d=LogitVector(logits_d),
            recorded_choice=DISTRACTOR,  # greedy recording picked the wrong token
        )
    )
    trace = TraceFile(
        header=TraceHeader(
            n=len(VOCAB),
            vocab=VOCAB,
            eos_id=len(VOCAB) - 1,
            model="inversion-case-study",
            prompt="What brand of yogurt is this?",
            k=K,
            alpha=1.0,
            beta=0.1,
            note=(
                "constructed flip-step fixture: visual logits favor the "
                "distractor, the contrast recovers the ground truth"
            ),
        ),
        steps=tuple(steps),
    )
    out = ROOT / "tests" / "fixtures" / "inversion_case.trace.json"
    save_trace(trace, str(out))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
