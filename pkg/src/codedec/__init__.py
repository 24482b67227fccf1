"""Model-agnostic decoding engine with divergence-driven dynamic contrast.

The package is organized around a small set of value types (`core`), the
bounded divergence statistic and its derived controls (`divergence`), the
decoding strategies themselves (`strategies`), pluggable logit sources
(`providers`), and a CLI harness (`harness`).
"""

from codedec.core import (
    DESCRIPTION_PROMPT,
    Context,
    ContextPair,
    DecodeConfig,
    LogitVector,
    ProbDistribution,
    StepRecord,
    Vocabulary,
    argmax_token,
    log_softmax,
    softmax,
)
from codedec.divergence import bounded_divergence, restriction_params
from codedec.strategies import (
    BeamHypothesis,
    CdFixedParams,
    beam_decode,
    cd_distribution,
    code_step,
    decode,
    nucleus_step,
    plausibility_head,
)

__all__ = [
    "DESCRIPTION_PROMPT",
    "Context",
    "ContextPair",
    "DecodeConfig",
    "LogitVector",
    "ProbDistribution",
    "StepRecord",
    "Vocabulary",
    "argmax_token",
    "log_softmax",
    "softmax",
    "bounded_divergence",
    "restriction_params",
    "BeamHypothesis",
    "CdFixedParams",
    "beam_decode",
    "cd_distribution",
    "code_step",
    "decode",
    "nucleus_step",
    "plausibility_head",
]

__version__ = "0.1.0"
