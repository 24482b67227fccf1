"""Decoding strategies: greedy, nucleus, beam, fixed-alpha contrast, and the
divergence-driven dynamic contrast with its adaptive candidate constraint."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from codedec.core import (
    DUAL_STREAM_STRATEGIES,
    NEG_INF,
    Context,
    ContextPair,
    DecodeConfig,
    LogitVector,
    ProbDistribution,
    StepRecord,
    argmax_token,
    log_softmax,
    softmax,
)
from codedec.divergence import bounded_divergence
from codedec.providers.base import ContextOverflowError, LogitProvider, ProviderError


@dataclass(frozen=True)
class CdFixedParams:
    """Static contrast weight and plausibility cutoff for fixed contrastive
    decoding."""

    alpha: float = 1.0
    beta: float = 0.1


@dataclass(frozen=True)
class BeamHypothesis:
    token_ids: tuple[int, ...]
    cum_logprob: float
    finished: bool = False


def cd_distribution(
    logits_expert: LogitVector, logits_amateur: LogitVector, alpha: float
) -> ProbDistribution:
    """softmax((1 + alpha) * expert - alpha * amateur) at unit temperature.

    Tokens where either stream is -inf are excluded (probability zero): a
    token outside one stream's support has no well-defined contrast score.
    """
    e = logits_expert.scores
    a = logits_amateur.scores
    if e.shape != a.shape:
        raise ValueError(f"logit length mismatch: {e.size} vs {a.size}")
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    both = np.isfinite(e) & np.isfinite(a)
    if not both.any():
        raise ValueError("empty support: no token is finite in both streams")
    out = np.full(e.size, NEG_INF)
    out[both] = (1.0 + alpha) * e[both] - alpha * a[both]
    return softmax(LogitVector(out), 1.0)


def plausibility_head(p_base: ProbDistribution, beta: float) -> frozenset[int]:
    """Candidate set {i : p[i] >= beta * max(p)}.

    beta = 0 keeps the full vocabulary; beta = 1 keeps only the argmax
    (and exact ties).  The argmax always qualifies since max >= beta * max
    for beta in [0, 1].
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    probs = p_base.probs
    threshold = beta * probs.max()
    return frozenset(int(i) for i in np.flatnonzero(probs >= threshold))


def code_step(
    logits_v: LogitVector,
    logits_d: LogitVector,
    k: float,
    step: int = 0,
) -> tuple[ProbDistribution, StepRecord]:
    """One step of divergence-driven contrast.

    Both streams are turned into unit-temperature distributions; their
    bounded divergence D sets the contrast weight alpha_t = 1 - D and the
    candidate cutoff beta_t = D.  The candidate head is taken from the
    visual distribution, the contrast (1 + alpha_t) * L_v - alpha_t * L_d is
    applied inside it, and everything outside is forced to -inf so excluded
    tokens carry exactly zero probability.

    Infinite-logit conventions (limit semantics of the contrast):
      * L_v[i] = -inf: token i is unsupported, stays -inf.
      * alpha_t = 0 (maximal divergence): the contrast degenerates to L_v
        restricted to the head; L_d is ignored entirely.
      * alpha_t > 0 and L_d[i] = -inf with L_v[i] finite: -alpha_t * L_d[i]
        diverges to +inf, so in the limit such tokens absorb all mass.  The
        output is restricted to them, weighted by softmax of their
        amplified visual scores (1 + alpha_t) * L_v.
    """
    n = len(logits_v)
    if n != len(logits_d):
        raise ValueError(f"logit length mismatch: {n} vs {len(logits_d)}")
    p_v = softmax(logits_v, 1.0)
    p_d = softmax(logits_d, 1.0)
    divergence = bounded_divergence(p_v, p_d, k)
    alpha_t = 1.0 - divergence
    beta_t = divergence
    head = plausibility_head(p_v, beta_t)
    assert head, "candidate head cannot be empty: the visual argmax always qualifies"

    v = logits_v.scores
    d = logits_d.scores
    head_mask = np.zeros(n, dtype=bool)
    head_mask[list(head)] = True
    v_finite = np.isfinite(v)
    effective = np.full(n, NEG_INF)
    if alpha_t == 0.0:
        keep = head_mask & v_finite
        effective[keep] = v[keep]
    else:
        boosted = head_mask & v_finite & ~np.isfinite(d)
        if boosted.any():
            effective[boosted] = (1.0 + alpha_t) * v[boosted]
        else:
            keep = head_mask & v_finite
            effective[keep] = (1.0 + alpha_t) * v[keep] - alpha_t * d[keep]
    contrasted = LogitVector(effective)
    dist = softmax(contrasted, 1.0)
    record = StepRecord(
        step=step,
        logits_v=logits_v,
        chosen=argmax_token(dist),
        logits_d=logits_d,
        divergence=divergence,
        alpha_t=alpha_t,
        beta_t=beta_t,
        head_set=head,
        contrasted_logits=contrasted,
    )
    return dist, record


def cd_fixed_step(
    logits_v: LogitVector,
    logits_d: LogitVector,
    params: CdFixedParams,
    step: int = 0,
) -> tuple[ProbDistribution, StepRecord]:
    """One step of fixed contrastive decoding with a static plausibility head.

    The head {i : p_v[i] >= beta * max(p_v)} is computed from the expert
    stream, the fixed-alpha contrast is applied inside it, and everything
    outside (or unsupported by either stream) is forced to -inf.
    """
    n = len(logits_v)
    if n != len(logits_d):
        raise ValueError(f"logit length mismatch: {n} vs {len(logits_d)}")
    p_v = softmax(logits_v, 1.0)
    head = plausibility_head(p_v, params.beta)
    v = logits_v.scores
    d = logits_d.scores
    head_mask = np.zeros(n, dtype=bool)
    head_mask[list(head)] = True
    keep = head_mask & np.isfinite(v) & np.isfinite(d)
    if not keep.any():
        raise ValueError("empty support: no head token is finite in both streams")
    effective = np.full(n, NEG_INF)
    effective[keep] = (1.0 + params.alpha) * v[keep] - params.alpha * d[keep]
    contrasted = LogitVector(effective)
    dist = softmax(contrasted, 1.0)
    record = StepRecord(
        step=step,
        logits_v=logits_v,
        chosen=argmax_token(dist),
        logits_d=logits_d,
        head_set=head,
        contrasted_logits=contrasted,
    )
    return dist, record


def nucleus_step(p: ProbDistribution, top_p: float, rng: np.random.Generator) -> int:
    """Sample from the smallest prefix of the descending-sorted distribution
    whose cumulative mass reaches top_p, after renormalization."""
    if not 0.0 < top_p <= 1.0:
        raise ValueError(f"top_p must be in (0, 1], got {top_p}")
    probs = p.probs
    order = np.argsort(-probs, kind="stable")  # ties broken toward lower index
    sorted_probs = probs[order]
    cumulative = np.cumsum(sorted_probs)
    cut = int(np.searchsorted(cumulative, top_p, side="left")) + 1
    cut = min(cut, probs.size)
    kept = order[:cut]
    kept_probs = sorted_probs[:cut]
    kept_probs = kept_probs / kept_probs.sum()
    return int(rng.choice(kept, p=kept_probs))


def _sample(dist: ProbDistribution, rng: np.random.Generator) -> int:
    probs = dist.probs
    return int(rng.choice(probs.size, p=probs / probs.sum()))


def _query(provider: LogitProvider, context: Context, step: int) -> LogitVector:
    limit = provider.max_context
    if limit is not None and len(context) > limit:
        raise ContextOverflowError(
            f"context length {len(context)} exceeds provider limit {limit} at step {step}"
        )
    try:
        logits = provider.next_logits(context)
    except ProviderError as exc:
        raise type(exc)(f"step {step}: {exc}") from exc
    if len(logits) != provider.vocabulary.size:
        raise ProviderError(
            f"step {step}: provider returned {len(logits)} logits for a "
            f"vocabulary of {provider.vocabulary.size}"
        )
    return logits


def beam_decode(
    provider: LogitProvider, context: Context, config: DecodeConfig
) -> list[int]:
    """Standard beam search over cumulative log-probability.

    Hypotheses that emit the end-of-sequence token are frozen and keep
    competing on score.  Ties break deterministically: higher cumulative
    log-probability first, then lexicographically smaller token sequence,
    so num_beams=1 reproduces greedy decoding exactly.
    """
    if config.num_beams < 1:
        raise ValueError(f"num_beams must be >= 1, got {config.num_beams}")
    eos = provider.vocabulary.eos_id
    beams = [BeamHypothesis(token_ids=(), cum_logprob=0.0)]
    for t in range(config.max_tokens):
        if all(h.finished for h in beams):
            break
        candidates: list[BeamHypothesis] = []
        for hyp in beams:
            if hyp.finished:
                candidates.append(hyp)
                continue
            logits = _query(provider, Context(context.token_ids + hyp.token_ids), t)
            logprobs = log_softmax(logits, config.temperature)
            top = np.argsort(-logprobs, kind="stable")[: config.num_beams]
            for token in top:
                if logprobs[token] == NEG_INF:
                    continue
                token = int(token)
                candidates.append(
                    BeamHypothesis(
                        token_ids=hyp.token_ids + (token,),
                        cum_logprob=hyp.cum_logprob + float(logprobs[token]),
                        finished=eos is not None and token == eos,
                    )
                )
        candidates.sort(key=lambda h: (-h.cum_logprob, h.token_ids))
        beams = candidates[: config.num_beams]
    return list(beams[0].token_ids)


def decode(
    provider_v: LogitProvider,
    provider_d: Optional[LogitProvider],
    pair: ContextPair,
    config: DecodeConfig,
) -> tuple[list[int], list[StepRecord]]:
    """Run one decoding loop and return (emitted token ids, per-step records).

    The two contrastive strategies query both providers every step; greedy
    and nucleus never touch provider_d.  Beam search delegates to
    beam_decode and returns no step records.  Selection: nucleus always
    samples (that is its point); greedy and the contrastive strategies take
    the argmax unless selector="sample" asks for ancestral sampling from
    the final distribution.  The generator is numpy's default PCG64 seeded
    with rng_seed, creating one instance per call.
    """
    problems = config.validate()
    if problems:
        raise ValueError("; ".join(problems))
    if config.strategy in DUAL_STREAM_STRATEGIES and provider_d is None:
        raise ValueError(
            f"strategy {config.strategy!r} contrasts two streams and needs a "
            "description-side provider"
        )
    if config.strategy == "beam":
        return beam_decode(provider_v, pair.visual_ctx, config), []

    rng = np.random.default_rng(config.rng_seed)
    eos = provider_v.vocabulary.eos_id
    cd_params = CdFixedParams(alpha=config.alpha, beta=config.beta)
    tokens: list[int] = []
    records: list[StepRecord] = []
    current = pair
    for t in range(config.max_tokens):
        logits_v = _query(provider_v, current.visual_ctx, t)
        if config.strategy == "greedy":
            dist = softmax(logits_v, config.temperature)
            chosen = _sample(dist, rng) if config.selector == "sample" else argmax_token(dist)
            record = StepRecord(step=t, logits_v=logits_v, chosen=chosen)
        elif config.strategy == "nucleus":
            dist = softmax(logits_v, config.temperature)
            chosen = nucleus_step(dist, config.top_p, rng)
            record = StepRecord(step=t, logits_v=logits_v, chosen=chosen)
        elif config.strategy == "cd_fixed":
            logits_d = _query(provider_d, current.description_ctx, t)
            dist, record = cd_fixed_step(logits_v, logits_d, cd_params, step=t)
            if config.selector == "sample":
                record = dataclasses.replace(record, chosen=_sample(dist, rng))
            chosen = record.chosen
        elif config.strategy == "code":
            logits_d = _query(provider_d, current.description_ctx, t)
            dist, record = code_step(logits_v, logits_d, config.k, step=t)
            if config.selector == "sample":
                record = dataclasses.replace(record, chosen=_sample(dist, rng))
            chosen = record.chosen
        else:  # pragma: no cover - validate() rejects unknown strategies
            raise ValueError(f"unknown strategy {config.strategy!r}")
        tokens.append(chosen)
        records.append(record)
        current = current.extend(chosen)
        if eos is not None and chosen == eos:
            break
    return tokens, records
