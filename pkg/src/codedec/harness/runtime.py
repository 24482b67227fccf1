"""Provider and context construction for CLI runs.

The toy visual/description pairing mirrors the real setting at n-gram
scale: the v-side conditions on the full scene token sequence, while the
d-side conditions on a short model-generated summary of that scene — a
genuinely lossy stand-in for the self-generated image description.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from codedec.core import (
    DESCRIPTION_PROMPT,
    DUAL_STREAM_STRATEGIES,
    Context,
    ContextPair,
    DecodeConfig,
    Vocabulary,
)
from codedec.harness.config import ConfigError
from codedec.providers.base import LogitProvider, ProviderError
from codedec.providers.ngram import (
    NGramModel,
    encode_known_words,
    tokenize_words,
    train_from_text,
)
from codedec.providers.remote import RemoteProvider, RemoteSession
from codedec.providers.trace import TraceFile, TraceReplayProvider, load_trace
from codedec.strategies import decode

PROVIDERS = ("ngram", "trace", "remote")

DEFAULT_NGRAM_ORDER = 2
DEFAULT_SUMMARY_TOKENS = 8


@dataclass
class Runtime:
    """Everything a command needs to run one or more decodes."""

    provider_name: str
    provider_v: LogitProvider
    provider_d: Optional[LogitProvider]
    pair: ContextPair
    vocabulary: Vocabulary
    trace: Optional[TraceFile] = None
    session: Optional[RemoteSession] = None
    setup_seconds: Optional[float] = None
    description_text: Optional[str] = None
    model_name: str = ""

    def close(self) -> None:
        if self.session is not None:
            self.session.close()


def _encode_strict(vocabulary: Vocabulary, text: str, what: str) -> list[int]:
    ids = []
    for word in tokenize_words(text):
        try:
            ids.append(vocabulary.index(word))
        except KeyError as exc:
            raise ConfigError(f"{what}: word {word!r} is not in the corpus vocabulary") from exc
    return ids


def _summarize_scene(
    model: NGramModel, scene_ids: list[int], summary_tokens: int
) -> list[int]:
    """Toy analog of self-description: greedy continuation of the scene plus
    whatever description-prompt words the corpus vocabulary knows."""
    prompt_ids = encode_known_words(model.vocabulary, DESCRIPTION_PROMPT)
    base = Context(tuple(scene_ids + prompt_ids))
    summary, _ = decode(
        model,
        None,
        ContextPair(base, base),
        DecodeConfig(strategy="greedy", max_tokens=summary_tokens),
    )
    eos = model.vocabulary.eos_id
    if eos is not None and summary and summary[-1] == eos:
        summary = summary[:-1]
    return summary


def _build_ngram_runtime(args, config: DecodeConfig, dual: bool) -> Runtime:
    if not args.corpus:
        raise ConfigError("--corpus is required with --provider ngram")
    try:
        with open(args.corpus, "r", encoding="utf-8") as f:
            corpus_text = f.read()
    except OSError as exc:
        raise ProviderError(f"cannot read corpus {args.corpus}: {exc}") from exc
    try:
        model = train_from_text(
            corpus_text, order=args.order if args.order is not None else DEFAULT_NGRAM_ORDER
        )
    except ValueError as exc:
        raise ConfigError(f"corpus {args.corpus}: {exc}") from exc
    vocabulary = model.vocabulary

    lines = [line for line in corpus_text.splitlines() if line.strip()]
    scene_text = args.scene if args.scene is not None else lines[0]
    scene_ids = _encode_strict(vocabulary, scene_text, "scene")
    query_ids = _encode_strict(vocabulary, args.prompt or "", "prompt")
    v_ctx = scene_ids + query_ids

    provider_d: Optional[LogitProvider] = None
    d_ctx = v_ctx
    setup_seconds = None
    description_text = None
    if dual:
        start = time.perf_counter()
        summary_tokens = (
            args.summary_tokens
            if args.summary_tokens is not None
            else DEFAULT_SUMMARY_TOKENS
        )
        if summary_tokens < 1:
            raise ConfigError(f"--summary-tokens must be >= 1, got {summary_tokens}")
        summary = _summarize_scene(model, scene_ids, summary_tokens)
        setup_seconds = time.perf_counter() - start
        description_text = vocabulary.text(summary)
        d_ctx = summary + query_ids
        provider_d = model
    return Runtime(
        provider_name="ngram",
        provider_v=model,
        provider_d=provider_d,
        pair=ContextPair(Context(tuple(v_ctx)), Context(tuple(d_ctx))),
        vocabulary=vocabulary,
        setup_seconds=setup_seconds,
        description_text=description_text,
        model_name=f"ngram(order={model.order})",
    )


def _build_trace_runtime(args, config: DecodeConfig, dual: bool) -> Runtime:
    if not args.trace_file:
        raise ConfigError("--trace-file is required with --provider trace")
    try:
        trace = load_trace(args.trace_file)
    except OSError as exc:
        raise ProviderError(f"cannot read trace {args.trace_file}: {exc}") from exc
    provider_v = TraceReplayProvider(trace, "v")
    provider_d = None
    if dual:
        if not trace.has_description_stream():
            raise ConfigError(
                f"strategy {config.strategy!r} needs a description-side provider, "
                f"but {args.trace_file} has no d-side logits"
            )
        provider_d = TraceReplayProvider(trace, "d")
    empty = Context(())
    return Runtime(
        provider_name="trace",
        provider_v=provider_v,
        provider_d=provider_d,
        pair=ContextPair(empty, empty),
        vocabulary=trace.vocabulary(),
        trace=trace,
        model_name=trace.header.model,
    )


def _build_remote_runtime(args, config: DecodeConfig, dual: bool) -> Runtime:
    if not args.endpoint:
        raise ConfigError("--endpoint is required with --provider remote")
    if dual and not args.image:
        raise ConfigError(
            f"strategy {config.strategy!r} over --provider remote needs --image: "
            "the server generates its description from the image first"
        )
    try:
        session = RemoteSession.connect(args.endpoint, timeout=args.timeout)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        setup_seconds = None
        description_text = None
        if args.image:
            prompt = args.describe_prompt if args.describe_prompt else DESCRIPTION_PROMPT
            start = time.perf_counter()
            description_text = session.describe(args.image, prompt)
            setup_seconds = time.perf_counter() - start
        query_ids = session.tokenize(args.prompt) if args.prompt else []
        ctx = Context(tuple(query_ids))
        provider_v = RemoteProvider(session, "v")
        provider_d = RemoteProvider(session, "d") if dual else None
        return Runtime(
            provider_name="remote",
            provider_v=provider_v,
            provider_d=provider_d,
            pair=ContextPair(ctx, ctx),
            vocabulary=provider_v.vocabulary,
            session=session,
            setup_seconds=setup_seconds,
            description_text=description_text,
            model_name=session.server_info.get("model", ""),
        )
    except BaseException:
        session.close()
        raise


_FLAG_SCOPE = {
    "corpus": ("ngram",),
    "order": ("ngram",),
    "scene": ("ngram",),
    "summary_tokens": ("ngram",),
    "trace_file": ("trace",),
    "endpoint": ("remote",),
    "image": ("remote",),
    "describe_prompt": ("remote",),
}


def check_flag_scope(args, provider: str) -> None:
    """Misapplied provider flags are config errors, not silent no-ops."""
    for attr, providers in _FLAG_SCOPE.items():
        if getattr(args, attr, None) is not None and provider not in providers:
            flag = "--" + attr.replace("_", "-")
            wanted = " or ".join(f"--provider {p}" for p in providers)
            raise ConfigError(f"{flag} only applies to {wanted}")


def build_runtime(args, config: DecodeConfig) -> Runtime:
    provider = args.provider or "ngram"
    if provider not in PROVIDERS:
        raise ConfigError(f"provider: {provider!r} not one of {PROVIDERS}")
    check_flag_scope(args, provider)
    dual = config.strategy in DUAL_STREAM_STRATEGIES
    if provider == "ngram":
        return _build_ngram_runtime(args, config, dual)
    if provider == "trace":
        return _build_trace_runtime(args, config, dual)
    return _build_remote_runtime(args, config, dual)
