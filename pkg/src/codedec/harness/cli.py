"""Command-line interface: decode, trace, bench, compare, describe.

Exit codes: 0 success; 2 configuration error; 3 provider/transport error;
4 protocol or recorded-format violation.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Any, Optional

import numpy as np

from codedec.core import DESCRIPTION_PROMPT, DUAL_STREAM_STRATEGIES, DecodeConfig
from codedec.harness.config import (
    ConfigError,
    build_config,
    load_config_file,
    parse_strategy_item,
)
from codedec.harness.render import (
    parse_step_range,
    render_trace_human,
    render_trace_machine,
)
from codedec.harness.report import CountingProvider, RunReport, canonical_json
from codedec.harness.runtime import Runtime, build_runtime
from codedec.providers.base import ProviderError
from codedec.providers.remote import DEFAULT_TIMEOUT, ProtocolError, RemoteSession
from codedec.providers.trace import (
    TraceFormatError,
    load_trace,
    save_trace,
    trace_from_records,
)
from codedec.strategies import decode

_CONFIG_FLAG_FIELDS = {
    "strategy": "strategy",
    "alpha": "alpha",
    "beta": "beta",
    "k": "k",
    "top_p": "top_p",
    "temperature": "temperature",
    "num_beams": "num_beams",
    "max_tokens": "max_tokens",
    "seed": "rng_seed",
    "selector": "selector",
}


def _collect_config_flags(args: argparse.Namespace) -> dict[str, Any]:
    values = {}
    for attr, field in _CONFIG_FLAG_FIELDS.items():
        value = getattr(args, attr, None)
        if value is not None:
            values[field] = value
    return values


def _load_base_config(args: argparse.Namespace) -> tuple[DecodeConfig, frozenset[str]]:
    file_values = load_config_file(args.config) if args.config else {}
    return build_config(file_values, _collect_config_flags(args))


def _configs_for_items(
    base: DecodeConfig, items: list[str]
) -> list[DecodeConfig]:
    configs = []
    for item in items:
        name, overrides = parse_strategy_item(item)
        config = base.with_overrides(strategy=name, **overrides)
        problems = config.validate()
        if name == "code" and "num_beams" in overrides:
            problems.append("num_beams: beam search cannot be combined with strategy 'code'")
        if problems:
            raise ConfigError("\n".join(f"{item}: {p}" for p in problems))
        configs.append(config)
    return configs


def _runtime_for(args: argparse.Namespace, configs: list[DecodeConfig]) -> Runtime:
    """Build one shared runtime; dual-stream contexts are prepared when any
    requested strategy needs them."""
    probe = configs[0]
    for config in configs:
        if config.strategy in DUAL_STREAM_STRATEGIES:
            probe = config
            break
    return build_runtime(args, probe)


def run_one(runtime: Runtime, config: DecodeConfig, label: str) -> RunReport:
    counted_v = CountingProvider(runtime.provider_v)
    counted_d = (
        CountingProvider(runtime.provider_d) if runtime.provider_d is not None else None
    )
    start = time.perf_counter()
    tokens, records = decode(counted_v, counted_d, runtime.pair, config)
    wall = time.perf_counter() - start
    divergence_from_recorded = None
    if runtime.trace is not None:
        divergence_from_recorded = [
            t
            for t, token in enumerate(tokens)
            if token != runtime.trace.steps[t].recorded_choice
        ]
    return RunReport(
        strategy=config.strategy,
        label=label,
        provider_name=runtime.provider_name,
        config=config,
        token_ids=tokens,
        text=runtime.vocabulary.text(tokens),
        records=records,
        wall_seconds=wall,
        calls_v=counted_v.calls,
        calls_d=counted_d.calls if counted_d is not None else 0,
        setup_seconds=runtime.setup_seconds,
        divergence_from_recorded=divergence_from_recorded,
    )


def _emit(args: argparse.Namespace, text_form: str, machine_payload: dict) -> None:
    if args.output == "machine":
        sys.stdout.write(canonical_json(machine_payload))
    else:
        sys.stdout.write(text_form)


# --- subcommands --------------------------------------------------------

def cmd_decode(args: argparse.Namespace) -> int:
    config, _ = _load_base_config(args)
    if args.record_trace and config.strategy == "beam":
        raise ConfigError("--record-trace is not available with strategy 'beam' (no per-step records)")
    runtime = build_runtime(args, config)
    try:
        report = run_one(runtime, config, label=config.strategy)
        payload = {"command": "decode", "description": runtime.description_text}
        payload.update(report.to_machine(include_timing=False))
        text_lines = []
        if runtime.description_text is not None:
            text_lines.append(f"description: {runtime.description_text}")
        text_lines.append(report.to_text())
        if args.record_trace:
            trace = trace_from_records(
                report.records,
                runtime.vocabulary,
                model=runtime.model_name,
                prompt=args.prompt or "",
                k=config.k,
                alpha=config.alpha,
                beta=config.beta,
                note=f"strategy={config.strategy} seed={config.rng_seed}",
            )
            save_trace(trace, args.record_trace)
        _emit(args, "\n".join(text_lines), payload)
        if args.report_file:
            with open(args.report_file, "w", encoding="utf-8") as f:
                f.write(canonical_json(payload))
        return 0
    finally:
        runtime.close()


def cmd_trace(args: argparse.Namespace) -> int:
    if not args.trace_file:
        raise ConfigError("--trace-file is required")
    try:
        trace = load_trace(args.trace_file)
    except OSError as exc:
        raise ProviderError(f"cannot read trace {args.trace_file}: {exc}") from exc
    k = args.k if args.k is not None else trace.header.k
    if not k > 0:
        raise ConfigError(f"k: must be > 0, got {k!r}")
    if args.top_j < 1:
        raise ConfigError(f"--top-j must be >= 1, got {args.top_j}")
    start, stop = parse_step_range(args.steps, len(trace.steps))
    _emit(
        args,
        render_trace_human(trace, start, stop, args.top_j, k),
        render_trace_machine(trace, start, stop, args.top_j, k),
    )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.strategies) < 2:
        raise ConfigError("compare needs at least 2 strategies")
    base, _ = _load_base_config(args)
    configs = _configs_for_items(base, args.strategies)
    runtime = _runtime_for(args, configs)
    try:
        runs = [
            run_one(runtime, config, label=item)
            for item, config in zip(args.strategies, configs)
        ]
    finally:
        runtime.close()

    reference = runs[0]
    divergences = []
    for run in runs[1:]:
        step = None
        limit = min(len(reference.token_ids), len(run.token_ids))
        for t in range(limit):
            if reference.token_ids[t] != run.token_ids[t]:
                step = t
                break
        if step is None and len(reference.token_ids) != len(run.token_ids):
            step = limit
        divergences.append({"label": run.label, "step": step})

    def alpha_series(run: RunReport) -> Optional[list[float]]:
        series = [r.alpha_t for r in run.records]
        return series if any(a is not None for a in series) else None

    payload = {
        "command": "compare",
        "provider": runtime.provider_name,
        "reference": reference.label,
        "runs": [
            dict(run.to_machine(include_timing=False), alpha_series=alpha_series(run))
            for run in runs
        ],
        "first_divergence": divergences,
    }
    lines = [f"compare on provider {runtime.provider_name} (reference: {reference.label})"]
    for run in runs:
        lines.append(f"  {run.label:<24} tokens: {' '.join(str(t) for t in run.token_ids)}")
        lines.append(f"  {'':<24} text:   {run.text}")
        series = alpha_series(run)
        if series is not None:
            rendered = " ".join("-" if a is None else f"{a:.4f}" for a in series)
            lines.append(f"  {'':<24} alpha_t: {rendered}")
    for entry in divergences:
        where = "never" if entry["step"] is None else f"step {entry['step']}"
        lines.append(f"first divergence vs {reference.label}: {entry['label']} -> {where}")
    _emit(args, "\n".join(lines) + "\n", payload)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.repetitions < 1:
        raise ConfigError(f"--repetitions must be >= 1, got {args.repetitions}")
    if args.warmup < 0:
        raise ConfigError(f"--warmup must be >= 0, got {args.warmup}")
    base, _ = _load_base_config(args)
    items = args.strategies if args.strategies else [base.strategy]
    configs = _configs_for_items(base, items)
    runtime = _runtime_for(args, configs)
    try:
        entries = []
        for item, config in zip(items, configs):
            for _ in range(args.warmup):
                run_one(runtime, config, label=item)
            runs = [run_one(runtime, config, label=item) for _ in range(args.repetitions)]
            tps = [r.tokens_per_second for r in runs]
            mpt = [r.ms_per_token for r in runs]
            last = runs[-1]
            entries.append(
                {
                    "label": item,
                    "strategy": config.strategy,
                    "emitted": last.emitted,
                    "tokens": list(last.token_ids),
                    "provider_calls": {"v": last.calls_v, "d": last.calls_d},
                    "calls_per_token": {
                        "v": last.calls_v / max(last.emitted, 1),
                        "d": last.calls_d / max(last.emitted, 1),
                    },
                    "timing": {
                        "repetitions": args.repetitions,
                        "warmup": args.warmup,
                        "median_tokens_per_second": float(np.median(tps)),
                        "p95_tokens_per_second": float(np.percentile(tps, 95)),
                        "median_ms_per_token": float(np.median(mpt)),
                        "p95_ms_per_token": float(np.percentile(mpt, 95)),
                        "setup_ms": None
                        if runtime.setup_seconds is None
                        else runtime.setup_seconds * 1000.0,
                    },
                }
            )
    finally:
        runtime.close()
    payload = {"command": "bench", "provider": runtime.provider_name, "items": entries}
    lines = [
        f"bench on provider {runtime.provider_name} "
        f"({args.repetitions} repetitions, {args.warmup} warmup)",
        f"{'label':<24} {'tok/s med':>10} {'tok/s p95':>10} {'ms/tok med':>11} {'ms/tok p95':>11} {'calls v':>8} {'calls d':>8}",
    ]
    for e in entries:
        t = e["timing"]
        lines.append(
            f"{e['label']:<24} {t['median_tokens_per_second']:>10.1f} "
            f"{t['p95_tokens_per_second']:>10.1f} {t['median_ms_per_token']:>11.4f} "
            f"{t['p95_ms_per_token']:>11.4f} {e['provider_calls']['v']:>8} "
            f"{e['provider_calls']['d']:>8}"
        )
        if t["setup_ms"] is not None:
            lines.append(f"{'':<24} description setup: {t['setup_ms']:.2f} ms (reported separately)")
    _emit(args, "\n".join(lines) + "\n", payload)
    return 0


def cmd_describe(args: argparse.Namespace) -> int:
    if not args.endpoint:
        raise ConfigError("--endpoint is required")
    if not args.image:
        raise ConfigError("--image is required")
    prompt = args.prompt if args.prompt is not None else DESCRIPTION_PROMPT
    session = RemoteSession.connect(args.endpoint, timeout=args.timeout)
    try:
        description = session.describe(args.image, prompt)
        model = session.server_info.get("model", "")
    finally:
        session.close()
    payload = {
        "command": "describe",
        "model": model,
        "image": args.image,
        "prompt": prompt,
        "description": description,
    }
    _emit(args, description + "\n", payload)
    return 0


# --- argument parsing ---------------------------------------------------

def _add_output_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--output", choices=("text", "machine"), default="text",
        help="human-readable text or canonical machine-readable JSON",
    )


def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", choices=("ngram", "trace", "remote"), default=None,
                        help="logit source (default: ngram)")
    parser.add_argument("--corpus", default=None, help="training text for the n-gram provider")
    parser.add_argument("--order", type=int, default=None, help="n-gram order (default 2)")
    parser.add_argument("--scene", default=None,
                        help="scene text for the toy visual context (default: first corpus line)")
    parser.add_argument("--summary-tokens", type=int, default=None,
                        help="length cap for the toy scene summary (default 8)")
    parser.add_argument("--trace-file", default=None, help="recorded trace to replay")
    parser.add_argument("--endpoint", default=None,
                        help="remote logit server, tcp://host:port or stdio:CMD")
    parser.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                        help="remote response deadline in seconds")
    parser.add_argument("--image", default=None,
                        help="image path/url for the remote server to describe")
    parser.add_argument("--describe-prompt", default=None,
                        help="override the canonical description prompt")
    parser.add_argument("--prompt", default=None, help="query text appended to both contexts")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON config file mirroring config field names")
    parser.add_argument("--strategy", default=None,
                        choices=("greedy", "nucleus", "beam", "cd_fixed", "code"))
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--k", type=float, default=None)
    parser.add_argument("--top-p", dest="top_p", type=float, default=None)
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--num-beams", dest="num_beams", type=int, default=None)
    parser.add_argument("--max-tokens", dest="max_tokens", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--selector", choices=("argmax", "sample"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedec",
        description="Contrastive decoding engine with divergence-driven dynamic contrast",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_decode = sub.add_parser("decode", help="run one decoding strategy")
    _add_provider_flags(p_decode)
    _add_config_flags(p_decode)
    _add_output_flag(p_decode)
    p_decode.add_argument("--record-trace", default=None,
                          help="write the run's logit streams to a trace file")
    p_decode.add_argument("--report-file", default=None,
                          help="also write the machine-readable report here")
    p_decode.set_defaults(func=cmd_decode)

    p_trace = sub.add_parser("trace", help="render token-level tables from a trace file")
    p_trace.add_argument("--trace-file", required=True)
    p_trace.add_argument("--steps", default=None, help="step index or A:B range (default: all)")
    p_trace.add_argument("--top-j", dest="top_j", type=int, default=5,
                         help="tokens shown per row (default 5)")
    p_trace.add_argument("--k", type=float, default=None,
                         help="recompute the contrast at this k (default: recorded k)")
    _add_output_flag(p_trace)
    p_trace.set_defaults(func=cmd_trace)

    p_bench = sub.add_parser("bench", help="throughput/latency benchmark")
    _add_provider_flags(p_bench)
    _add_config_flags(p_bench)
    _add_output_flag(p_bench)
    p_bench.add_argument("--strategies", nargs="+", default=None,
                         help="strategy items, e.g. greedy code code@k=10")
    p_bench.add_argument("--repetitions", type=int, default=5)
    p_bench.add_argument("--warmup", type=int, default=1)
    p_bench.set_defaults(func=cmd_bench)

    p_compare = sub.add_parser("compare", help="run strategies side by side")
    _add_provider_flags(p_compare)
    _add_config_flags(p_compare)
    _add_output_flag(p_compare)
    p_compare.add_argument("--strategies", nargs="+", required=True,
                           help="two or more strategy items, e.g. greedy code@k=0.3")
    p_compare.set_defaults(func=cmd_compare)

    p_describe = sub.add_parser("describe", help="ask a remote server to describe an image")
    p_describe.add_argument("--endpoint", required=True)
    p_describe.add_argument("--image", required=True)
    p_describe.add_argument("--prompt", default=None,
                            help="description prompt (default: the canonical one)")
    p_describe.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    _add_output_flag(p_describe)
    p_describe.set_defaults(func=cmd_describe)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse printed usage/help already
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TraceFormatError, ProtocolError) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return 4
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
