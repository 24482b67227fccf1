"""Command-line interface: serve, record, vectors.

Exit codes: 0 success, 2 configuration error (unknown model or device,
unreadable prompt file, bad arguments).
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from lmmbridge.model import ModelError, load_model
from lmmbridge.session import DEFAULT_DESCRIPTION_TOKENS, BridgeSession
from lmmbridge.server import serve_stdio, serve_tcp
from lmmbridge.tracefile import render_trace, write_trace
from lmmbridge.vectors import build_vectors, render_vectors


class CliError(Exception):
    pass


def _read_prompt_file(path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read().strip()
    except OSError as exc:
        raise CliError(f"cannot read prompt file {path}: {exc}") from exc
    if not text:
        raise CliError(f"prompt file {path} is empty")
    return text


def _session_factory(args: argparse.Namespace):
    try:
        model = load_model(args.model, args.device)
    except ModelError as exc:
        raise CliError(str(exc)) from exc
    prompt = _read_prompt_file(args.prompt_file)

    def make_session() -> BridgeSession:
        kwargs = {"max_description_tokens": args.max_description_tokens}
        if prompt is not None:
            kwargs["description_prompt"] = prompt
        return BridgeSession(model, **kwargs)

    return make_session


def cmd_serve(args: argparse.Namespace) -> int:
    make_session = _session_factory(args)
    if args.transport == "stdio":
        serve_stdio(make_session)
    else:
        serve_tcp(make_session, args.port, connections=args.connections)
    return 0


def cmd_record(args: argparse.Namespace) -> int:
    if args.steps < 1:
        raise CliError(f"--steps must be >= 1, got {args.steps}")
    make_session = _session_factory(args)
    session = make_session()
    steps, query_ids = session.record_steps(args.image, args.query, args.steps)
    note = args.note if args.note is not None else (
        f"recorded by lmm-bridge model={session.model.name} image={args.image}"
    )
    text = render_trace(
        vocab=session.model.vocab,
        eos_id=session.model.eos_id,
        model=session.model.name,
        prompt=args.query,
        steps=steps,
        note=note,
    )
    if args.out:
        write_trace(args.out, text)
        print(f"wrote {len(steps)} steps to {args.out}")
        print(f"description: {session.model.text(session.description)}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_vectors(args: argparse.Namespace) -> int:
    text = render_vectors(build_vectors())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        print(f"wrote protocol vectors to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", default="toy", help="model id from the registry")
    parser.add_argument("--device", default="cpu", help="compute device for the model")
    parser.add_argument("--prompt-file", default=None,
                        help="file holding a description-prompt override")
    parser.add_argument("--max-description-tokens", type=int,
                        default=DEFAULT_DESCRIPTION_TOKENS,
                        help="length cap for self-description generation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmm-bridge",
        description="Multimodal logit server for the decode protocol",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="answer protocol requests until closed")
    _add_model_flags(p_serve)
    p_serve.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    p_serve.add_argument("--port", type=int, default=0,
                         help="TCP port; 0 binds an ephemeral port (printed on stdout)")
    p_serve.add_argument("--connections", type=int, default=0,
                         help="stop after N TCP connections (0 = serve forever)")
    p_serve.set_defaults(func=cmd_serve)

    p_record = sub.add_parser("record", help="greedy-decode and dump both logit streams")
    _add_model_flags(p_record)
    p_record.add_argument("--image", required=True, help="image path or reference")
    p_record.add_argument("--query", default="", help="query text tokenized into the context")
    p_record.add_argument("--steps", type=int, default=8, help="steps to record")
    p_record.add_argument("--out", default=None, help="trace file path (default: stdout)")
    p_record.add_argument("--note", default=None, help="free-text note for the trace header")
    p_record.set_defaults(func=cmd_record)

    p_vectors = sub.add_parser("vectors", help="emit the protocol conformance vectors")
    p_vectors.add_argument("--out", default=None, help="output path (default: stdout)")
    p_vectors.set_defaults(func=cmd_vectors)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
