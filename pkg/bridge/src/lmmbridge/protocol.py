"""Server side of the newline-delimited JSON decode protocol.

Methods: handshake({format_version}) -> {n, eos_id, model};
logits({side, context}) -> {logits}; tokenize({text}) -> {ids};
describe({image, prompt}) -> {description}.  Errors are
{id, error: {code, message}}; responses echo the request id.  One
request is handled at a time; the handshake must come first.
"""

from __future__ import annotations

import json
import math
from typing import Any, Optional

from lmmbridge.session import BridgeSession, SessionError

PROTOCOL_VERSION = 1
VERSION_MISMATCH_CODE = "protocol_version_mismatch"


def _jsonable_logits(values) -> list:
    out: list = []
    for x in values:
        x = float(x)
        if x == -math.inf:
            out.append("-inf")
        elif not math.isfinite(x):
            raise ValueError(f"cannot serialize logit {x}")
        else:
            out.append(x)
    return out


class ProtocolHandler:
    """Dispatches parsed requests against one session; pure dict -> dict."""

    def __init__(self, session: BridgeSession) -> None:
        self.session = session
        self.ready = False

    def handle_line(self, line: bytes) -> Optional[dict]:
        text = line.strip()
        if not text:
            return None
        try:
            request = json.loads(text)
        except json.JSONDecodeError as exc:
            return _error(None, "parse_error", f"request is not valid JSON: {exc}")
        if not isinstance(request, dict):
            return _error(None, "invalid_request", "request must be a JSON object")
        return self.handle(request)

    def handle(self, request: dict) -> dict:
        rid = request.get("id")
        method = request.get("method")
        params = request.get("params", {})
        if not isinstance(params, dict):
            return _error(rid, "invalid_params", "params must be an object")
        if method == "handshake":
            return self._handshake(rid, params)
        if not self.ready:
            return _error(rid, "handshake_required", "handshake must come first")
        if method == "logits":
            return self._logits(rid, params)
        if method == "tokenize":
            return self._tokenize(rid, params)
        if method == "describe":
            return self._describe(rid, params)
        return _error(rid, "unknown_method", f"unknown method {method!r}")

    # --- methods -------------------------------------------------------
    def _handshake(self, rid: Any, params: dict) -> dict:
        version = params.get("format_version")
        if version != PROTOCOL_VERSION:
            return _error(
                rid,
                VERSION_MISMATCH_CODE,
                f"server speaks format_version {PROTOCOL_VERSION}, got {version!r}",
            )
        self.ready = True
        model = self.session.model
        return _result(
            rid, {"n": model.n, "eos_id": model.eos_id, "model": model.name}
        )

    def _logits(self, rid: Any, params: dict) -> dict:
        side = params.get("side")
        context = params.get("context")
        if side not in ("v", "d"):
            return _error(rid, "invalid_params", f"side must be 'v' or 'd', got {side!r}")
        if not isinstance(context, list) or not all(
            isinstance(t, int) and not isinstance(t, bool) for t in context
        ):
            return _error(rid, "invalid_params", "context must be an array of token ids")
        try:
            logits = self.session.logits(side, context)
        except SessionError as exc:
            return _error(rid, exc.code, exc.message)
        return _result(rid, {"logits": _jsonable_logits(logits)})

    def _tokenize(self, rid: Any, params: dict) -> dict:
        text = params.get("text")
        if not isinstance(text, str):
            return _error(rid, "invalid_params", "text must be a string")
        return _result(rid, {"ids": self.session.model.tokenize(text)})

    def _describe(self, rid: Any, params: dict) -> dict:
        image = params.get("image")
        prompt = params.get("prompt")
        if not isinstance(image, str) or not image:
            return _error(rid, "invalid_params", "image must be a nonempty string")
        if prompt is not None and not isinstance(prompt, str):
            return _error(rid, "invalid_params", "prompt must be a string")
        try:
            description = self.session.describe(image, prompt)
        except SessionError as exc:
            return _error(rid, exc.code, exc.message)
        return _result(rid, {"description": description})


def _result(rid: Any, result: dict) -> dict:
    return {"id": rid, "result": result}


def _error(rid: Any, code: str, message: str) -> dict:
    return {"id": rid, "error": {"code": code, "message": message}}


def encode_response(response: dict) -> bytes:
    return json.dumps(response, allow_nan=False, separators=(",", ":")).encode("utf-8")
