"""Shared protocol conformance vectors.

A vector is one request/response pair.  The file is replayed in order
against a fresh session: it encodes the call sequence a well-behaved
client performs, including the one error a correct client can still
trigger (description-side logits before any description exists).
Request ids are connection-local counters and are therefore excluded
from the stored payloads; conformance checks match on method, params,
and the response body.
"""

from __future__ import annotations

import json

from lmmbridge.model import load_model
from lmmbridge.protocol import PROTOCOL_VERSION, ProtocolHandler
from lmmbridge.session import DESCRIPTION_PROMPT, BridgeSession

VECTORS_FORMAT_VERSION = 1

#: content-addressed toy image reference; a plain string so the vectors
#: carry no file dependency
SAMPLE_IMAGE = "vector-sample-image"
SAMPLE_QUERY = "what color is the cup"

_REQUESTS: list[tuple[str, str, dict]] = [
    ("handshake", "handshake", {"format_version": PROTOCOL_VERSION}),
    ("logits before describe is an error", "logits", {"side": "d", "context": []}),
    ("tokenize the query", "tokenize", {"text": SAMPLE_QUERY}),
    ("describe with the canonical prompt", "describe",
     {"image": SAMPLE_IMAGE, "prompt": DESCRIPTION_PROMPT}),
    ("visual logits on the empty context", "logits", {"side": "v", "context": []}),
    ("visual logits on the tokenized query", "logits",
     {"side": "v", "context": None}),  # placeholder, filled from tokenize below
    ("description logits on the empty context", "logits", {"side": "d", "context": []}),
]


def build_vectors() -> dict:
    """Run the canonical call sequence against a fresh toy session."""
    handler = ProtocolHandler(BridgeSession(load_model("toy")))
    vectors = []
    query_ids: list[int] = []
    for i, (name, method, params) in enumerate(_REQUESTS):
        params = dict(params)
        if method == "logits" and params.get("context") is None:
            params["context"] = query_ids
        response = handler.handle({"id": i + 1, "method": method, "params": params})
        if method == "tokenize" and "result" in response:
            query_ids = response["result"]["ids"]
        body = {key: value for key, value in response.items() if key != "id"}
        vectors.append({"name": name, "request": {"method": method, "params": params}, "response": body})
    return {
        "format_version": VECTORS_FORMAT_VERSION,
        "note": (
            "Replay in order against a fresh session. Request ids are "
            "connection-local counters and excluded from matching."
        ),
        "model": "toy",
        "vectors": vectors,
    }


def render_vectors(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
