"""Client for the newline-delimited JSON logit protocol.

Endpoints:
  * ``tcp://HOST:PORT``  — connect a TCP socket.
  * ``stdio:CMD ARGS…``  — spawn CMD and speak over its stdin/stdout.

One request is in flight at a time per connection; ids are a client-side
incrementing counter and responses must echo them.  Every read honors a
timeout.  Failures split into two families: transport/availability problems
(TransportError, RemoteTimeoutError, RemoteCallError) and structural
protocol violations (ProtocolError, ProtocolVersionError,
VocabMismatchError) — callers map them to different exit codes.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import socket
import subprocess
import time
from typing import Optional

import numpy as np

from codedec.core import Context, LogitVector, Vocabulary
from codedec.providers.base import ProviderError

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 10.0

#: error.code value a server uses to reject our protocol version
VERSION_MISMATCH_CODE = "protocol_version_mismatch"


class TransportError(ProviderError):
    """Could not reach, write to, or read from the remote endpoint."""


class RemoteTimeoutError(TransportError):
    """The remote endpoint did not answer within the deadline."""


class RemoteCallError(ProviderError):
    """The server answered with an error object ({code, message})."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"remote error [{code}]: {message}")
        self.code = code
        self.message = message


class ProtocolError(Exception):
    """The remote endpoint violated the wire protocol's structure."""


class ProtocolVersionError(ProtocolError):
    """Client and server disagree on the protocol format version."""


class VocabMismatchError(ProtocolError):
    """The server's vocabulary size differs from what the caller expects."""


class _LineStream:
    """Newline-framed byte transport with per-read timeouts over a raw fd."""

    def __init__(self, read_fd: int, write, close) -> None:
        self._read_fd = read_fd
        self._write = write
        self._close = close
        self._buffer = bytearray()

    def send_line(self, payload: bytes) -> None:
        try:
            self._write(payload + b"\n")
        except (OSError, ValueError) as exc:
            raise TransportError(f"write failed: {exc}") from exc

    def read_line(self, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = bytes(self._buffer[:newline])
                del self._buffer[: newline + 1]
                return line
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise RemoteTimeoutError(f"no response within {timeout:g}s")
            ready, _, _ = select.select([self._read_fd], [], [], remaining)
            if not ready:
                raise RemoteTimeoutError(f"no response within {timeout:g}s")
            try:
                chunk = os.read(self._read_fd, 65536)
            except OSError as exc:
                raise TransportError(f"read failed: {exc}") from exc
            if not chunk:
                raise TransportError("connection closed by remote end")
            self._buffer.extend(chunk)

    def close(self) -> None:
        self._close()


def _open_tcp(endpoint: str, timeout: float) -> _LineStream:
    rest = endpoint[len("tcp://") :]
    host, sep, port_text = rest.rpartition(":")
    if not sep or not host or not port_text.isdigit():
        raise ValueError(f"bad tcp endpoint {endpoint!r}; expected tcp://host:port")
    try:
        sock = socket.create_connection((host, int(port_text)), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {endpoint}: {exc}") from exc
    sock.setblocking(True)
    return _LineStream(read_fd=sock.fileno(), write=sock.sendall, close=sock.close)


def _open_stdio(endpoint: str, timeout: float) -> _LineStream:
    command = shlex.split(endpoint[len("stdio:") :])
    if not command:
        raise ValueError(f"bad stdio endpoint {endpoint!r}; expected stdio:CMD ARGS…")
    try:
        proc = subprocess.Popen(command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
    except OSError as exc:
        raise TransportError(f"cannot spawn {command[0]!r}: {exc}") from exc

    def write(data: bytes) -> None:
        proc.stdin.write(data)
        proc.stdin.flush()

    def close() -> None:
        if proc.stdin:
            try:
                proc.stdin.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    return _LineStream(read_fd=proc.stdout.fileno(), write=write, close=close)


def open_endpoint(endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> _LineStream:
    if endpoint.startswith("tcp://"):
        return _open_tcp(endpoint, timeout)
    if endpoint.startswith("stdio:"):
        return _open_stdio(endpoint, timeout)
    raise ValueError(f"unsupported endpoint {endpoint!r}; use tcp://host:port or stdio:CMD")


class RemoteSession:
    """Sequential request/response session over one connection."""

    def __init__(self, stream: _LineStream, timeout: float = DEFAULT_TIMEOUT) -> None:
        self._stream = stream
        self._timeout = timeout
        self._next_id = 1
        self.server_info: Optional[dict] = None

    @classmethod
    def connect(
        cls, endpoint: str, timeout: float = DEFAULT_TIMEOUT, expected_n: Optional[int] = None
    ) -> "RemoteSession":
        session = cls(open_endpoint(endpoint, timeout), timeout=timeout)
        session.handshake(expected_n=expected_n)
        return session

    def request(self, method: str, params: dict) -> dict:
        request_id = self._next_id
        self._next_id += 1
        payload = json.dumps(
            {"id": request_id, "method": method, "params": params},
            allow_nan=False,
            separators=(",", ":"),
        ).encode("utf-8")
        self._stream.send_line(payload)
        line = self._stream.read_line(self._timeout)
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response is not valid JSON: {exc}") from exc
        if not isinstance(response, dict):
            raise ProtocolError(f"response must be an object, got {type(response).__name__}")
        if response.get("id") != request_id:
            raise ProtocolError(
                f"response id {response.get('id')!r} does not match request id {request_id}"
            )
        if "error" in response:
            error = response["error"]
            if not isinstance(error, dict) or "code" not in error or "message" not in error:
                raise ProtocolError(f"malformed error object: {error!r}")
            if error["code"] == VERSION_MISMATCH_CODE:
                raise ProtocolVersionError(error["message"])
            raise RemoteCallError(str(error["code"]), str(error["message"]))
        if "result" not in response or not isinstance(response["result"], dict):
            raise ProtocolError("response carries neither a result object nor an error")
        return response["result"]

    def handshake(self, expected_n: Optional[int] = None) -> dict:
        info = self.request("handshake", {"format_version": PROTOCOL_VERSION})
        n = info.get("n")
        eos_id = info.get("eos_id")
        if not isinstance(n, int) or n < 1:
            raise ProtocolError(f"handshake reported invalid vocabulary size {n!r}")
        if eos_id is not None and (not isinstance(eos_id, int) or not 0 <= eos_id < n):
            raise ProtocolError(f"handshake reported invalid eos_id {eos_id!r}")
        if not isinstance(info.get("model"), str):
            raise ProtocolError("handshake must report a model name")
        if expected_n is not None and n != expected_n:
            raise VocabMismatchError(
                f"server vocabulary has {n} entries, caller expects {expected_n}"
            )
        self.server_info = info
        return info

    def _require_handshake(self) -> dict:
        if self.server_info is None:
            raise ProtocolError("handshake has not completed")
        return self.server_info

    def logits(self, side: str, context_ids: list[int]) -> LogitVector:
        info = self._require_handshake()
        if side not in ("v", "d"):
            raise ValueError(f"side must be 'v' or 'd', got {side!r}")
        result = self.request("logits", {"side": side, "context": list(context_ids)})
        values = result.get("logits")
        if not isinstance(values, list):
            raise ProtocolError("logits response must carry an array")
        if len(values) != info["n"]:
            raise ProtocolError(
                f"server sent {len(values)} logits for a vocabulary of {info['n']}"
            )
        scores = np.empty(len(values), dtype=np.float64)
        for i, v in enumerate(values):
            if v == "-inf":
                scores[i] = -np.inf
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                scores[i] = float(v)
            else:
                raise ProtocolError(f"logit {i} is not a number: {v!r}")
        return LogitVector(scores)

    def tokenize(self, text: str) -> list[int]:
        self._require_handshake()
        result = self.request("tokenize", {"text": text})
        ids = result.get("ids")
        if not isinstance(ids, list) or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in ids
        ):
            raise ProtocolError("tokenize response must carry an array of ids")
        return ids

    def describe(self, image: str, prompt: str) -> str:
        self._require_handshake()
        result = self.request("describe", {"image": image, "prompt": prompt})
        description = result.get("description")
        if not isinstance(description, str):
            raise ProtocolError("describe response must carry a description string")
        return description

    def close(self) -> None:
        self._stream.close()

    def __enter__(self) -> "RemoteSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def remote_next_logits(session: RemoteSession, context: Context, side: str) -> LogitVector:
    """Fetch next-token logits for one side over an established session."""
    return session.logits(side, list(context.token_ids))


class RemoteProvider:
    """LogitProvider face of a RemoteSession, pinned to one side.

    Records per-call latencies (milliseconds) for throughput reporting.
    """

    def __init__(self, session: RemoteSession, side: str) -> None:
        info = session._require_handshake()
        self.session = session
        self.side = side
        self.vocabulary = Vocabulary.anonymous(info["n"], eos_id=info.get("eos_id"))
        self.max_context: Optional[int] = info.get("max_context")
        self.latencies_ms: list[float] = []

    def next_logits(self, context: Context) -> LogitVector:
        start = time.perf_counter()
        logits = remote_next_logits(self.session, context, self.side)
        self.latencies_ms.append((time.perf_counter() - start) * 1000.0)
        return logits
