"""Transport loops: serve the protocol over a stdio pipe or a TCP socket.

One session per connection; requests on a connection are handled
strictly in order.  The TCP listener accepts connections sequentially
(no concurrent sessions — the model handle is single-threaded by
contract) and announces its bound port on stdout so callers can bind
port 0.
"""

from __future__ import annotations

import socket
import sys
from typing import Callable, Iterator

from lmmbridge.protocol import ProtocolHandler, encode_response
from lmmbridge.session import BridgeSession

SessionFactory = Callable[[], BridgeSession]


def serve_connection(
    handler: ProtocolHandler,
    read_line: Callable[[], bytes],
    write_line: Callable[[bytes], None],
) -> None:
    """Answer requests until the peer closes the stream."""
    while True:
        line = read_line()
        if not line:
            return
        response = handler.handle_line(line)
        if response is None:
            continue
        write_line(encode_response(response))


def serve_stdio(make_session: SessionFactory) -> None:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def write_line(payload: bytes) -> None:
        stdout.write(payload + b"\n")
        stdout.flush()

    serve_connection(ProtocolHandler(make_session()), stdin.readline, write_line)


def serve_tcp(make_session: SessionFactory, port: int, connections: int = 0) -> None:
    """Listen on 127.0.0.1; ``connections`` > 0 stops after that many
    (used by tests), 0 serves until interrupted."""
    listener = socket.create_server(("127.0.0.1", port))
    print(listener.getsockname()[1], flush=True)
    served = 0
    try:
        while connections == 0 or served < connections:
            conn, _ = listener.accept()
            reader = conn.makefile("rb")
            try:
                serve_connection(
                    ProtocolHandler(make_session()),
                    reader.readline,
                    lambda payload: conn.sendall(payload + b"\n"),
                )
            except (BrokenPipeError, ConnectionResetError):
                pass  # peer vanished mid-response; next connection
            finally:
                reader.close()
                conn.close()
            served += 1
    finally:
        listener.close()
