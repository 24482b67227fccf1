"""Logit providers: toy n-gram model, trace replay, and remote protocol client."""

from codedec.providers.base import ContextOverflowError, LogitProvider, ProviderError
from codedec.providers.ngram import (
    EOS_TOKEN,
    NGramModel,
    build_vocabulary,
    encode_known_words,
    encode_line,
    ngram_train,
    tokenize_words,
    train_from_text,
)
from codedec.providers.remote import (
    DEFAULT_TIMEOUT,
    PROTOCOL_VERSION,
    ProtocolError,
    ProtocolVersionError,
    RemoteCallError,
    RemoteProvider,
    RemoteSession,
    RemoteTimeoutError,
    TransportError,
    VocabMismatchError,
    open_endpoint,
    remote_next_logits,
)
from codedec.providers.trace import (
    TRACE_FORMAT_VERSION,
    TraceFile,
    TraceFormatError,
    TraceHeader,
    TraceReplayProvider,
    TraceStep,
    deserialize_trace,
    load_trace,
    save_trace,
    serialize_trace,
    trace_from_records,
    trace_next_logits,
)

__all__ = [
    "ContextOverflowError",
    "LogitProvider",
    "ProviderError",
    "EOS_TOKEN",
    "NGramModel",
    "build_vocabulary",
    "encode_known_words",
    "encode_line",
    "ngram_train",
    "tokenize_words",
    "train_from_text",
    "DEFAULT_TIMEOUT",
    "PROTOCOL_VERSION",
    "ProtocolError",
    "ProtocolVersionError",
    "RemoteCallError",
    "RemoteProvider",
    "RemoteSession",
    "RemoteTimeoutError",
    "TransportError",
    "VocabMismatchError",
    "open_endpoint",
    "remote_next_logits",
    "TRACE_FORMAT_VERSION",
    "TraceFile",
    "TraceFormatError",
    "TraceHeader",
    "TraceReplayProvider",
    "TraceStep",
    "deserialize_trace",
    "load_trace",
    "save_trace",
    "serialize_trace",
    "trace_from_records",
    "trace_next_logits",
]
