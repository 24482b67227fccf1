"""Multimodal logit server speaking the newline-delimited JSON decode protocol."""

from lmmbridge.model import ModelError, ToyMultimodalModel, load_model
from lmmbridge.protocol import PROTOCOL_VERSION, ProtocolHandler
from lmmbridge.session import DESCRIPTION_PROMPT, BridgeSession, SessionError

__all__ = [
    "BridgeSession",
    "DESCRIPTION_PROMPT",
    "ModelError",
    "PROTOCOL_VERSION",
    "ProtocolHandler",
    "SessionError",
    "ToyMultimodalModel",
    "load_model",
]
