"""Network bridge exposing embedding and chat models over HTTP.

The endpoints speak the exact wire shapes tableforge's remote providers
consume, so pointing those providers at a running bridge is the only
integration step. The built-in backends are deterministic stand-ins
(hashed embeddings, rule-driven table edits); real models slot in by
registering new backends.
"""

from .backends import (
    BackendError,
    HashEmbedBackend,
    RuleChatBackend,
    resolve_chat_backend,
    resolve_embed_backend,
)
from .config import BridgeConfig, BridgeError
from .app import create_app

__all__ = [
    "BackendError",
    "BridgeConfig",
    "BridgeError",
    "HashEmbedBackend",
    "RuleChatBackend",
    "create_app",
    "resolve_chat_backend",
    "resolve_embed_backend",
]
