"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass


class BridgeError(ValueError):
    """The service cannot start with this configuration."""


@dataclass(frozen=True)
class BridgeConfig:
    """Startup settings for one bridge process.

    ``token_env`` names the environment variable holding the shared
    bearer token; when that variable is set, every request must carry
    it. Secrets are never written to config files.
    """

    host: str = "127.0.0.1"
    port: int = 8730
    embed_model: str = "hash-64"
    chat_model: str = "rule-chat"
    max_batch: int = 32
    max_text_tokens: int = 2048
    device: str = "cpu"
    token_env: str = "TABLEBRIDGE_TOKEN"

    def __post_init__(self) -> None:
        if not self.host:
            raise BridgeError("host must be non-empty")
        if not 0 <= self.port <= 65535:
            raise BridgeError("port must be in [0, 65535]")
        if self.max_batch < 1:
            raise BridgeError("max_batch must be >= 1")
        if self.max_text_tokens < 1:
            raise BridgeError("max_text_tokens must be >= 1")
        if not self.token_env:
            raise BridgeError("token_env must be non-empty")
