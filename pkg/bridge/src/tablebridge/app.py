"""HTTP surface: /embed, /v1/chat/completions, /healthz."""

from __future__ import annotations

import os
from typing import Annotated

import numpy as np
from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel, Field

from .backends import (
    BackendError,
    resolve_chat_backend,
    resolve_embed_backend,
)
from .config import BridgeConfig, BridgeError


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)
    model: str | None = None


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatCompletionRequest(BaseModel):
    messages: list[ChatMessage] = Field(min_length=1)
    model: str | None = None
    temperature: float = Field(0.7, ge=0.0)
    max_tokens: int = Field(1024, ge=1)


def create_app(config: BridgeConfig | None = None) -> FastAPI:
    """Build the service; unknown configured models refuse to start."""
    cfg = config or BridgeConfig()
    try:
        resolve_embed_backend(cfg.embed_model)
        resolve_chat_backend(cfg.chat_model)
    except BackendError as e:
        raise BridgeError(str(e)) from e

    token = os.environ.get(cfg.token_env)
    app = FastAPI(title="tablebridge", version="0.1.0")
    app.state.config = cfg
    app.state.embed_backends = {}
    app.state.chat_backends = {}

    def check_auth(
        authorization: Annotated[str | None, Header()] = None,
    ) -> None:
        if token is None:
            return
        if authorization != f"Bearer {token}":
            raise HTTPException(401, detail="missing or invalid bearer token")

    def embed_backend_for(name: str):
        backend = app.state.embed_backends.get(name)
        if backend is None:
            try:
                backend = resolve_embed_backend(name)
            except BackendError as e:
                raise HTTPException(400, detail=str(e)) from e
            app.state.embed_backends[name] = backend
        return backend

    def chat_backend_for(name: str):
        backend = app.state.chat_backends.get(name)
        if backend is None:
            try:
                backend = resolve_chat_backend(name)
            except BackendError as e:
                raise HTTPException(400, detail=str(e)) from e
            app.state.chat_backends[name] = backend
        return backend

    @app.get("/healthz")
    def healthz() -> dict:
        return {
            "status": "ok",
            "embed_model": cfg.embed_model,
            "chat_model": cfg.chat_model,
            "device": cfg.device,
        }

    @app.post("/embed", dependencies=[Depends(check_auth)])
    def embed(request: EmbedRequest) -> dict:
        backend = embed_backend_for(request.model or cfg.embed_model)
        for i, text in enumerate(request.texts):
            if len(text.split()) > cfg.max_text_tokens:
                raise HTTPException(
                    413,
                    detail={
                        "error": "text exceeds the token limit",
                        "index": i,
                        "limit": cfg.max_text_tokens,
                    },
                )
        chunks = []
        try:
            for start in range(0, len(request.texts), cfg.max_batch):
                chunks.append(
                    backend.embed_batch(
                        request.texts[start : start + cfg.max_batch]
                    )
                )
        except BackendError as e:
            raise HTTPException(500, detail=str(e)) from e
        vectors = np.vstack(chunks)
        return {"model": backend.name, "vectors": vectors.tolist()}

    @app.post("/v1/chat/completions", dependencies=[Depends(check_auth)])
    def chat_completions(request: ChatCompletionRequest) -> dict:
        if not any(m.role == "user" for m in request.messages):
            raise HTTPException(400, detail="at least one user message is required")
        backend = chat_backend_for(request.model or cfg.chat_model)
        try:
            content = backend.complete(
                [m.model_dump() for m in request.messages],
                request.temperature,
                request.max_tokens,
            )
        except BackendError as e:
            raise HTTPException(500, detail=str(e)) from e
        return {
            "model": backend.name,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "finish_reason": "stop",
                }
            ],
        }

    return app
