"""Helpers for running a live bridge inside a test process."""

from __future__ import annotations

import contextlib
import threading
import time

import uvicorn

from .app import create_app
from .config import BridgeConfig


@contextlib.contextmanager
def serve_in_thread(config: BridgeConfig | None = None, timeout_s: float = 10.0):
    """Run the bridge on an ephemeral port; yields its base URL.

    The server runs in a daemon thread and is shut down on exit.
    """
    cfg = config or BridgeConfig(port=0)
    app = create_app(cfg)
    server = uvicorn.Server(
        uvicorn.Config(app, host=cfg.host, port=cfg.port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + timeout_s
        while not server.started:
            if not thread.is_alive() or time.time() > deadline:
                raise RuntimeError("bridge server failed to start")
            time.sleep(0.01)
        port = server.servers[0].sockets[0].getsockname()[1]
        yield f"http://{cfg.host}:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=timeout_s)
