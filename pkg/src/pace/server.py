"""WebSocket front door for a live session.

One server hosts one session. Clients say hello as "sensor" (AU frames,
markers) or "player" (ticks; receives speed broadcasts). Messages are
handled strictly in arrival order under a single lock, so the session
state machine stays single-writer. The session log is appended to disk
incrementally and closed with a summary when the server stops.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path
from typing import Any

from websockets.asyncio.server import Server, ServerConnection, serve

from .session import (
    LiveSession,
    SessionConfig,
    SessionLog,
    config_record,
    event_record,
    summary_record,
)

logger = logging.getLogger(__name__)


def _is_player_hello(raw: str | bytes) -> bool:
    try:
        msg = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError):
        return False
    return isinstance(msg, dict) and msg.get("type") == "hello" and msg.get("role") == "player"


class SessionServer:
    """Serve one live session over WebSockets, logging as it goes."""

    def __init__(self, cfg: SessionConfig, log_dir: str | Path | None = None) -> None:
        self.cfg = cfg
        self.session = LiveSession(cfg)
        self._players: set[ServerConnection] = set()
        self._lock = asyncio.Lock()
        self._server: Server | None = None
        self._log_path = Path(log_dir) / f"{cfg.session_id}.jsonl" if log_dir else None
        self._log_fh: Any = None
        self._written = 0
        self._final_log: SessionLog | None = None

    @property
    def port(self) -> int:
        if self._server is None:
            raise RuntimeError("server is not running")
        return self._server.sockets[0].getsockname()[1]

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        """Bind and start serving; returns the bound port (0 picks a free one)."""
        if self._log_path is not None:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_fh = open(self._log_path, "w", encoding="utf-8", newline="\n")
            self._write_record(config_record(self.cfg))
        self._server = await serve(self._handle_connection, host, port)
        logger.info("session %s listening on %s:%d", self.cfg.session_id, host, self.port)
        return self.port

    async def stop(self) -> SessionLog:
        """Stop serving, close the log with its summary, return the final log."""
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        if self._final_log is None:
            self._final_log = self.session.finalize()
            self._flush_events()
            if self._log_fh is not None:
                self._write_record(
                    summary_record(self._final_log.final_state, self._final_log.viewing_time)
                )
                self._log_fh.close()
                self._log_fh = None
        return self._final_log

    async def serve_forever(self) -> None:
        if self._server is None:
            raise RuntimeError("server is not running")
        await self._server.wait_closed()

    def _write_record(self, record: dict[str, Any]) -> None:
        if self._log_fh is None:
            return
        self._log_fh.write(json.dumps(record, allow_nan=False))
        self._log_fh.write("\n")
        self._log_fh.flush()

    def _flush_events(self) -> None:
        events = self.session.events
        for event in events[self._written :]:
            self._write_record(event_record(event))
        self._written = len(events)

    async def _handle_connection(self, conn: ServerConnection) -> None:
        try:
            async for raw in conn:
                async with self._lock:
                    result = self.session.handle_message(raw)
                    if _is_player_hello(raw):
                        self._players.add(conn)
                    self._flush_events()
                for message in result.replies:
                    await conn.send(json.dumps(message, allow_nan=False))
                for message in result.broadcasts:
                    await self._broadcast(message)
        finally:
            self._players.discard(conn)

    async def _broadcast(self, message: dict[str, Any]) -> None:
        text = json.dumps(message, allow_nan=False)
        stale: list[ServerConnection] = []
        for player in list(self._players):
            try:
                await player.send(text)
            except Exception:
                stale.append(player)
        for player in stale:
            self._players.discard(player)


async def run_server(
    cfg: SessionConfig,
    host: str = "127.0.0.1",
    port: int = 8765,
    log_dir: str | Path | None = None,
) -> None:
    """Serve a session until cancelled; finalizes the log on the way out."""
    server = SessionServer(cfg, log_dir=log_dir)
    bound = await server.start(host=host, port=port)
    print(f"serving session {cfg.session_id!r} on ws://{host}:{bound}", flush=True)
    try:
        await server.serve_forever()
    except asyncio.CancelledError:
        pass
    finally:
        await server.stop()
