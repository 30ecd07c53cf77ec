"""Live network service: clients speak line-delimited frames to the kernel.

One asyncio event loop owns the kernel; connection handlers submit acts and
drain the kernel synchronously, so submissions serialize naturally. Every
act delivered to a user agent is encoded, stamped with that user's stream
seq, buffered for resume, and pushed to the live connection.

Transports: raw TCP (one frame per line) and, when a static dir is served,
the same frames over WebSocket at ``/ws`` plus static files for the browser
client. Login is the first frame: an ask of type ``auth.login`` with
``{"user", "password", "resume_from"}``; the gateway answers with an
``auth.hello`` diffuse carrying the bound agent id.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .interaction import AgentId, CommunicationAct, Performative, make_act
from .kernel import Kernel
from .microtools import bootstrap_kernel, connection_act
from .persistence import SessionLog, attach_archive
from .wire import MalformedFrame, decode_frame, encode

log = logging.getLogger("placid.gateway")

GATEWAY_ID = AgentId.agent("gateway")

_WS_MAGIC = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".map": "application/json",
}


class AuthFailed(Exception):
    pass


class AlreadyConnected(Exception):
    pass


@dataclass
class UserStream:
    """Per-user outbound frame stream with a resume buffer."""

    user: AgentId
    seq: int = 0
    buffer: list[tuple[int, bytes]] = field(default_factory=list)
    outbound: asyncio.Queue | None = None

    def push(self, act: CommunicationAct) -> None:
        self.seq += 1
        data = encode(act, seq=self.seq)
        self.buffer.append((self.seq, data))
        if self.outbound is not None:
            self.outbound.put_nowait(data)

    def replay_since(self, last_seq: int) -> list[bytes]:
        return [data for seq, data in self.buffer if seq > last_seq]


def _control_frame(user: AgentId, msg_type: str, body: dict[str, Any]) -> CommunicationAct:
    return make_act(Performative.DIFFUSE, GATEWAY_ID, [user], msg_type, body)


class Gateway:
    """Binds authenticated byte-stream clients to their user agents."""

    def __init__(
        self,
        descriptor: dict[str, Any],
        *,
        seed: int = 0,
        conv_timeout: int = 100,
        log_path: str | Path | None = None,
        tick_interval: float = 0.1,
    ) -> None:
        descriptor = dict(descriptor)
        settings = dict(descriptor.get("settings", {}))
        settings["connected_at_boot"] = False  # presence comes from attachment
        descriptor["settings"] = settings
        self.descriptor = descriptor
        self.kernel: Kernel = bootstrap_kernel(descriptor, seed, conv_timeout)
        self.credentials = {u["name"]: u["password"] for u in descriptor.get("users", [])}
        self.streams: dict[AgentId, UserStream] = {}
        self.tick_interval = tick_interval
        self.log: SessionLog | None = None
        if log_path is not None:
            self.log = SessionLog(log_path)
            self.log.write_bootstrap(self.kernel.tick, descriptor, seed, conv_timeout)
            attach_archive(self.kernel, self.log)
            self.kernel.extensions["archive_log"] = self.log
        self.kernel.taps.append(self._on_deliver)
        self._servers: list[asyncio.AbstractServer] = []
        self._heartbeat_task: asyncio.Task | None = None
        self._conn_tasks: set[asyncio.Task] = set()

    # -- kernel side ----------------------------------------------------

    def _on_deliver(self, tick: int, receiver: AgentId, act: CommunicationAct) -> None:
        stream = self.streams.get(receiver)
        if stream is not None:
            stream.push(act)

    def _drain(self) -> None:
        self.kernel.run_settle()

    def attach_client(self, user_name: str, password: str, resume_from: int = 0) -> tuple[UserStream, list[bytes]]:
        """Authenticate and bind a connection to the user's agent."""
        if self.credentials.get(user_name) != password:
            raise AuthFailed(user_name)
        user = AgentId.user(user_name)
        if user not in self.kernel.agents:
            raise AuthFailed(f"{user_name} not in deployment")
        stream = self.streams.get(user)
        if stream is not None and stream.outbound is not None:
            raise AlreadyConnected(user_name)
        if stream is None:
            stream = UserStream(user=user)
            self.streams[user] = stream
        backlog = stream.replay_since(resume_from)
        stream.outbound = asyncio.Queue()
        self.kernel.submit(connection_act(user, True))
        self._drain()
        return stream, backlog

    def detach_client(self, stream: UserStream) -> None:
        if stream.outbound is None:
            return
        stream.outbound = None
        self.kernel.submit(connection_act(stream.user, False))
        self._drain()

    def submit_client_act(self, user: AgentId, act: CommunicationAct) -> None:
        self.kernel.submit(act)
        self._drain()

    async def _heartbeat(self) -> None:
        # Advance logical time while idle so conversation timeouts expire.
        while True:
            await asyncio.sleep(self.tick_interval)
            self.kernel.run_until(self.kernel.tick + 1)

    # -- connection handling ---------------------------------------------

    async def _login(self, line: bytes) -> tuple[UserStream, list[bytes]]:
        try:
            frame = decode_frame(line)
        except MalformedFrame as exc:
            raise AuthFailed(f"malformed login frame: {exc.reason}") from exc
        act = frame.act
        if act.msg_type != "auth.login" or not isinstance(act.body, dict):
            raise AuthFailed("first frame must be auth.login")
        body = act.body
        user = body.get("user", "")
        stream, backlog = self.attach_client(
            user, body.get("password", ""), int(body.get("resume_from", 0))
        )
        return stream, backlog

    async def handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        task = asyncio.current_task()
        if task is not None:
            self._conn_tasks.add(task)
            task.add_done_callback(self._conn_tasks.discard)
        conn = _LineTransport(reader, writer)
        await self._serve_connection(conn)

    async def _serve_connection(self, conn: "_Transport") -> None:
        stream: UserStream | None = None
        try:
            line = await conn.read_frame()
            if line is None:
                return
            try:
                stream, backlog = await self._login(line)
            except (AuthFailed, AlreadyConnected) as exc:
                reason = "AlreadyConnected" if isinstance(exc, AlreadyConnected) else "AuthFailed"
                await conn.write_frame(
                    encode(_control_frame(AgentId.user("nobody"), "auth.failed", {"ok": False, "error": reason}))
                )
                return
            hello = _control_frame(
                stream.user,
                "auth.hello",
                {"ok": True, "agent": str(stream.user), "stream_seq": stream.seq},
            )
            await conn.write_frame(encode(hello))
            for data in backlog:
                await conn.write_frame(data)
            writer_task = asyncio.ensure_future(self._pump(stream, conn))
            try:
                await self._read_loop(stream, conn)
            finally:
                writer_task.cancel()
        finally:
            if stream is not None:
                self.detach_client(stream)
            await conn.close()

    async def _pump(self, stream: UserStream, conn: "_Transport") -> None:
        queue = stream.outbound
        while queue is not None and queue is stream.outbound:
            data = await queue.get()
            await conn.write_frame(data)

    async def _read_loop(self, stream: UserStream, conn: "_Transport") -> None:
        while True:
            line = await conn.read_frame()
            if line is None:
                return
            if not line.strip():
                continue
            try:
                frame = decode_frame(line)
                if frame.seq is not None:
                    raise MalformedFrame("client frames must not carry seq")
                if frame.act.sender != stream.user:
                    raise MalformedFrame(f"sender must be {stream.user}")
            except MalformedFrame as exc:
                log.warning("rejected frame from %s: %s", stream.user, exc.reason)
                await conn.write_frame(
                    encode(_control_frame(stream.user, "gateway.error", {"ok": False, "error": exc.reason}))
                )
                continue
            try:
                self.submit_client_act(stream.user, frame.act)
            except Exception as exc:  # noqa: BLE001 - surface submit errors to the client
                await conn.write_frame(
                    encode(
                        _control_frame(
                            stream.user,
                            "gateway.error",
                            {"ok": False, "error": type(exc).__name__, "detail": str(exc)},
                        )
                    )
                )

    # -- lifecycle ---------------------------------------------------------

    async def start(
        self,
        host: str = "127.0.0.1",
        port: int = 7340,
        static_dir: str | Path | None = None,
        http_port: int | None = None,
    ) -> list[tuple[str, int]]:
        """Start the TCP listener and, with a static dir, the HTTP/WS one."""
        server = await asyncio.start_server(self.handle_tcp, host, port)
        self._servers.append(server)
        bound = [server.sockets[0].getsockname()[:2]]
        if static_dir is not None:
            http = _HttpFrontend(self, Path(static_dir))
            http_server = await asyncio.start_server(
                http.handle, host, http_port if http_port is not None else (port + 1 if port else 0)
            )
            self._servers.append(http_server)
            bound.append(http_server.sockets[0].getsockname()[:2])
        self._heartbeat_task = asyncio.ensure_future(self._heartbeat())
        return bound

    async def stop(self) -> None:
        if self._heartbeat_task is not None:
            self._heartbeat_task.cancel()
        for server in self._servers:
            server.close()
            await server.wait_closed()
        for task in list(self._conn_tasks):
            task.cancel()
        await asyncio.gather(*self._conn_tasks, return_exceptions=True)
        if self.log is not None:
            self.log.seal(self.kernel)


class _Transport:
    async def read_frame(self) -> bytes | None:
        raise NotImplementedError

    async def write_frame(self, data: bytes) -> None:
        raise NotImplementedError

    async def close(self) -> None:
        raise NotImplementedError


class _LineTransport(_Transport):
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self.reader = reader
        self.writer = writer

    async def read_frame(self) -> bytes | None:
        try:
            line = await self.reader.readline()
        except ConnectionError:
            return None
        return line if line else None

    async def write_frame(self, data: bytes) -> None:
        self.writer.write(data)
        try:
            await self.writer.drain()
        except ConnectionError:
            pass

    async def close(self) -> None:
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, RuntimeError):
            pass


class _WebSocketTransport(_Transport):
    """Server side of RFC 6455: text frames, one wire frame per message."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self.reader = reader
        self.writer = writer

    async def read_frame(self) -> bytes | None:
        while True:
            try:
                header = await self.reader.readexactly(2)
            except (asyncio.IncompleteReadError, ConnectionError):
                return None
            fin_opcode, mask_len = header
            opcode = fin_opcode & 0x0F
            masked = bool(mask_len & 0x80)
            length = mask_len & 0x7F
            if length == 126:
                length = struct.unpack(">H", await self.reader.readexactly(2))[0]
            elif length == 127:
                length = struct.unpack(">Q", await self.reader.readexactly(8))[0]
            mask = await self.reader.readexactly(4) if masked else b"\x00" * 4
            payload = await self.reader.readexactly(length)
            if masked:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == 0x8:  # close
                await self._send_raw(0x8, b"")
                return None
            if opcode == 0x9:  # ping
                await self._send_raw(0xA, payload)
                continue
            if opcode in (0x1, 0x2, 0x0):
                return payload
            # ignore pongs and anything else

    async def write_frame(self, data: bytes) -> None:
        await self._send_raw(0x1, data)

    async def _send_raw(self, opcode: int, payload: bytes) -> None:
        header = bytes([0x80 | opcode])
        n = len(payload)
        if n < 126:
            header += bytes([n])
        elif n < 1 << 16:
            header += bytes([126]) + struct.pack(">H", n)
        else:
            header += bytes([127]) + struct.pack(">Q", n)
        self.writer.write(header + payload)
        try:
            await self.writer.drain()
        except ConnectionError:
            pass

    async def close(self) -> None:
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, RuntimeError):
            pass


class _HttpFrontend:
    """Static files plus the /ws WebSocket endpoint for browser clients."""

    def __init__(self, gateway: Gateway, static_dir: Path) -> None:
        self.gateway = gateway
        self.static_dir = static_dir

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        task = asyncio.current_task()
        if task is not None:
            self.gateway._conn_tasks.add(task)
            task.add_done_callback(self.gateway._conn_tasks.discard)
        try:
            request_line = await reader.readline()
            if not request_line:
                writer.close()
                return
            parts = request_line.decode("latin-1").split()
            method, target = (parts + ["", ""])[:2]
            headers: dict[str, str] = {}
            while True:
                line = await reader.readline()
                if line in (b"\r\n", b"\n", b""):
                    break
                name, _, value = line.decode("latin-1").partition(":")
                headers[name.strip().lower()] = value.strip()
            if target.split("?")[0] == "/ws" and "websocket" in headers.get("upgrade", "").lower():
                await self._upgrade(reader, writer, headers)
                return
            await self._static(writer, method, target)
        except ConnectionError:
            pass
        finally:
            try:
                writer.close()
            except RuntimeError:
                pass

    async def _upgrade(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        headers: dict[str, str],
    ) -> None:
        key = headers.get("sec-websocket-key", "")
        accept = base64.b64encode(hashlib.sha1((key + _WS_MAGIC).encode()).digest()).decode()
        writer.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode("latin-1")
        )
        await writer.drain()
        await self.gateway._serve_connection(_WebSocketTransport(reader, writer))

    async def _static(self, writer: asyncio.StreamWriter, method: str, target: str) -> None:
        path = target.split("?")[0]
        if path in ("/", ""):
            path = "/index.html"
        candidate = (self.static_dir / path.lstrip("/")).resolve()
        ok = (
            method == "GET"
            and str(candidate).startswith(str(self.static_dir.resolve()))
            and candidate.is_file()
        )
        if not ok:
            body = b"not found"
            writer.write(
                b"HTTP/1.1 404 Not Found\r\nContent-Length: %d\r\nConnection: close\r\n\r\n%s"
                % (len(body), body)
            )
        else:
            body = candidate.read_bytes()
            ctype = _CONTENT_TYPES.get(candidate.suffix, "application/octet-stream")
            writer.write(
                b"HTTP/1.1 200 OK\r\nContent-Type: %s\r\nContent-Length: %d\r\nConnection: close\r\n\r\n"
                % (ctype.encode("latin-1"), len(body))
            )
            writer.write(body)
        await writer.drain()


async def run_gateway(
    descriptor: dict[str, Any],
    host: str,
    port: int,
    *,
    log_path: str | Path | None = None,
    static_dir: str | Path | None = None,
    http_port: int | None = None,
    seed: int = 0,
) -> None:
    gateway = Gateway(descriptor, seed=seed, log_path=log_path)
    bound = await gateway.start(host, port, static_dir=static_dir, http_port=http_port)
    for addr in bound:
        log.info("listening on %s:%s", *addr)
    print(json.dumps({"listening": [f"{h}:{p}" for h, p in bound]}), flush=True)
    try:
        await asyncio.Event().wait()
    finally:
        await gateway.stop()
