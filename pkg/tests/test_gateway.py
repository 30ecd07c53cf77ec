"""Live gateway: auth, frame streams, resume, presence on disconnect."""

import asyncio

from placid.gateway import Gateway
from placid.interaction import AgentId, Performative, make_act
from placid.microtools import default_descriptor
from placid.wire import decode_frame, encode

GATEWAY = AgentId.agent("gateway")
PAPO = AgentId.agent("papoticiel")
COM = AgentId.agent("com")


def run(coro):
    return asyncio.new_event_loop().run_until_complete(coro)


class Client:
    """Minimal test client over the raw TCP transport."""

    def __init__(self, user):
        self.user = user
        self.me = AgentId.user(user)
        self.reader = None
        self.writer = None

    async def connect(self, host, port, password=None, resume_from=0):
        self.reader, self.writer = await asyncio.open_connection(host, port)
        login = make_act(
            Performative.ASK, self.me, [GATEWAY], "auth.login",
            {"user": self.user, "password": password or f"{self.user}-pass",
             "resume_from": resume_from},
        )
        await self.send_act(login)
        return await self.recv()

    async def send_act(self, act):
        self.writer.write(encode(act))
        await self.writer.drain()

    async def send_raw(self, data: bytes):
        self.writer.write(data)
        await self.writer.drain()

    async def recv(self, timeout=3.0):
        line = await asyncio.wait_for(self.reader.readline(), timeout)
        assert line, "connection closed"
        return decode_frame(line)

    async def recv_until(self, msg_type, perf=None, timeout=3.0):
        while True:
            frame = await self.recv(timeout)
            if frame.act.msg_type == msg_type and (perf is None or frame.act.performative is perf):
                return frame

    async def close(self):
        if self.writer is not None:
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except ConnectionError:
                pass

    def ask(self, receiver, msg_type, body):
        return make_act(Performative.ASK, self.me, [receiver], msg_type, body)


async def start_gateway(**kwargs):
    gateway = Gateway(default_descriptor(), **kwargs)
    bound = await gateway.start(host="127.0.0.1", port=0)
    return gateway, bound[0][0], bound[0][1]


def test_login_hello_carries_agent_id():
    async def scenario():
        gateway, host, port = await start_gateway()
        client = Client("alice")
        hello = await client.connect(host, port)
        assert hello.act.msg_type == "auth.hello"
        assert hello.act.body["agent"] == "user:alice"
        await client.close()
        await gateway.stop()

    run(scenario())


def test_wrong_password_rejected_then_closed():
    async def scenario():
        gateway, host, port = await start_gateway()
        client = Client("alice")
        failed = await client.connect(host, port, password="wrong")
        assert failed.act.msg_type == "auth.failed"
        assert failed.act.body["error"] == "AuthFailed"
        line = await client.reader.readline()
        assert line == b""  # server closed the connection
        await client.close()
        await gateway.stop()

    run(scenario())


def test_second_simultaneous_login_rejected():
    async def scenario():
        gateway, host, port = await start_gateway()
        first = Client("alice")
        await first.connect(host, port)
        second = Client("alice")
        failed = await second.connect(host, port)
        assert failed.act.body["error"] == "AlreadyConnected"
        await first.close()
        await second.close()
        await gateway.stop()

    run(scenario())


def test_pre_auth_acts_rejected():
    async def scenario():
        gateway, host, port = await start_gateway()
        client = Client("alice")
        client.reader, client.writer = await asyncio.open_connection(host, port)
        await client.send_act(client.ask(COM, "chat.post", {"session": "s1", "text": "hi"}))
        failed = await client.recv()
        assert failed.act.msg_type == "auth.failed"
        await client.close()
        await gateway.stop()

    run(scenario())


def test_seq_bearing_client_frame_rejected():
    async def scenario():
        gateway, host, port = await start_gateway()
        client = Client("alice")
        await client.connect(host, port)
        act = client.ask(PAPO, "session.presences", {"session": "s1"})
        await client.send_raw(encode(act, seq=9))
        error = await client.recv_until("gateway.error")
        assert "seq" in error.act.body["error"]
        await client.close()
        await gateway.stop()

    run(scenario())


def test_spoofed_sender_rejected():
    async def scenario():
        gateway, host, port = await start_gateway()
        client = Client("alice")
        await client.connect(host, port)
        forged = make_act(Performative.ASK, AgentId.user("bob"), [PAPO], "session.presences", {"session": "s"})
        await client.send_act(forged)
        error = await client.recv_until("gateway.error")
        assert "user:alice" in error.act.body["error"]
        await client.close()
        await gateway.stop()

    run(scenario())


def test_chat_flow_and_per_connection_order():
    async def scenario():
        gateway, host, port = await start_gateway()
        alice, bob = Client("alice"), Client("bob")
        await alice.connect(host, port)
        await bob.connect(host, port)

        await alice.send_act(alice.ask(PAPO, "session.open", {"session": "s1", "participants": ["alice", "bob"]}))
        answer = await alice.recv_until("session.open", Performative.ANSWER)
        assert answer.act.body["ok"] is True
        await bob.recv_until("session.invite")

        for i in range(3):
            await alice.send_act(alice.ask(COM, "chat.post", {"session": "s1", "text": f"m{i}"}))
            await alice.recv_until("chat.post", Performative.ANSWER)

        got = []
        while len(got) < 3:
            frame = await bob.recv_until("chat.msg")
            got.append((frame.act.body["seq"], frame.act.body["text"]))
        assert got == [(1, "m0"), (2, "m1"), (3, "m2")]

        # frame stream seqs strictly increase per connection
        await alice.close()
        await bob.close()
        await gateway.stop()

    run(scenario())


def test_reconnect_resumes_after_last_acked_seq():
    async def scenario():
        gateway, host, port = await start_gateway()
        alice, bob = Client("alice"), Client("bob")
        await alice.connect(host, port)
        hello = await bob.connect(host, port)
        assert hello.act.body["agent"] == "user:bob"

        await alice.send_act(alice.ask(PAPO, "session.open", {"session": "s1", "participants": ["alice", "bob"]}))
        await alice.recv_until("session.open", Performative.ANSWER)
        invite = await bob.recv_until("session.invite")
        last_seen = invite.seq

        await bob.close()
        await asyncio.sleep(0.05)
        # two messages while bob is away; his agent is absent so only the
        # re-join backlog will carry them
        for text in ("while-away-1", "while-away-2"):
            await alice.send_act(alice.ask(COM, "chat.post", {"session": "s1", "text": text}))
            await alice.recv_until("chat.post", Performative.ANSWER)

        bob2 = Client("bob")
        await bob2.connect(host, port, resume_from=last_seen)
        backlog = await bob2.recv_until("chat.backlog")
        texts = [m["text"] for m in backlog.act.body["messages"]]
        assert texts == ["while-away-1", "while-away-2"]
        assert backlog.seq > last_seen

        await alice.close()
        await bob2.close()
        await gateway.stop()

    run(scenario())


def test_disconnect_flips_presence_absent():
    async def scenario():
        gateway, host, port = await start_gateway()
        alice, bob = Client("alice"), Client("bob")
        await alice.connect(host, port)
        await bob.connect(host, port)
        await alice.send_act(alice.ask(PAPO, "session.open", {"session": "s1", "participants": ["alice", "bob"]}))
        await alice.recv_until("session.open", Performative.ANSWER)
        await bob.recv_until("session.presence")

        await bob.close()
        await asyncio.sleep(0.05)
        await alice.send_act(alice.ask(PAPO, "session.presences", {"session": "s1"}))
        roster = await alice.recv_until("session.presences", Performative.ANSWER)
        assert roster.act.body["roster"]["user:bob"] == "absent"
        await alice.close()
        await gateway.stop()

    run(scenario())


def test_stream_resume_replays_identical_frames():
    async def scenario():
        gateway, host, port = await start_gateway()
        alice = Client("alice")
        await alice.connect(host, port)
        await alice.send_act(alice.ask(PAPO, "session.open", {"session": "s1", "participants": ["alice"]}))
        first = []
        frame = await alice.recv_until("session.open", Performative.ANSWER)
        first.append((frame.seq, frame.act.msg_type))
        await alice.close()
        await asyncio.sleep(0.05)

        alice2 = Client("alice")
        await alice2.connect(host, port, resume_from=0)  # replay everything
        replayed = await alice2.recv_until("session.open", Performative.ANSWER)
        assert (replayed.seq, replayed.act.msg_type) == first[0]
        await alice2.close()
        await gateway.stop()

    run(scenario())


# -- browser transport: static files + WebSocket upgrade ----------------------


def _ws_client_frame(payload: bytes) -> bytes:
    # client frames must be masked per RFC 6455
    import os as _os

    mask = _os.urandom(4)
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    length = len(payload)
    if length < 126:
        header = bytes([0x81, 0x80 | length])
    else:
        import struct as _struct

        header = bytes([0x81, 0x80 | 126]) + _struct.pack(">H", length)
    return header + mask + masked


async def _ws_read_text(reader) -> bytes:
    import struct as _struct

    b1, b2 = await reader.readexactly(2)
    length = b2 & 0x7F
    if length == 126:
        length = _struct.unpack(">H", await reader.readexactly(2))[0]
    elif length == 127:
        length = _struct.unpack(">Q", await reader.readexactly(8))[0]
    assert not (b2 & 0x80), "server frames must not be masked"
    return await reader.readexactly(length)


def test_http_serves_static_files_and_websocket_frames(tmp_path):
    async def scenario():
        static = tmp_path / "static"
        static.mkdir()
        (static / "index.html").write_text("<html><body>meeting room</body></html>")
        gateway = Gateway(default_descriptor())
        bound = await gateway.start(host="127.0.0.1", port=0, static_dir=static, http_port=0)
        (_, _), (http_host, http_port) = bound

        # static file
        reader, writer = await asyncio.open_connection(http_host, http_port)
        writer.write(b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")
        await writer.drain()
        head = await reader.readuntil(b"\r\n\r\n")
        assert b"200 OK" in head and b"text/html" in head
        body = await reader.read(1024)
        assert b"meeting room" in body
        writer.close()
        await writer.wait_closed()

        # missing file
        reader, writer = await asyncio.open_connection(http_host, http_port)
        writer.write(b"GET /nope.js HTTP/1.1\r\nHost: x\r\n\r\n")
        await writer.drain()
        head = await reader.readuntil(b"\r\n\r\n")
        assert b"404" in head
        writer.close()
        await writer.wait_closed()

        # websocket upgrade + login over WS text frames
        reader, writer = await asyncio.open_connection(http_host, http_port)
        writer.write(
            b"GET /ws HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
            b"Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n"
        )
        await writer.drain()
        head = await reader.readuntil(b"\r\n\r\n")
        assert b"101" in head and b"s3pPLMBiTxaQ9kYGzzhZRbK+xOo=" in head

        login = make_act(
            Performative.ASK, AgentId.user("alice"), [GATEWAY], "auth.login",
            {"user": "alice", "password": "alice-pass", "resume_from": 0},
        )
        writer.write(_ws_client_frame(encode(login)))
        await writer.drain()
        hello = decode_frame(await asyncio.wait_for(_ws_read_text(reader), 3))
        assert hello.act.msg_type == "auth.hello"
        assert hello.act.body["agent"] == "user:alice"
        writer.close()
        await gateway.stop()
        await asyncio.sleep(0)

    run(scenario())
