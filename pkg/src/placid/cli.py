"""Operator commands: scripted simulation runs, the live server, a client.

Exit codes are a stable contract: 0 success, 1 trace digest mismatch,
2 parse/config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from importlib import resources
from pathlib import Path

from .interaction import ActError, AgentId
from .microtools import build_request
from .scenario import ScenarioError, execute_scenario, load_scenario
from .wire import MalformedFrame, decode_frame, encode

EXIT_OK = 0
EXIT_DIGEST_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_LISTEN = "127.0.0.1:7340"


def _split_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bad address {value!r}, expected HOST:PORT")
    return host, int(port)


def _load_descriptor(path: str | None) -> dict:
    if path is None:
        data = resources.files("placid.data").joinpath("papoticiel.json").read_text("utf-8")
        return json.loads(data)
    file = Path(path)
    if not file.is_file():
        raise FileNotFoundError(f"descriptor not found: {file}")
    return json.loads(file.read_text("utf-8"))


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log_path = args.log
    if log_path is None and args.log_dir:
        Path(args.log_dir).mkdir(parents=True, exist_ok=True)
        log_path = str(Path(args.log_dir) / f"{scenario.name}.jsonl")
    try:
        result = execute_scenario(
            scenario, trace_path=args.trace, log_path=log_path, seed=args.seed
        )
    except Exception as exc:  # noqa: BLE001 - report and map to the exit contract
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.json:
        print(json.dumps(result.summary(), sort_keys=True))
    else:
        print(f"{result.name}: digest {result.digest} after {result.tick} ticks ({result.events} events)")
        if result.expected_digest is not None:
            print("digest matches" if result.digest_ok else f"digest MISMATCH (expected {result.expected_digest})")
    return EXIT_OK if result.digest_ok else EXIT_DIGEST_MISMATCH


def cmd_serve(args: argparse.Namespace) -> int:
    from .gateway import run_gateway

    try:
        host, port = _split_listen(args.listen)
        descriptor = _load_descriptor(args.descriptor)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log_path = None
    if args.log_dir:
        Path(args.log_dir).mkdir(parents=True, exist_ok=True)
        log_path = str(Path(args.log_dir) / "live.jsonl")
    try:
        asyncio.run(
            run_gateway(
                descriptor,
                host,
                port,
                log_path=log_path,
                static_dir=args.static_dir,
                http_port=args.http_port,
                seed=args.seed,
            )
        )
    except KeyboardInterrupt:
        return EXIT_OK
    except OSError as exc:
        print(f"bind failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


async def _client_loop(host: str, port: int, user: str, password: str) -> int:
    try:
        reader, writer = await asyncio.open_connection(host, port)
    except OSError as exc:
        print(f"connect failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    me = AgentId.user(user)
    writer.write(encode(build_login_act(me, user, password)))
    await writer.drain()

    async def reader_task() -> None:
        while True:
            line = await reader.readline()
            if not line:
                print("! connection closed")
                return
            try:
                frame = decode_frame(line)
            except MalformedFrame as exc:
                print(f"! bad frame: {exc.reason}")
                continue
            act = frame.act
            seq = f"#{frame.seq} " if frame.seq is not None else ""
            print(f"{seq}{act.performative.value} {act.msg_type} {json.dumps(act.body)}")

    pump = asyncio.ensure_future(reader_task())
    loop = asyncio.get_event_loop()
    try:
        while True:
            line = await loop.run_in_executor(None, sys.stdin.readline)
            if not line:
                break
            line = line.strip()
            if not line or line == "/quit":
                if line:
                    break
                continue
            try:
                act = parse_command(me, line)
            except (ValueError, ActError) as exc:
                print(f"! {exc}")
                continue
            writer.write(encode(act))
            await writer.drain()
    finally:
        pump.cancel()
        writer.close()
    return EXIT_OK


def build_login_act(me: AgentId, user: str, password: str, resume_from: int = 0):
    from .interaction import Performative, make_act

    return make_act(
        Performative.ASK,
        me,
        [AgentId.agent("gateway")],
        "auth.login",
        {"user": user, "password": password, "resume_from": resume_from},
    )


def parse_command(me: AgentId, line: str):
    """Terminal client mini-language; raw JSON frames pass through as-is."""
    if line.startswith("{"):
        return decode_frame(line).act
    parts = line.split()
    cmd, rest = parts[0], parts[1:]
    if cmd == "/open":
        users = rest[1].split(",") if len(rest) > 1 else []
        return build_request(
            "open_session", me,
            {"session": rest[0], "participants": users, "title": " ".join(rest[2:])},
        )
    if cmd == "/presences":
        return build_request("check_presences", me, {"session": rest[0]})
    if cmd == "/post":
        return build_request("post_message", me, {"session": rest[0], "text": " ".join(rest[1:])})
    if cmd == "/close":
        return build_request("close_session", me, {"session": rest[0]})
    if cmd == "/poll":
        question, *options = " ".join(rest[2:]).split("|")
        return build_request(
            "open_poll", me,
            {"session": rest[0], "poll": rest[1], "question": question.strip(),
             "options": [o.strip() for o in options]},
        )
    if cmd == "/vote":
        return build_request("cast_ballot", me, {"session": rest[0], "poll": rest[1], "option": int(rest[2])})
    if cmd == "/closepoll":
        return build_request("close_poll", me, {"session": rest[0], "poll": rest[1]})
    if cmd == "/schedule":
        return build_request(
            "schedule_entry", me,
            {"entry": rest[0], "session": rest[1], "start_tick": int(rest[2]),
             "participants": rest[3].split(",") if len(rest) > 3 else [],
             "title": " ".join(rest[4:]), "auto_start": True},
        )
    if cmd == "/leave":
        return build_request("leave", me, {"session": rest[0]})
    raise ValueError(f"unknown command {cmd!r}")


def cmd_client(args: argparse.Namespace) -> int:
    try:
        host, port = _split_listen(args.connect)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return asyncio.run(_client_loop(host, port, args.user, args.password))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="placid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file against a fresh simulated kernel")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--trace", help="write the trace (JSON lines) here")
    run_p.add_argument("--log", help="write the archive log here")
    run_p.add_argument("--log-dir", default=os.environ.get("PLACID_LOG_DIR"))
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    run_p.set_defaults(func=cmd_run)

    serve_p = sub.add_parser("serve", help="boot the live meeting service")
    serve_p.add_argument("--listen", default=os.environ.get("PLACID_LISTEN", DEFAULT_LISTEN))
    serve_p.add_argument("--descriptor", help="deployment descriptor JSON (default: built-in)")
    serve_p.add_argument("--log-dir", default=os.environ.get("PLACID_LOG_DIR"))
    serve_p.add_argument("--static-dir", help="serve the browser client from this directory")
    serve_p.add_argument("--http-port", type=int, help="port for static files + /ws (default: TCP port + 1)")
    serve_p.add_argument("--seed", type=int, default=0)
    serve_p.set_defaults(func=cmd_serve)

    client_p = sub.add_parser("client", help="line-oriented terminal client")
    client_p.add_argument("--connect", default=os.environ.get("PLACID_LISTEN", DEFAULT_LISTEN))
    client_p.add_argument("--user", required=True)
    client_p.add_argument("--password", required=True)
    client_p.set_defaults(func=cmd_client)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
