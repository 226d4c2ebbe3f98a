"""Command-line client.

Every command is a request to the HTTP service: against a running server
with ``--server URL``, otherwise against an in-process instance of the same
application. Exit status is 0 on success and the error's ``exit_code``
otherwise (see :mod:`hapticsim.errors`); 2 is a usage error.
"""

from __future__ import annotations

import argparse
import base64
import json
import sys
import warnings
from pathlib import Path

import httpx

from . import errors
from .errors import HapticSimError, IoError, ScenarioError, ServiceUnavailable
from .scenarios.runner import write_files
from .service.schemas import ArtifactFile, DecodeResponse, ReplayResponse, RunResponse


class ServiceClient:
    def __init__(self, server: str | None = None, timeout: float = 600.0):
        if server:
            self._http = httpx.Client(base_url=server, timeout=timeout)
        else:
            with warnings.catch_warnings():
                # starlette nags about its httpx backend on import
                warnings.filterwarnings("ignore", message=".*starlette.testclient")
                from fastapi.testclient import TestClient

            from .service.app import app

            self._http = TestClient(app, raise_server_exceptions=True)
        self.server = server

    def post(self, path: str, body: dict) -> dict:
        try:
            resp = self._http.post(path, json=body)
        except httpx.TransportError as exc:
            raise ServiceUnavailable(f"cannot reach {self.server}: {exc}") from None
        data = resp.json()
        if resp.status_code == 200:
            return data
        raise _error_from(data, resp.status_code)

    def close(self) -> None:
        self._http.close()


def _error_from(data: dict, status: int) -> HapticSimError:
    if isinstance(data, dict) and "exit_code" in data:
        cls = getattr(errors, data.get("error", ""), None)
        if not (isinstance(cls, type) and issubclass(cls, HapticSimError)):
            cls = HapticSimError
        exc = cls.__new__(cls)
        Exception.__init__(exc, data.get("message", ""))
        exc.exit_code = data["exit_code"]
        return exc
    return HapticSimError(f"service returned HTTP {status}: {data}")


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None


def _write(files: list[ArtifactFile], out: str | None) -> None:
    if out:
        paths = write_files({f.name: f.data() for f in files}, out)
        for name in sorted(paths):
            print(f"wrote {paths[name]}")


def cmd_run(client: ServiceClient, args) -> int:
    try:
        config = json.loads(_read_bytes(args.config))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{args.config}: not valid JSON: {exc}") from None
    body = {
        "config": config,
        "seed": args.seed,
        "condition": args.condition,
        "deterministic": args.deterministic,
        "realtime": args.realtime,
    }
    resp = RunResponse.model_validate(client.post("/runs", body))
    _write(resp.files, args.out)
    print(resp.metrics.model_dump_json(indent=2, exclude={"levels"}))
    return 0


def cmd_replay(client: ServiceClient, args) -> int:
    text = _read_bytes(args.event_log).decode("utf-8", errors="replace")
    resp = ReplayResponse.model_validate(client.post("/replay", {"event_log": text, "tail": args.tail}))
    _write(resp.files, args.out)
    print(f"{resp.n_events} events rendered over {resp.n_ticks} ticks")
    return 0


def cmd_decode(client: ServiceClient, args) -> int:
    data = base64.b64encode(_read_bytes(args.capture)).decode("ascii")
    resp = DecodeResponse.model_validate(client.post("/protocol/decode", {"data": data}))
    lines = ["tick,seq,count,frame"]
    for f in resp.frames:
        tick = "" if f.tick is None else str(f.tick)
        lines.append(f"{tick},{f.seq},{len(f.updates)},{f.hex}")
    text = "\n".join(lines) + "\n"
    if args.out:
        files = {"decoded_frames.csv": text, "decode_report.json": resp.model_dump_json(indent=2) + "\n"}
        write_files(files, args.out)
    else:
        sys.stdout.write(text)
    heartbeats = sum(f.heartbeat for f in resp.frames)
    print(
        f"{resp.kind}: {len(resp.frames)} frames ({heartbeats} heartbeats), "
        f"{len(resp.errors)} errors, {len(resp.gaps)} gaps",
        file=sys.stderr,
    )
    for issue in resp.errors:
        print(f"  {issue.error} at tick {issue.tick}: {issue.message}", file=sys.stderr)
    return resp.errors[0].exit_code if resp.errors else 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("hapticsim.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hapticsim", description=__doc__.splitlines()[0])
    p.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config", help="scenario config JSON")
    run.add_argument("--out", help="directory for the run's files")
    run.add_argument("--seed", type=int)
    run.add_argument("--condition")
    run.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="lockstep virtual clocks and a fixed seed (default); "
        "--no-deterministic draws a fresh seed unless --seed is given",
    )
    run.add_argument("--realtime", action="store_true", help="pace the simulation to wall-clock time")

    replay = sub.add_parser("replay", help="render an event log offline")
    replay.add_argument("event_log")
    replay.add_argument("--out")
    replay.add_argument("--tail", type=float, default=0.5, help="seconds rendered after the last event")

    proto = sub.add_parser("protocol", help="wire protocol tools")
    proto_sub = proto.add_subparsers(dest="action", required=True)
    decode = proto_sub.add_parser("decode", help="decode a frame capture or raw frame stream")
    decode.add_argument("capture")
    decode.add_argument("--out")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    handlers = {"run": cmd_run, "replay": cmd_replay, "protocol": cmd_decode}
    client = None
    try:
        client = ServiceClient(args.server)
        return handlers[args.command](client, args)
    except HapticSimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    finally:
        if client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())
