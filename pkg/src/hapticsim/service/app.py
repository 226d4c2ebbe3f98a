"""FastAPI application exposing scenario runs, replay and the wire protocol.

Library errors come back as HTTP 422 with an :class:`ErrorBody` whose
``exit_code`` matches the error taxonomy, so clients can surface them
unchanged.
"""

from __future__ import annotations

import base64
import binascii

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .. import __version__
from ..actuator import MOTORS, motor_force
from ..errors import HapticSimError, LinkError, ScenarioError
from ..events import parse_event_log
from ..link import Capture, ChannelShadow, build_frame, decode_stream, encode_frame, reconstruct
from ..scenarios.config import RunMetrics, ScenarioConfig
from ..scenarios.runner import FILES, render_artifacts, replay_events, run_scenario
from ..synth import format_signal_csv
from .schemas import (
    ArtifactFile,
    DecodedFrame,
    DecodeIssue,
    DecodeRequest,
    DecodeResponse,
    EncodeRequest,
    EncodeResponse,
    ErrorBody,
    GapBody,
    Health,
    MotorForceRequest,
    MotorForceResponse,
    ReplayRequest,
    ReplayResponse,
    RunRequest,
    RunResponse,
)

app = FastAPI(title="hapticsim", version=__version__)


@app.exception_handler(HapticSimError)
async def _library_error(request: Request, exc: HapticSimError):
    body = ErrorBody(error=type(exc).__name__, exit_code=exc.exit_code, message=str(exc))
    return JSONResponse(status_code=422, content=body.model_dump())


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**32))


def build_config(req: RunRequest) -> ScenarioConfig:
    data = dict(req.config)
    if req.seed is not None:
        data["seed"] = req.seed
    elif not req.deterministic:
        data["seed"] = _fresh_seed()
    if req.condition is not None:
        data["condition"] = req.condition
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(f"invalid scenario config: {exc}") from None


@app.get("/health", response_model=Health)
def health() -> Health:
    return Health(version=__version__)


@app.post("/runs", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    config = build_config(req)
    metrics, artifacts = run_scenario(config, realtime=req.realtime)
    files = render_artifacts(metrics, artifacts)
    # the serialised metrics carry the file list filled in by render_artifacts
    final = RunMetrics.model_validate_json(files[FILES["metrics"]])
    return RunResponse(metrics=final, files=[ArtifactFile.from_content(n, c) for n, c in files.items()])


@app.post("/replay", response_model=ReplayResponse)
def replay(req: ReplayRequest) -> ReplayResponse:
    events = parse_event_log(req.event_log)
    signals, capture, timeline = replay_events(events, tail=req.tail)
    files = {
        "signals.csv": format_signal_csv(signals, capture.rate),
        "device_timeline.csv": timeline.to_csv(),
        "frames.cap": capture.to_bytes(),
    }
    return ReplayResponse(
        n_events=len(events),
        n_ticks=capture.n_ticks,
        files=[ArtifactFile.from_content(n, c) for n, c in files.items()],
    )


def _issue(tick, exc: LinkError) -> DecodeIssue:
    return DecodeIssue(tick=tick, error=type(exc).__name__, exit_code=exc.exit_code, message=str(exc))


@app.post("/protocol/decode", response_model=DecodeResponse)
def protocol_decode(req: DecodeRequest) -> DecodeResponse:
    try:
        data = base64.b64decode(req.data, validate=True)
    except binascii.Error:
        raise LinkError("request data is not valid base64") from None
    if data.startswith(Capture.CAPTURE_MAGIC):
        capture = Capture.from_bytes(data)
        chunks = capture.records
        kind, rate, n_ticks = "capture", capture.rate, capture.n_ticks
    else:
        chunks = [(None, data)]
        kind, rate, n_ticks = "stream", None, None
    frames, errors, decoded = [], [], []
    for tick, chunk in chunks:
        for item in decode_stream(chunk):
            if isinstance(item, LinkError):
                errors.append(_issue(tick, item))
                continue
            decoded.append((tick if tick is not None else len(decoded), item))
            frames.append(
                DecodedFrame(
                    tick=tick,
                    seq=item.seq,
                    heartbeat=item.is_heartbeat,
                    updates=item.updates,
                    hex=_frame_hex(item),
                )
            )
    rec = reconstruct(decoded, n_ticks or len(decoded))
    return DecodeResponse(
        kind=kind,
        rate=rate,
        n_ticks=n_ticks,
        frames=frames,
        errors=errors,
        gaps=[GapBody(missing=g.missing, count=g.count) for g in rec.gaps],
    )


def _frame_hex(frame) -> str:
    return build_frame(frame.seq, sorted(frame.raw.items())).hex(" ").upper()


@app.post("/protocol/encode", response_model=EncodeResponse)
def protocol_encode(req: EncodeRequest) -> EncodeResponse:
    frame, _ = encode_frame(req.updates, ChannelShadow(seq=req.seq))
    return EncodeResponse(hex=frame.hex(" ").upper(), length=len(frame))


@app.post("/actuator/force", response_model=MotorForceResponse)
def actuator_force(req: MotorForceRequest) -> MotorForceResponse:
    if req.motor not in MOTORS:
        raise HapticSimError(f"unknown motor {req.motor!r}; choose {', '.join(MOTORS)}")
    return MotorForceResponse(motor=req.motor, current=req.current, force=motor_force(req.current, MOTORS[req.motor]))
