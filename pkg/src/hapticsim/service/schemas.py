"""Request and response bodies of the HTTP service."""

from __future__ import annotations

import base64
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from ..scenarios.config import RunMetrics


class ArtifactFile(BaseModel):
    """One output file. Binary content travels base64-encoded."""

    name: str
    encoding: Literal["utf-8", "base64"]
    content: str

    @classmethod
    def from_content(cls, name: str, content) -> "ArtifactFile":
        if isinstance(content, bytes):
            return cls(name=name, encoding="base64", content=base64.b64encode(content).decode("ascii"))
        return cls(name=name, encoding="utf-8", content=content)

    def data(self):
        """Decoded content: ``bytes`` for binary files, ``str`` otherwise."""
        if self.encoding == "base64":
            return base64.b64decode(self.content)
        return self.content


class ErrorBody(BaseModel):
    error: str
    exit_code: int
    message: str


class Health(BaseModel):
    status: str = "ok"
    version: str


class RunRequest(BaseModel):
    # validated server-side so that config problems map to ScenarioError
    config: dict[str, Any]
    seed: Optional[int] = None
    condition: Optional[str] = None
    deterministic: bool = True
    realtime: bool = False


class RunResponse(BaseModel):
    metrics: RunMetrics
    files: list[ArtifactFile]


class ReplayRequest(BaseModel):
    event_log: str = Field(description="event log CSV text")
    tail: float = Field(0.5, ge=0, description="seconds rendered after the last event")


class ReplayResponse(BaseModel):
    n_events: int
    n_ticks: int
    files: list[ArtifactFile]


class DecodeRequest(BaseModel):
    # a frame capture file, or a bare frame byte stream, base64-encoded
    data: str


class DecodedFrame(BaseModel):
    tick: Optional[int]
    seq: int
    heartbeat: bool
    updates: dict[int, float]
    hex: str


class DecodeIssue(BaseModel):
    tick: Optional[int]
    error: str
    exit_code: int
    message: str


class GapBody(BaseModel):
    missing: int
    count: int


class DecodeResponse(BaseModel):
    kind: Literal["capture", "stream"]
    rate: Optional[float]
    n_ticks: Optional[int]
    frames: list[DecodedFrame]
    errors: list[DecodeIssue]
    gaps: list[GapBody]


class EncodeRequest(BaseModel):
    updates: dict[int, float]
    seq: int = Field(0, ge=0, le=255)


class EncodeResponse(BaseModel):
    hex: str
    length: int


class MotorForceRequest(BaseModel):
    motor: str = "612"
    current: float


class MotorForceResponse(BaseModel):
    motor: str
    current: float
    force: float
