"""Scenario dispatch, artifact export and offline replay."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..actuator import emulate_device
from ..errors import IoError
from ..events import format_event_log
from ..link import Capture, StreamEncoder
from ..synth import SynthConfig, Synthesizer, default_motors, format_signal_csv
from .config import RunMetrics, ScenarioConfig, ScenarioKind
from .grasp import run_grasp_min_force
from .peg import run_peg_in_hole
from .slide import run_slide_regrasp

RUNNERS = {
    ScenarioKind.GRASP_MIN_FORCE: run_grasp_min_force,
    ScenarioKind.SLIDE_REGRASP: run_slide_regrasp,
    ScenarioKind.PEG_IN_HOLE: run_peg_in_hole,
}

FILES = {
    "metrics": "metrics.json",
    "physics_trace": "physics_trace.csv",
    "events": "events.csv",
    "signals": "signals.csv",
    "device_timeline": "device_timeline.csv",
    "capture": "frames.cap",
}


def run_scenario(config: ScenarioConfig, realtime: bool = False):
    """Run the configured scenario; returns ``(RunMetrics, Artifacts)``."""
    return RUNNERS[config.scenario](config, realtime=realtime)


def render_artifacts(metrics: RunMetrics, artifacts) -> dict:
    """File name to content (str or bytes) for one run.

    ``metrics.files`` lists the names relative to the output directory so
    that two identical runs serialise identically wherever they are written.
    """
    out = {
        FILES["physics_trace"]: artifacts.physics_trace,
        FILES["events"]: format_event_log(artifacts.events),
    }
    if artifacts.timeline is not None:
        out[FILES["signals"]] = format_signal_csv(artifacts.signals, artifacts.rate)
        out[FILES["device_timeline"]] = artifacts.timeline.to_csv()
        out[FILES["capture"]] = artifacts.capture.to_bytes()
    metrics = metrics.model_copy(update={"files": {k: v for k, v in FILES.items() if v in out or k == "metrics"}})
    out[FILES["metrics"]] = metrics.model_dump_json(indent=2) + "\n"
    return out


def write_files(files: dict, out_dir) -> dict:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, content in files.items():
            path = out_dir / name
            if isinstance(content, bytes):
                path.write_bytes(content)
            else:
                path.write_text(content)
            paths[name] = str(path)
    except OSError as exc:
        raise IoError(f"cannot write artifacts to {out_dir}: {exc}") from None
    return paths


def export_run(metrics: RunMetrics, artifacts, out_dir) -> dict:
    """Write every artifact of a run into ``out_dir``; returns name -> path."""
    return write_files(render_artifacts(metrics, artifacts), out_dir)


def replay_events(events, config: SynthConfig | None = None, tail: float = 0.5):
    """Render an event log offline: signals, frame capture and timeline."""
    if config is None:
        config = SynthConfig(motors=default_motors())
    end = max((e.time for e in events), default=0.0) + tail
    n = int(np.ceil(end * config.rate)) + 1
    synth = Synthesizer(config)
    synth.push(events)
    signals = synth.run(n)
    encoder = StreamEncoder(rate=config.rate)
    capture = Capture(config.rate, n)
    for k in range(n):
        frame = encoder.tick({ch: signals[ch][k] for ch in synth.channels})
        if frame:
            capture.records.append((k, frame))
    timeline = emulate_device(capture, config.motors)
    return signals, capture, timeline
