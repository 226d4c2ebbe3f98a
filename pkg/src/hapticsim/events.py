"""Per-finger haptic event extraction and feedback-condition masking."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

from .errors import ParseError
from .hand import FINGERS, FingertipSummary
from .physics.collision import FrictionState

N_CHANNELS = 9
PRESSURE_EPSILON = 1.0e-3  # N
FINGER_CHANNELS = {finger: i for i, finger in enumerate(FINGERS)}


class EventKind(str, enum.Enum):
    CONTACT_ONSET = "ContactOnset"
    CONTACT_RELEASE = "ContactRelease"
    SLIP_ONSET = "SlipOnset"
    SLIP_VELOCITY = "SlipVelocity"
    PRESSURE_UPDATE = "PressureUpdate"


@dataclass(frozen=True)
class HapticEvent:
    """``value`` carries the payload: impact speed (ContactOnset), slip speed
    (SlipVelocity) or normal force (PressureUpdate); 0 otherwise."""

    time: float
    channel: int
    kind: EventKind
    value: float = 0.0

    def __post_init__(self):
        if not 0 <= self.channel < N_CHANNELS:
            raise ValueError(f"channel {self.channel} outside 0..{N_CHANNELS - 1}")
        if self.value < 0:
            raise ValueError(f"{self.kind.value} payload must be non-negative")


class Condition(str, enum.Enum):
    NO_HAPTIC = "NoHaptic"
    CONTACT_VIBRATION_ONLY = "ContactVibrationOnly"
    PRESSURE_ONLY = "PressureOnly"
    VIBRATION_ONLY = "VibrationOnly"
    PRESSURE_AND_VIBRATION = "PressureAndVibration"


_ALLOWED = {
    Condition.NO_HAPTIC: frozenset(),
    Condition.CONTACT_VIBRATION_ONLY: frozenset({EventKind.CONTACT_ONSET, EventKind.CONTACT_RELEASE}),
    Condition.PRESSURE_ONLY: frozenset({EventKind.PRESSURE_UPDATE}),
    Condition.VIBRATION_ONLY: frozenset({EventKind.CONTACT_ONSET, EventKind.SLIP_ONSET, EventKind.SLIP_VELOCITY}),
    Condition.PRESSURE_AND_VIBRATION: frozenset(EventKind),
}


def condition_mask(events, condition) -> list[HapticEvent]:
    allowed = _ALLOWED[Condition(condition)]
    return [e for e in events if e.kind in allowed]


@dataclass
class FingerContactHistory:
    """Previous summary and last transmitted pressure, per finger channel."""

    channels: dict  # finger -> channel
    previous: dict = field(default_factory=dict)
    last_pressure: dict = field(default_factory=dict)

    @classmethod
    def for_fingers(cls, fingers) -> "FingerContactHistory":
        return cls({f: FINGER_CHANNELS[f] for f in fingers})


def extract_events(history: FingerContactHistory, summaries: dict, time: float, epsilon: float = PRESSURE_EPSILON):
    """Events for one simulation step. Returns ``(events, history)``.

    ``summaries`` maps finger name to its :class:`FingertipSummary`.
    """
    events = []
    previous = dict(history.previous)
    last_pressure = dict(history.last_pressure)
    for finger, channel in history.channels.items():
        prev = previous.get(finger, FingertipSummary())
        curr = summaries[finger]
        if curr.in_contact and not prev.in_contact:
            events.append(HapticEvent(time, channel, EventKind.CONTACT_ONSET, abs(curr.normal_relative_speed)))
        elif prev.in_contact and not curr.in_contact:
            events.append(HapticEvent(time, channel, EventKind.CONTACT_RELEASE))
        if curr.in_contact and curr.friction_state is FrictionState.DYNAMIC:
            if prev.friction_state is not FrictionState.DYNAMIC or not prev.in_contact:
                events.append(HapticEvent(time, channel, EventKind.SLIP_ONSET))
            events.append(HapticEvent(time, channel, EventKind.SLIP_VELOCITY, curr.slip_speed))
        force = curr.total_normal_force if curr.in_contact else 0.0
        sent = last_pressure.get(finger, 0.0)
        if abs(force - sent) > epsilon:
            events.append(HapticEvent(time, channel, EventKind.PRESSURE_UPDATE, force))
            last_pressure[finger] = force
        elif force == 0.0 and sent != 0.0 and not curr.in_contact:
            # release drops the baseline exactly to zero
            events.append(HapticEvent(time, channel, EventKind.PRESSURE_UPDATE, 0.0))
            last_pressure[finger] = 0.0
        previous[finger] = curr
    return events, FingerContactHistory(history.channels, previous, last_pressure)


EVENT_LOG_COLUMNS = ("time", "channel", "kind", "payload")


def format_event_log(events) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_LOG_COLUMNS)
    for e in events:
        w.writerow([f"{e.time:.6f}", e.channel, e.kind.value, f"{e.value:.9g}"])
    return buf.getvalue()


def parse_event_log(text: str) -> list[HapticEvent]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != EVENT_LOG_COLUMNS:
        raise ParseError(f"event log must start with header {','.join(EVENT_LOG_COLUMNS)}", line=1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            out.append(HapticEvent(float(row[0]), int(row[1]), EventKind(row[2]), float(row[3])))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad event record: {exc}", line=lineno) from None
    return out
