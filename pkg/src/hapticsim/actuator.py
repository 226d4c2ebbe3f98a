"""String-drive fingertip actuator: force transmission, motor calibration and
an offline device emulator.

The motor curve is a deadband-linear-saturation model. Between ``i_dead`` and
``i_sat`` the pull force rises linearly from zero to ``F_sat`` and stays there
above the knee.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import OutOfRangeCurrent, ZeroRadius
from .link import reconstruct_capture

# the 612 deadband is solved from two anchors: 0.031 N at 4 % and 0.26 N at 15 %
_ANCHOR_F, _ANCHOR_I = 0.031, 0.04
_SAT_612_F, _SAT_612_I = 0.260, 0.15
I_DEAD_612 = (_ANCHOR_I * _SAT_612_F - _SAT_612_I * _ANCHOR_F) / (_SAT_612_F - _ANCHOR_F)


@dataclass(frozen=True)
class Resonance:
    f_res: float = 90.0
    q: float = 4.0


@dataclass(frozen=True)
class MotorModel:
    name: str
    F_sat: float
    i_sat: float
    i_dead: float
    axle_radius: float = 4.0e-4
    resonance: Resonance = field(default_factory=Resonance)
    f_current_stable: float = 1500.0

    def __post_init__(self):
        if isinstance(self.resonance, dict):
            object.__setattr__(self, "resonance", Resonance(**self.resonance))
        if not 0.0 <= self.i_dead < self.i_sat <= 1.0:
            raise ValueError("motor model needs 0 <= i_dead < i_sat <= 1")
        if self.F_sat <= 0:
            raise ValueError("F_sat must be positive")
        if self.axle_radius <= 0:
            raise ValueError("axle_radius must be positive")
        if self.resonance.f_res <= 0 or self.resonance.q <= 0:
            raise ValueError("resonance frequency and q must be positive")

    @property
    def slope(self) -> float:
        """Pull force per unit current on the linear segment (N per fraction)."""
        return self.F_sat / (self.i_sat - self.i_dead)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MotorModel":
        return cls(**data)


MOTOR_612 = MotorModel("612", F_sat=0.260, i_sat=0.15, i_dead=I_DEAD_612)
MOTOR_716 = MotorModel("716", F_sat=0.540, i_sat=0.50, i_dead=I_DEAD_612)
MOTORS = {"612": MOTOR_612, "716": MOTOR_716}


def load_motor_models(path) -> dict:
    """Read a JSON file mapping channel number (as a string) to motor fields.

    A value may also be the name of a preset (``"612"`` or ``"716"``).
    """
    raw = json.loads(Path(path).read_text())
    out = {}
    for key, value in raw.items():
        out[int(key)] = MOTORS[value] if isinstance(value, str) else MotorModel.from_dict(value)
    return out


def save_motor_models(models: dict, path) -> None:
    data = {str(ch): m.to_dict() for ch, m in sorted(models.items())}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


@dataclass(frozen=True)
class CapstanParams:
    mu: float
    theta: float

    def __post_init__(self):
        if self.mu < 0 or self.theta < 0:
            raise ValueError("capstan mu and theta must be non-negative")


def string_pull_force(torque: float, axle_radius: float) -> float:
    """Pull force on the finger from motor torque wound on an axle."""
    if axle_radius == 0:
        raise ZeroRadius("axle radius must be non-zero")
    if axle_radius < 0:
        raise ZeroRadius("axle radius must be positive")
    return torque / axle_radius


def capstan_tension(t0: float, params: CapstanParams) -> float:
    """Tension leaving a cylinder after wrapping ``params.theta`` radians."""
    if t0 < 0:
        raise ValueError("input tension must be non-negative")
    return t0 * math.exp(params.mu * params.theta)


def motor_force(i: float, model: MotorModel) -> float:
    if not 0.0 <= i <= 1.0 or math.isnan(i):
        raise OutOfRangeCurrent(f"current fraction {i} outside [0, 1]")
    if i <= model.i_dead:
        return 0.0
    if i >= model.i_sat:
        return model.F_sat
    return (i - model.i_dead) * model.slope


def motor_force_array(i: np.ndarray, model: MotorModel) -> np.ndarray:
    """Vectorised :func:`motor_force`; inputs are clipped to [0, 1]."""
    i = np.clip(np.asarray(i, dtype=float), 0.0, 1.0)
    return np.clip((i - model.i_dead) * model.slope, 0.0, model.F_sat)


def vibration_gain(f: float, model: MotorModel) -> float:
    """Vibration amplitude per unit current amplitude at frequency ``f``.

    A normalised second-order resonance (1 at DC, ``q`` at ``f_res``) times a
    current roll-off that is flat up to ``f_current_stable`` and falls linearly
    to zero at twice that frequency.
    """
    if f < 0:
        raise ValueError("frequency must be non-negative")
    return float(vibration_gain_array(np.array([f]), model)[0])


def vibration_gain_array(f: np.ndarray, model: MotorModel) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    r = f / model.resonance.f_res
    h = 1.0 / np.sqrt((1.0 - r * r) ** 2 + (r / model.resonance.q) ** 2)
    fs = model.f_current_stable
    rolloff = np.clip(1.0 - (f - fs) / fs, 0.0, 1.0)
    return h * rolloff


STATIC_CUTOFF_HZ = 20.0
BAND_ORDER = 4


@dataclass
class DeviceTimeline:
    """Rendered fingertip output for each emulated channel."""

    t: np.ndarray
    static_force: dict  # channel -> array (N)
    vibration_amplitude: dict  # channel -> array (N)

    def to_csv(self) -> str:
        channels = sorted(self.static_force)
        header = ["t"]
        for ch in channels:
            header += [f"ch{ch}_static_N", f"ch{ch}_vibration_N"]
        lines = [",".join(header)]
        for k, t in enumerate(self.t):
            row = [f"{t:.6f}"]
            for ch in channels:
                row += [f"{self.static_force[ch][k]:.9g}", f"{self.vibration_amplitude[ch][k]:.9g}"]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _lowpass(x: np.ndarray, rate: float) -> np.ndarray:
    sos = signal.butter(2, STATIC_CUTOFF_HZ, btype="low", fs=rate, output="sos")
    return signal.sosfilt(sos, x)


def _highpass(x: np.ndarray, rate: float) -> np.ndarray:
    sos = signal.butter(BAND_ORDER, STATIC_CUTOFF_HZ, btype="high", fs=rate, output="sos")
    return signal.sosfilt(sos, x)


def vibration_envelope(current: np.ndarray, rate: float, model: MotorModel) -> np.ndarray:
    """Vibration force amplitude (N) produced by the band above the static cut.

    The current above the static cut-off (4th-order Butterworth high-pass)
    is shaped by :func:`vibration_gain_array` in the
    frequency domain (zero-padded, so no wrap-around) and the amplitude is the
    magnitude of the analytic signal.
    """
    current = np.asarray(current, dtype=float)
    n = current.size
    if n == 0:
        return np.zeros(0)
    band = _highpass(current, rate)
    if not np.any(band):
        return np.zeros(n)
    m = 2 * n
    spec = np.fft.rfft(band, m)
    spec *= vibration_gain_array(np.fft.rfftfreq(m, 1.0 / rate), model)
    shaped = np.fft.irfft(spec, m)[:n]
    return model.slope * np.abs(signal.hilbert(shaped))


def emulate_channels(currents: dict, rate: float, models: dict) -> DeviceTimeline:
    """Render per-channel current traces (sampled at ``rate``) to forces."""
    n = len(next(iter(currents.values()))) if currents else 0
    t = np.arange(n) / rate
    static, vib = {}, {}
    for ch, cur in sorted(currents.items()):
        model = models[ch]
        cur = np.asarray(cur, dtype=float)
        static[ch] = motor_force_array(_lowpass(cur, rate), model)
        vib[ch] = vibration_envelope(cur, rate, model)
    return DeviceTimeline(t, static, vib)


def emulate_device(capture, models: dict) -> DeviceTimeline:
    """Decode a frame capture and render the fingertip timeline.

    ``capture`` is a :class:`hapticsim.link.Capture`; decode errors propagate.
    """
    currents = reconstruct_capture(capture, channels=sorted(models), strict=True)
    return emulate_channels(currents, capture.rate, models)
