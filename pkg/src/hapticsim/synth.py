"""High-rate current-command synthesis from low-rate haptic events.

Each channel mixes a pressure baseline, decaying sinusoidal transients and a
velocity-modulated slip vibration, then clamps to [0, 1]::

    out(t) = clamp(b(t) + sum_i A_i exp(-(t - t_i)/tau) sin(2 pi f_i (t - t_i))
                   + s sin(2 pi f_slip t), 0, 1)
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .actuator import MOTOR_612, MOTOR_716, MotorModel
from .errors import NegativeForce, UnknownChannel
from .events import EventKind, HapticEvent

ENVELOPE_FLOOR = 1.0e-3


def default_motors() -> dict:
    """Thumb channel on the larger motor, the other four fingers on the 612."""
    return {0: MOTOR_716, 1: MOTOR_612, 2: MOTOR_612, 3: MOTOR_612, 4: MOTOR_612}


@dataclass(frozen=True)
class SynthConfig:
    rate: float = 2000.0
    f0: float = 90.0
    tau: float = 0.02
    k_amp: float = 2.0
    f_slip: float = 200.0
    k_slip: float = 4.0
    amp_max: float = 0.5
    # when set, slip vibration ignores the slip speed and uses this amplitude
    slip_fixed_amplitude: float | None = None
    # amplitude of the short burst marking a stick-to-slip transition
    onset_amp: float = 0.3
    # slip vibration stops when no SlipVelocity arrives for this long
    slip_hold: float = 0.015
    # pressure steps pass through a cascade of identical first-order
    # low-pass stages so the baseline stays out of the vibration band;
    # None applies them instantly
    pressure_smoothing_hz: float | None = 5.0
    pressure_smoothing_order: int = 4
    sim_rate: float = 100.0
    motors: dict = field(default_factory=default_motors)

    def __post_init__(self):
        if self.rate < 10 * self.sim_rate:
            raise ValueError("synth rate must be at least 10x the simulation rate")
        if not (self.f0 < self.rate / 2 and self.f_slip < self.rate / 2):
            raise ValueError("f0 and f_slip must lie below the Nyquist frequency")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.slip_fixed_amplitude is not None and not 0 <= self.slip_fixed_amplitude <= 1:
            raise ValueError("slip_fixed_amplitude must lie in [0, 1]")
        if self.pressure_smoothing_hz is not None and self.pressure_smoothing_hz <= 0:
            raise ValueError("pressure_smoothing_hz must be positive or None")
        if self.pressure_smoothing_order < 1:
            raise ValueError("pressure_smoothing_order must be at least 1")

    @property
    def smoothing_alpha(self) -> float:
        return 1.0 - math.exp(-2 * math.pi * self.pressure_smoothing_hz / self.rate)


@dataclass(frozen=True)
class Transient:
    start: float
    amplitude: float
    frequency: float


@dataclass(frozen=True)
class ChannelState:
    baseline_target: float = 0.0
    # outputs of the smoothing stages; the last one is the baseline
    baseline_stages: tuple = ()
    transients: tuple = ()
    slip_active: bool = False
    slip_amplitude: float = 0.0
    slip_updated: float = -math.inf

    @property
    def baseline_current(self) -> float:
        return self.baseline_stages[-1] if self.baseline_stages else self.baseline_target


def force_to_current_checked(force: float, motor: MotorModel) -> tuple[float, bool]:
    """Current fraction producing ``force``, plus a saturation flag."""
    if force < 0:
        raise NegativeForce(f"force {force} N is negative")
    if force == 0:
        return 0.0, False
    if force > motor.F_sat:
        return motor.i_sat, True
    return motor.i_dead + force / motor.slope, False


def force_to_current(force: float, motor: MotorModel) -> float:
    return force_to_current_checked(force, motor)[0]


def ingest(event: HapticEvent, state: ChannelState, config: SynthConfig) -> ChannelState:
    if event.channel not in config.motors:
        raise UnknownChannel(f"channel {event.channel} has no motor configured")
    kind = event.kind
    if kind is EventKind.CONTACT_ONSET:
        amp = min(config.k_amp * event.value, 1.0)
        return replace(state, transients=state.transients + (Transient(event.time, amp, config.f0),))
    if kind is EventKind.PRESSURE_UPDATE:
        target = force_to_current(event.value, config.motors[event.channel])
        return replace(state, baseline_target=target)
    if kind is EventKind.SLIP_ONSET:
        burst = Transient(event.time, config.onset_amp, config.f_slip)
        return replace(state, transients=state.transients + (burst,))
    if kind is EventKind.SLIP_VELOCITY:
        if config.slip_fixed_amplitude is not None:
            amp = config.slip_fixed_amplitude
        else:
            amp = min(config.k_slip * event.value, config.amp_max)
        return replace(state, slip_active=True, slip_amplitude=amp, slip_updated=event.time)
    if kind is EventKind.CONTACT_RELEASE:
        return replace(state, baseline_target=0.0, slip_active=False, slip_amplitude=0.0)
    raise ValueError(f"unhandled event kind {kind}")


def _envelope(tr: Transient, t: float, tau: float) -> float:
    return tr.amplitude * math.exp(-(t - tr.start) / tau)


def sample(state: ChannelState, t: float, config: SynthConfig) -> float:
    out = state.baseline_current
    for tr in state.transients:
        dt = t - tr.start
        if dt >= 0:
            out += _envelope(tr, t, config.tau) * math.sin(2 * math.pi * tr.frequency * dt)
    if state.slip_active and t - state.slip_updated < config.slip_hold:
        out += state.slip_amplitude * math.sin(2 * math.pi * config.f_slip * t)
    return min(max(out, 0.0), 1.0)


def advance(state: ChannelState, t: float, config: SynthConfig) -> ChannelState:
    """Move the channel one synth tick forward: smooth the baseline, drop
    expired transients and expire stale slip."""
    stages = state.baseline_stages
    if config.pressure_smoothing_hz is not None:
        alpha = config.smoothing_alpha
        prev = stages or (0.0,) * config.pressure_smoothing_order
        x = state.baseline_target
        new = []
        for y in prev:
            y = y + alpha * (x - y)
            new.append(y)
            x = y
        stages = tuple(new)
    live = tuple(tr for tr in state.transients if t < tr.start or _envelope(tr, t, config.tau) >= ENVELOPE_FLOOR)
    slip = state.slip_active and t - state.slip_updated < config.slip_hold
    return replace(state, baseline_stages=stages, transients=live, slip_active=slip,
                   slip_amplitude=state.slip_amplitude if slip else 0.0)


def event_tick(time: float, rate: float) -> int:
    """First synth tick at or after ``time``."""
    return int(math.ceil(time * rate - 1e-6))


class Synthesizer:
    """Clocked multi-channel synthesiser.

    Events are queued with :meth:`push` and applied in timestamp order when
    the clock reaches them; :meth:`tick` produces one sample per channel.
    """

    def __init__(self, config: SynthConfig = SynthConfig()):
        self.config = config
        self.channels = sorted(config.motors)
        self.states = {ch: ChannelState() for ch in self.channels}
        self.queue: list[HapticEvent] = []
        self.tick_index = 0

    def push(self, events) -> None:
        for e in events:
            if e.channel not in self.config.motors:
                raise UnknownChannel(f"channel {e.channel} has no motor configured")
            self.queue.append(e)
        self.queue.sort(key=lambda e: e.time)

    def tick(self) -> dict:
        """One sample per channel, evaluated tick by tick (reference path)."""
        cfg = self.config
        k = self.tick_index
        t = k / cfg.rate
        self._apply_due(k)
        out = {}
        for ch in self.channels:
            st = advance(self.states[ch], t, cfg)
            self.states[ch] = st
            out[ch] = sample(st, t, cfg)
        self.tick_index += 1
        return out

    def _apply_due(self, k: int) -> None:
        while self.queue and event_tick(self.queue[0].time, self.config.rate) <= k:
            e = self.queue.pop(0)
            self.states[e.channel] = ingest(e, self.states[e.channel], self.config)

    def run(self, n: int) -> dict:
        """Render ``n`` ticks at once. Matches repeated :meth:`tick` to
        rounding error; between queued events every term has a closed form."""
        cfg = self.config
        out = {ch: np.empty(n) for ch in self.channels}
        done = 0
        while done < n:
            k0 = self.tick_index
            self._apply_due(k0)
            seg = n - done
            if self.queue:
                seg = min(seg, max(1, event_tick(self.queue[0].time, cfg.rate) - k0))
            t = (k0 + np.arange(seg)) / cfg.rate
            for ch in self.channels:
                st, values = _render_segment(self.states[ch], t, cfg)
                self.states[ch] = st
                out[ch][done:done + seg] = values
            self.tick_index += seg
            done += seg
        return out


def _render_segment(state: ChannelState, t: np.ndarray, cfg: SynthConfig):
    n = t.size
    stages = state.baseline_stages
    if cfg.pressure_smoothing_hz is None:
        base = np.full(n, state.baseline_target)
    else:
        alpha = cfg.smoothing_alpha
        prev = stages or (0.0,) * cfg.pressure_smoothing_order
        x = np.full(n, state.baseline_target)
        new = []
        for y0 in prev:
            x = lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * y0])[0]
            new.append(float(x[-1]))
        stages = tuple(new)
        base = x
    out = base.copy()
    for tr in state.transients:
        dt = t - tr.start
        env = tr.amplitude * np.exp(-dt / cfg.tau)
        # a transient is dropped for good once its envelope falls below the floor
        live = (dt >= 0) & (env >= ENVELOPE_FLOOR)
        out += np.where(live, env * np.sin(2 * math.pi * tr.frequency * dt), 0.0)
    if state.slip_active:
        on = (t - state.slip_updated) < cfg.slip_hold
        out += np.where(on, state.slip_amplitude * np.sin(2 * math.pi * cfg.f_slip * t), 0.0)
    np.clip(out, 0.0, 1.0, out=out)
    t_end = float(t[-1])
    live = tuple(tr for tr in state.transients if t_end < tr.start or _envelope(tr, t_end, cfg.tau) >= ENVELOPE_FLOOR)
    slip = state.slip_active and t_end - state.slip_updated < cfg.slip_hold
    new = replace(state, baseline_stages=stages, transients=live, slip_active=slip,
                  slip_amplitude=state.slip_amplitude if slip else 0.0)
    return new, out


def render(events, n_ticks: int, config: SynthConfig = SynthConfig()) -> dict:
    """Offline rendering of an event sequence; returns channel -> samples."""
    synth = Synthesizer(config)
    synth.push(events)
    return synth.run(n_ticks)


def format_signal_csv(signals: dict, rate: float) -> str:
    channels = sorted(signals)
    n = len(signals[channels[0]]) if channels else 0
    buf = io.StringIO()
    buf.write(",".join(["t"] + [f"ch{ch}" for ch in channels]) + "\n")
    cols = [signals[ch] for ch in channels]
    for k in range(n):
        buf.write(f"{k / rate:.6f}," + ",".join(f"{c[k]:.9g}" for c in cols) + "\n")
    return buf.getvalue()
