import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapticsim.errors import ParseError
from hapticsim.events import (
    Condition,
    EventKind,
    FingerContactHistory,
    HapticEvent,
    condition_mask,
    extract_events,
    format_event_log,
    parse_event_log,
)
from hapticsim.hand import FingertipSummary
from hapticsim.physics import FrictionState

FREE = FingertipSummary()


def touching(force, state=FrictionState.STATIC, slip=0.0, approach=0.0):
    return FingertipSummary(True, force, state, slip, approach, force)


def run(sequence, finger="Index"):
    history = FingerContactHistory.for_fingers([finger])
    out = []
    for k, summary in enumerate(sequence):
        events, history = extract_events(history, {finger: summary}, 0.01 * (k + 1))
        out.append(events)
    return out


def kinds(events):
    return [e.kind for e in events]


# --- examples -------------------------------------------------------------------


def test_first_touch():
    (_, events) = run([FREE, touching(0.8, approach=0.2)])
    assert kinds(events) == [EventKind.CONTACT_ONSET, EventKind.PRESSURE_UPDATE]
    assert events[0].value == pytest.approx(0.2)
    assert events[1].value == pytest.approx(0.8)
    assert {e.channel for e in events} == {1}


def test_static_to_dynamic():
    (_, events) = run([touching(1.0), touching(1.0, FrictionState.DYNAMIC, slip=0.05)])
    assert kinds(events) == [EventKind.SLIP_ONSET, EventKind.SLIP_VELOCITY]
    assert events[1].value == pytest.approx(0.05)


def test_sustained_slip_reports_velocity_only():
    dyn = touching(1.0, FrictionState.DYNAMIC, slip=0.05)
    (_, _, events) = run([touching(1.0), dyn, dyn])
    assert kinds(events) == [EventKind.SLIP_VELOCITY]


def test_tiny_pressure_change_is_suppressed():
    (_, events) = run([touching(0.300), touching(0.3001)])
    assert events == []


def test_release_zeroes_pressure():
    (_, events) = run([touching(0.5), FREE])
    assert kinds(events) == [EventKind.CONTACT_RELEASE, EventKind.PRESSURE_UPDATE]
    assert events[1].value == 0.0


def test_masks():
    events = [HapticEvent(0.0, 0, k, 0.1) for k in EventKind]
    assert condition_mask(events, Condition.NO_HAPTIC) == []
    assert kinds(condition_mask(events, "PressureOnly")) == [EventKind.PRESSURE_UPDATE]
    assert set(kinds(condition_mask(events, Condition.CONTACT_VIBRATION_ONLY))) == {
        EventKind.CONTACT_ONSET,
        EventKind.CONTACT_RELEASE,
    }
    assert condition_mask(events, Condition.PRESSURE_AND_VIBRATION) == events


def test_unknown_condition():
    with pytest.raises(ValueError):
        condition_mask([], "Loud")


@pytest.mark.parametrize("channel,value", [(9, 0.0), (-1, 0.0), (0, -0.1)])
def test_invalid_events(channel, value):
    with pytest.raises(ValueError):
        HapticEvent(0.0, channel, EventKind.PRESSURE_UPDATE, value)


# --- properties -----------------------------------------------------------------

summaries = st.one_of(
    st.just(FREE),
    st.builds(
        touching,
        st.floats(1e-4, 20.0),
        st.sampled_from([FrictionState.STATIC, FrictionState.DYNAMIC]),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
    ),
)
sequences = st.lists(summaries, max_size=60)
event_lists = st.lists(
    st.builds(HapticEvent, st.floats(0.0, 10.0), st.integers(0, 8), st.sampled_from(list(EventKind)), st.floats(0.0, 5.0)),
    max_size=30,
)


@given(event_lists, st.sampled_from(list(Condition)))
def test_masking_is_idempotent(events, condition):
    once = condition_mask(events, condition)
    assert condition_mask(once, condition) == once


@given(sequences)
def test_onset_and_release_alternate(seq):
    in_contact = False
    for events in run(seq):
        for e in events:
            if e.kind is EventKind.CONTACT_ONSET:
                assert not in_contact
                in_contact = True
            elif e.kind is EventKind.CONTACT_RELEASE:
                assert in_contact
                in_contact = False
            elif e.kind in (EventKind.SLIP_ONSET, EventKind.SLIP_VELOCITY):
                assert in_contact


@given(sequences)
def test_pressure_updates_track_the_force(seq):
    sent = 0.0
    for summary, events in zip(seq, run(seq)):
        for e in events:
            if e.kind is EventKind.PRESSURE_UPDATE:
                sent = e.value
        force = summary.total_normal_force if summary.in_contact else 0.0
        assert abs(sent - force) <= 1e-3


@given(st.lists(st.just(FREE), max_size=20))
def test_free_finger_is_silent(seq):
    assert all(events == [] for events in run(seq))


# --- event log ------------------------------------------------------------------


@given(event_lists)
def test_event_log_round_trip(events):
    back = parse_event_log(format_event_log(events))
    assert len(back) == len(events)
    for a, b in zip(events, back):
        assert (a.channel, a.kind) == (b.channel, b.kind)
        assert b.time == pytest.approx(a.time, abs=1e-6)
        assert b.value == pytest.approx(a.value, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize(
    "text",
    ["", "when,where\n", "time,channel,kind,payload\n0.1,0,Boom,0\n", "time,channel,kind,payload\n0.1,12,SlipOnset,0\n"],
)
def test_bad_event_logs(text):
    with pytest.raises(ParseError):
        parse_event_log(text)
