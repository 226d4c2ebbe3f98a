import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hapticsim.errors import (
    BadCrc,
    BadSync,
    ChannelOutOfRange,
    DuplicateChannel,
    LinkError,
    TruncatedFrame,
)
from hapticsim.link import (
    FULL_SCALE,
    Capture,
    ChannelShadow,
    GapWarning,
    StreamEncoder,
    build_frame,
    crc8,
    decode_frame,
    decode_stream,
    dequantize,
    encode_frame,
    quantize,
    reconstruct,
    reconstruct_capture,
)

WORKED = bytes.fromhex("A5 00 01 02 7F FF 52")


def test_crc_check_value():
    # catalogue check value of CRC-8/ATM
    assert crc8(b"123456789") == 0xF4


def test_worked_example():
    frame, shadow = encode_frame({2: 0.5}, ChannelShadow())
    assert frame == WORKED
    assert shadow.seq == 1
    assert decode_frame(WORKED).raw == {2: 0x7FFF}


def test_heartbeat_layout():
    frame = build_frame(7, [])
    assert frame[:3] == bytes([0xA5, 7, 0])
    assert len(frame) == 4
    assert decode_frame(frame).is_heartbeat


def test_quantize_rounding():
    assert quantize(0.0) == 0
    assert quantize(1.0) == FULL_SCALE
    assert quantize(0.5) == 32767
    with pytest.raises(LinkError):
        quantize(1.5)


@given(st.floats(0.0, 1.0))
def test_quantisation_error_is_half_a_step(x):
    assert abs(dequantize(quantize(x)) - x) <= 0.5 / FULL_SCALE + 1e-15


def test_channel_limits():
    with pytest.raises(ChannelOutOfRange):
        encode_frame({ch: 0.1 for ch in range(10)}, ChannelShadow())
    with pytest.raises(ChannelOutOfRange):
        encode_frame({9: 0.1}, ChannelShadow())


updates = st.dictionaries(st.integers(0, 8), st.floats(0.0, 1.0), max_size=9)


@given(updates, st.integers(0, 255))
def test_encode_decode_round_trip(values, seq):
    frame, _ = encode_frame(values, ChannelShadow(seq=seq))
    decoded = decode_frame(frame)
    assert decoded.seq == seq
    assert decoded.raw == {ch: quantize(v) for ch, v in values.items()}


@given(updates.filter(bool), st.data())
@settings(max_examples=200)
def test_any_single_bit_flip_is_caught(values, data):
    frame = bytearray(encode_frame(values, ChannelShadow())[0])
    bit = data.draw(st.integers(0, 8 * len(frame) - 1))
    frame[bit // 8] ^= 1 << (bit % 8)
    with pytest.raises(LinkError):
        decode_frame(bytes(frame))


def test_corrupt_crc():
    bad = WORKED[:-1] + bytes([WORKED[-1] ^ 0x01])
    with pytest.raises(BadCrc):
        decode_frame(bad)


def test_truncated_and_duplicate():
    with pytest.raises(TruncatedFrame):
        decode_frame(WORKED[:-2])
    with pytest.raises(DuplicateChannel):
        decode_frame(build_frame(0, [(1, 5), (1, 6)]))


def test_resync_after_garbage():
    items = decode_stream(b"\x01\x02\x03" + WORKED)
    assert isinstance(items[0], BadSync)
    assert items[1].raw == {2: 0x7FFF}


def test_stream_of_frames():
    a = build_frame(0, [(0, 100)])
    b = build_frame(1, [])
    items = decode_stream(a + b)
    assert [i.seq for i in items] == [0, 1]


# --- delta coding ---------------------------------------------------------------


def test_unchanged_channels_are_not_resent():
    shadow = ChannelShadow()
    first, shadow = encode_frame({0: 0.3, 1: 0.4}, shadow)
    second, shadow = encode_frame({0: 0.3, 1: 0.5}, shadow)
    assert decode_frame(first).raw.keys() == {0, 1}
    assert decode_frame(second).raw.keys() == {1}


def test_threshold_suppresses_small_changes():
    shadow = ChannelShadow(threshold=3)
    _, shadow = encode_frame({0: 0.3}, shadow)
    frame, shadow = encode_frame({0: 0.3 + 2 / FULL_SCALE}, shadow)
    assert decode_frame(frame).is_heartbeat


def test_quiet_link_sends_only_heartbeats():
    enc = StreamEncoder()
    frames = [enc.tick({0: 0.2}) for _ in range(2000)]
    sent = [f for f in frames if f]
    # the initial value, then a heartbeat every 200 ticks (ticks 200..1800)
    assert len(sent) == 1 + 9
    assert all(decode_frame(f).is_heartbeat for f in sent[1:])


def test_single_update_gives_a_staircase():
    frame = decode_frame(build_frame(0, [(0, quantize(0.25))]))
    rec = reconstruct([(3, frame)], 6, channels=[0])
    np.testing.assert_allclose(rec.values[0], [0, 0, 0, 0.25, 0.25, 0.25], atol=1e-4)


def test_sequence_gap_is_reported():
    frames = [(0, decode_frame(build_frame(5, []))), (1, decode_frame(build_frame(7, [])))]
    assert reconstruct(frames, 2).gaps == [GapWarning(6, 1)]


def test_sequence_wraps_without_gap():
    frames = [(0, decode_frame(build_frame(255, []))), (1, decode_frame(build_frame(0, [])))]
    assert reconstruct(frames, 2).gaps == []


@given(
    st.lists(st.floats(0.0, 1.0), min_size=1, max_size=300),
    st.integers(0, 50),
)
@settings(max_examples=60)
def test_reconstruction_tracks_the_signal(trace, threshold):
    enc = StreamEncoder(shadow=ChannelShadow(threshold=threshold))
    records = []
    for k, x in enumerate(trace):
        frame = enc.tick({0: x})
        if frame:
            records.append((k, frame))
    rec = reconstruct_capture(Capture(2000.0, len(trace), records), channels=[0])
    bound = (threshold + 0.5) / FULL_SCALE + 1e-12
    assert np.all(np.abs(rec.values[0] - np.asarray(trace)) <= bound)
    assert rec.gaps == [] and rec.errors == []


# --- captures -------------------------------------------------------------------


def test_capture_round_trip(tmp_path):
    cap = Capture(2000.0, 10, [(0, WORKED), (4, build_frame(1, []))])
    path = tmp_path / "frames.cap"
    cap.write(path)
    again = Capture.read(path)
    assert (again.rate, again.n_ticks, again.records) == (cap.rate, cap.n_ticks, cap.records)


def test_capture_format_errors():
    with pytest.raises(LinkError):
        Capture.from_bytes(b"NOTCAP")
    data = Capture(2000.0, 10, [(0, WORKED)]).to_bytes()
    with pytest.raises(TruncatedFrame):
        Capture.from_bytes(data[:-3])


def test_strict_capture_raises_first_error():
    cap = Capture(2000.0, 4, [(0, WORKED[:-1] + b"\x00")])
    with pytest.raises(BadCrc):
        reconstruct_capture(cap, strict=True)
    rec = reconstruct_capture(cap)
    assert isinstance(rec.errors[0][1], BadCrc)
