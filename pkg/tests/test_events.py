import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtrack.errors import MalformedLine, NonMonotonicTime, OutOfBounds, IndexMismatch
from evtrack.events import (
    DVS128,
    Event,
    EventStream,
    GroundTruthEntry,
    SensorGeometry,
    parse_events,
    parse_ground_truth,
    write_events,
    write_ground_truth,
)

GEOM = SensorGeometry(128, 128)


def roundtrip(stream):
    buf = io.StringIO()
    write_events(stream, buf)
    return parse_events(buf.getvalue().encode(), stream.geometry)


def test_parse_single_line():
    text = b"# evtrack-events v1 width=128 height=128\n1000,5,7,1\n"
    s = parse_events(text, GEOM)
    assert len(s) == 1
    assert s[0] == Event(1000, 5, 7, 1)


def test_parse_empty_input():
    assert len(parse_events(b"", GEOM)) == 0


def test_parse_header_only():
    s = parse_events(b"# evtrack-events v1 width=128 height=128\n")
    assert len(s) == 0
    assert s.geometry == GEOM


def test_parse_out_of_bounds():
    text = b"# evtrack-events v1 width=128 height=128\n10,200,5,1\n"
    with pytest.raises(OutOfBounds) as exc:
        parse_events(text, GEOM)
    assert "line 2" in str(exc.value)


def test_parse_non_monotonic():
    text = b"# evtrack-events v1 width=128 height=128\n100,5,5,1\n90,6,6,-1\n"
    with pytest.raises(NonMonotonicTime) as exc:
        parse_events(text)
    assert "line 3" in str(exc.value)


def test_parse_malformed_field_count():
    text = b"# evtrack-events v1 width=128 height=128\n100,5,5\n"
    with pytest.raises(MalformedLine) as exc:
        parse_events(text)
    assert "line 2" in str(exc.value)


def test_parse_bad_polarity():
    text = b"# evtrack-events v1 width=128 height=128\n100,5,5,2\n"
    with pytest.raises(MalformedLine):
        parse_events(text)


def test_parse_geometry_mismatch():
    text = b"# evtrack-events v1 width=64 height=64\n"
    with pytest.raises(MalformedLine):
        parse_events(text, GEOM)


def test_write_empty_stream_header_only():
    buf = io.StringIO()
    write_events(EventStream.from_events(GEOM, []), buf)
    assert buf.getvalue() == "# evtrack-events v1 width=128 height=128\n"


def test_three_event_roundtrip_bit_exact():
    events = [Event(0, 1, 2, 1), Event(5, 3, 4, -1), Event(5, 3, 4, 1)]
    s = EventStream.from_events(GEOM, events)
    buf = io.StringIO()
    write_events(s, buf)
    first = buf.getvalue()
    buf2 = io.StringIO()
    write_events(parse_events(first.encode()), buf2)
    assert buf2.getvalue() == first
    assert roundtrip(s) == s


def test_large_synthetic_roundtrip():
    # 1e5 events, uniformly random positions, sorted timestamps
    rng = np.random.default_rng(0)
    n = 100_000
    t = np.sort(rng.integers(0, 10_000_000, n))
    x = rng.integers(0, 128, n)
    y = rng.integers(0, 128, n)
    p = rng.choice([-1, 1], n)
    s = EventStream(GEOM, t, x, y, p)
    assert roundtrip(s) == s


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 127),
                          st.integers(0, 127), st.sampled_from([-1, 1])), max_size=40))
def test_roundtrip_property(raw):
    raw.sort(key=lambda e: e[0])
    s = EventStream.from_events(GEOM, [Event(*e) for e in raw])
    assert roundtrip(s) == s


def test_stream_rejects_decreasing_time():
    with pytest.raises(NonMonotonicTime):
        EventStream.from_events(GEOM, [Event(5, 0, 0, 1), Event(4, 0, 0, 1)])


def test_stream_rejects_out_of_bounds():
    with pytest.raises(OutOfBounds):
        EventStream.from_events(GEOM, [Event(0, 128, 0, 1)])


def test_geometry_constants():
    assert (DVS128.width, DVS128.height) == (128, 128)
    assert GEOM.contains(0, 0) and GEOM.contains(127, 127)
    assert not GEOM.contains(-1, 0) and not GEOM.contains(0, 128)


def test_ground_truth_roundtrip():
    entries = [GroundTruthEntry(0, (10, 20, 12, 12)), GroundTruthEntry(1, (11, 20, 12, 12))]
    buf = io.StringIO()
    write_ground_truth(entries, buf, occluded=[1])
    text = buf.getvalue()
    parsed, occ = parse_ground_truth(text.encode())
    assert parsed == entries
    assert occ == [1]
    buf2 = io.StringIO()
    write_ground_truth(parsed, buf2, occluded=occ)
    assert buf2.getvalue() == text


def test_ground_truth_center():
    assert GroundTruthEntry(0, (10, 20, 13, 12)).center() == (16.5, 26.0)


def test_ground_truth_index_gap_rejected():
    text = b"# evtrack-gt v1\n0,1,1,4,4\n2,1,1,4,4\n"
    with pytest.raises(IndexMismatch):
        parse_ground_truth(text)


def test_ground_truth_bad_header():
    with pytest.raises(MalformedLine) as exc:
        parse_ground_truth(b"segment,x\n")
    assert "line 1" in str(exc.value)
