import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtrack.errors import EmptyStream
from evtrack.events import Event, EventStream, SensorGeometry
from evtrack.segmentation import SegmentationPolicy, segment

GEOM = SensorGeometry(128, 128)


def make_stream(n, t_step=100, t0=0):
    events = [Event(t0 + i * t_step, i % 128, (i * 7) % 128, 1 if i % 2 else -1) for i in range(n)]
    return EventStream.from_events(GEOM, events)


def balanced_split_oracle(n, k):
    # first n mod k parts get ceil(n/k), the rest floor(n/k)
    return [(n + k - 1 - i) // k for i in range(k)]


def test_by_count_exact():
    segs = segment(make_stream(10), SegmentationPolicy.by_count(5))
    assert [len(s) for s in segs] == [5, 5]
    assert [s.index for s in segs] == [0, 1]


def test_by_count_drops_remainder():
    segs = segment(make_stream(10), SegmentationPolicy.by_count(4))
    assert [len(s) for s in segs] == [4, 4]


def test_into_k_even():
    segs = segment(make_stream(100), SegmentationPolicy.into_k(4))
    assert [len(s) for s in segs] == [25, 25, 25, 25]


def test_into_k_uneven():
    segs = segment(make_stream(10), SegmentationPolicy.into_k(3))
    sizes = [len(s) for s in segs]
    assert sizes == [4, 3, 3]
    assert sizes == balanced_split_oracle(10, 3)


def test_into_k_underfull_raises():
    with pytest.raises(EmptyStream):
        segment(make_stream(2), SegmentationPolicy.into_k(3))


def test_by_time_windows_and_empties():
    # events at t = 0,100,200,...,900; dt=250 -> windows [0,250) [250,500) ...
    segs = segment(make_stream(10), SegmentationPolicy.by_time(250))
    assert [len(s) for s in segs] == [3, 2, 3, 2]
    assert segs[0].t_start == 0 and segs[0].t_end == 250
    # a hole in time yields an empty segment
    events = [Event(0, 1, 1, 1), Event(600, 2, 2, 1)]
    s = EventStream.from_events(GEOM, events)
    segs = segment(s, SegmentationPolicy.by_time(250))
    assert [len(x) for x in segs] == [1, 0, 1]
    assert segs[1].t_start == 250 and segs[1].t_end == 500


def test_by_time_half_open_boundaries():
    events = [Event(0, 1, 1, 1), Event(250, 2, 2, 1)]
    s = EventStream.from_events(GEOM, events)
    segs = segment(s, SegmentationPolicy.by_time(250))
    assert [len(x) for x in segs] == [1, 1]


def test_segment_t_mid():
    segs = segment(make_stream(10), SegmentationPolicy.by_time(250))
    assert segs[0].t_mid == 125


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.integers(1, 12))
def test_into_k_properties(n, k):
    if n < k:
        with pytest.raises(EmptyStream):
            segment(make_stream(n), SegmentationPolicy.into_k(k))
        return
    segs = segment(make_stream(n), SegmentationPolicy.into_k(k))
    sizes = [len(s) for s in segs]
    assert sizes == balanced_split_oracle(n, k)
    assert sum(sizes) == n
    assert max(sizes) - min(sizes) <= 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 200), st.integers(1, 50))
def test_by_count_conservation_and_order(n, step):
    stream = make_stream(n)
    segs = segment(stream, SegmentationPolicy.by_count(step))
    sizes = [len(s) for s in segs]
    assert all(sz == step for sz in sizes)
    assert sum(sizes) + n % step == n
    # concatenation reproduces a prefix of the stream
    xs = np.concatenate([s.x for s in segs]) if segs else np.array([], dtype=np.int64)
    assert np.array_equal(xs, stream.x[: len(xs)])


def test_policy_parse():
    assert SegmentationPolicy.parse("by_count:500") == SegmentationPolicy.by_count(500)
    assert SegmentationPolicy.parse("by_time:10000") == SegmentationPolicy.by_time(10000)
    assert SegmentationPolicy.parse("into_k:347") == SegmentationPolicy.into_k(347)
    with pytest.raises(ValueError):
        SegmentationPolicy.parse("chunks:5")
    with pytest.raises(ValueError):
        SegmentationPolicy.parse("by_count:0")


def test_policy_validation():
    with pytest.raises(ValueError):
        SegmentationPolicy("by_count", 0)
    with pytest.raises(ValueError):
        SegmentationPolicy("nope", 5)
