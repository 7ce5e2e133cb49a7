import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtrack.events import Event, EventStream, SensorGeometry
from evtrack.ratecode import RateMap, encode, to_input, write_pgm
from evtrack.segmentation import SegmentationPolicy, segment

GEOM = SensorGeometry(128, 128)


def one_segment(events, geom=GEOM):
    stream = EventStream.from_events(geom, sorted(events, key=lambda e: e.t))
    return segment(stream, SegmentationPolicy.into_k(1))[0]


def histogram_oracle(seg, width, height, mode):
    # independent per-event dict accumulation
    counts = {}
    for t, x, y, p in zip(seg.t, seg.x, seg.y, seg.p):
        if mode == "positive_only" and p != 1:
            continue
        counts[(y, x)] = counts.get((y, x), 0) + (p if mode == "signed" else 1)
    grid = np.zeros((height, width), dtype=np.int64)
    for (y, x), c in counts.items():
        grid[y, x] = abs(c) if mode == "signed" else c
    return grid


def test_four_events_one_pixel():
    seg = one_segment([Event(i, 3, 3, 1) for i in range(4)])
    rm = encode(seg, GEOM)
    assert rm.counts[3, 3] == 4
    assert rm.counts.sum() == 4


def test_polarity_mode_semantics():
    seg = one_segment([Event(0, 2, 2, 1), Event(1, 2, 2, -1)])
    assert encode(seg, GEOM, "both").counts[2, 2] == 2
    assert encode(seg, GEOM, "signed").counts[2, 2] == 0
    assert encode(seg, GEOM, "positive_only").counts[2, 2] == 1


def test_unknown_mode_rejected():
    seg = one_segment([Event(0, 2, 2, 1)])
    with pytest.raises(ValueError):
        encode(seg, GEOM, "negated")


def test_random_segment_matches_histogram_oracle():
    rng = np.random.default_rng(7)
    events = [
        Event(int(t), int(rng.integers(0, 128)), int(rng.integers(0, 128)),
              int(rng.choice([-1, 1])))
        for t in range(1000)
    ]
    seg = one_segment(events)
    for mode in ("both", "positive_only", "signed"):
        rm = encode(seg, GEOM, mode)
        assert np.array_equal(rm.counts, histogram_oracle(seg, 128, 128, mode)), mode


def test_empty_segment_all_zero():
    stream = EventStream.from_events(GEOM, [Event(0, 1, 1, 1), Event(600, 2, 2, 1)])
    empty = segment(stream, SegmentationPolicy.by_time(250))[1]
    assert len(empty) == 0
    assert encode(empty, GEOM).counts.sum() == 0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 127), st.integers(0, 127),
                          st.sampled_from([-1, 1])), min_size=1, max_size=60),
       st.randoms(use_true_random=False))
def test_permutation_invariance(raw, shuffler):
    events = [Event(i, x, y, p) for i, (x, y, p) in enumerate(raw)]
    base = encode(one_segment(events), GEOM).counts
    shuffled = list(events)
    shuffler.shuffle(shuffled)
    shuffled = [Event(i, e.x, e.y, e.p) for i, e in enumerate(shuffled)]
    assert np.array_equal(encode(one_segment(shuffled), GEOM).counts, base)


def test_mass_conservation_mode_both():
    rng = np.random.default_rng(1)
    events = [Event(i, int(rng.integers(0, 128)), int(rng.integers(0, 128)), 1)
              for i in range(500)]
    rm = encode(one_segment(events), GEOM)
    assert rm.counts.sum() == 500


def test_to_input_all_zero():
    rm = RateMap(GEOM, np.zeros((128, 128), dtype=np.int64))
    x = to_input(rm, means=(10.0, 20.0, 30.0))
    assert x.shape == (128, 128, 3)
    assert np.allclose(x[:, :, 0], -10.0)
    assert np.allclose(x[:, :, 1], -20.0)
    assert np.allclose(x[:, :, 2], -30.0)


def test_to_input_max_normalization():
    counts = np.zeros((8, 8), dtype=np.int64)
    counts[3, 4] = 5
    x = to_input(RateMap(SensorGeometry(8, 8), counts))
    assert x[3, 4, 0] == x[3, 4, 1] == x[3, 4, 2] == 255.0
    assert x.max() == 255.0 and x.min() == 0.0


def test_to_input_channels_identical_before_means():
    rng = np.random.default_rng(2)
    counts = rng.integers(0, 50, (16, 16))
    x = to_input(RateMap(SensorGeometry(16, 16), counts))
    assert np.array_equal(x[:, :, 0], x[:, :, 1])
    assert np.array_equal(x[:, :, 0], x[:, :, 2])


def test_to_input_scale_bound():
    rng = np.random.default_rng(3)
    counts = rng.integers(0, 1000, (16, 16))
    means = (11.0, 7.0, 120.0)
    x = to_input(RateMap(SensorGeometry(16, 16), counts), means)
    assert x.min() >= -max(means)
    assert x.max() <= 255.0


def test_crop_interior_and_padding():
    counts = np.arange(64).reshape(8, 8)
    rm = RateMap(SensorGeometry(8, 8), counts)
    inner = rm.crop(4, 4, 4, 4)
    assert np.array_equal(inner, counts[2:6, 2:6])
    corner = rm.crop(0, 0, 4, 4)
    assert corner[:2].sum() == 0 and corner[:, :2].sum() == 0
    assert np.array_equal(corner[2:, 2:], counts[:2, :2])
    off = rm.crop(-10, -10, 4, 4)
    assert off.sum() == 0


def test_pgm_dump():
    counts = np.zeros((4, 6), dtype=np.int64)
    counts[1, 2] = 300  # clamps to 255
    counts[2, 3] = 7
    buf = io.StringIO()
    write_pgm(RateMap(SensorGeometry(6, 4), counts), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "P2"
    assert lines[1] == "6 4"
    assert lines[2] == "255"
    grid = [int(v) for row in lines[3:] for v in row.split()]
    assert max(grid) == 255 and grid.count(7) == 1
