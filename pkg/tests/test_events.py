import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evhta.events import (
    Event,
    EventArray,
    SensorGeometry,
    WindowSpec,
    default_origin,
    window_iter,
)


def make_events(ts, geometry=None):
    n = len(ts)
    return EventArray.from_arrays(ts, [0] * n, [0] * n, [1] * n)


class TestTypes:
    def test_geometry_rejects_degenerate(self):
        with pytest.raises(ValueError):
            SensorGeometry(width=0, height=5)
        with pytest.raises(ValueError):
            SensorGeometry(width=5, height=0)

    def test_window_contains_half_open(self):
        w = WindowSpec(index=0, start_us=1000, duration_us=500)
        assert w.contains(1000)
        assert w.contains(1499)
        assert not w.contains(1500)
        assert not w.contains(999)

    def test_event_array_roundtrip(self):
        events = [Event(3, 4, 1000, 1), Event(7, 2, 2000, -1)]
        arr = EventArray.from_events(events)
        assert list(arr) == events

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            EventArray(np.zeros(2, np.uint64), np.zeros(1, np.uint16),
                       np.zeros(2, np.uint16), np.zeros(2, np.int8))


class TestWindowIter:
    def test_half_open_boundary(self):
        # events at 0, 49_999, 50_000: boundary event starts window 1
        arr = make_events([0, 49_999, 50_000])
        windows = list(window_iter(arr, 50_000))
        assert len(windows) == 2
        assert len(windows[0][1]) == 2
        assert len(windows[1][1]) == 1

    def test_gap_windows_emitted_empty(self):
        arr = make_events([10, 120_000])
        windows = list(window_iter(arr, 50_000))
        assert [w.index for w, _ in windows] == [0, 1, 2]
        assert [len(ev) for _, ev in windows] == [1, 0, 1]

    def test_single_event_single_window(self):
        windows = list(window_iter(make_events([0]), 50_000))
        assert len(windows) == 1

    def test_empty_stream_no_windows(self):
        assert list(window_iter(EventArray.empty(), 50_000)) == []

    def test_origin_rounds_down_to_dt_multiple(self):
        assert default_origin(123_456, 50_000) == 100_000
        arr = make_events([123_456])
        (spec, chunk), = window_iter(arr, 50_000)
        assert spec.start_us == 100_000 and spec.index == 0

    def test_explicit_origin(self):
        arr = make_events([60_000])
        windows = list(window_iter(arr, 50_000, t0_us=0))
        assert [w.index for w, _ in windows] == [0, 1]

    def test_origin_after_first_event_rejected(self):
        with pytest.raises(ValueError):
            list(window_iter(make_events([10]), 50_000, t0_us=50_000))

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            list(window_iter(make_events([100, 50]), 50_000))

    def test_first_index_resume(self):
        arr = make_events([100_000, 160_000])
        windows = list(window_iter(arr, 50_000, t0_us=0, first_index=2))
        assert [w.index for w, _ in windows] == [2, 3]
        assert [len(ev) for _, ev in windows] == [1, 1]
        with pytest.raises(ValueError):
            list(window_iter(arr, 50_000, t0_us=0, first_index=3))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=400_000), min_size=1,
                max_size=300),
       st.integers(min_value=1, max_value=120_000))
def test_partition_property(ts, dt):
    """Every event lands in exactly one window; indices are gap-free from 0."""
    ts = sorted(ts)
    arr = make_events(ts)
    windows = list(window_iter(arr, dt))
    indices = [w.index for w, _ in windows]
    assert indices == list(range(len(indices)))
    recovered = np.concatenate([chunk.t for _, chunk in windows])
    assert len(recovered) == len(ts)
    assert np.array_equal(recovered, arr.t)
    for spec, chunk in windows:
        for t in chunk.t:
            assert spec.contains(int(t))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=10_000), min_size=2,
                max_size=50))
def test_stable_sort_preserves_tie_order(ts):
    n = len(ts)
    arr = EventArray.from_arrays(ts, np.arange(n) % 7, np.zeros(n), np.ones(n))
    out = arr.stable_sorted()
    assert out.is_sorted()
    # stable: among equal timestamps, original x order (arrival order) kept
    for t in set(ts):
        mask_in = np.asarray(ts) == t
        assert np.array_equal(out.x[out.t == t], arr.x[mask_in])
