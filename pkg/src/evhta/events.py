"""Event containers, sensor geometry, and fixed-duration windowing.

Events are column-sparse sensor samples ``(x, y, t, p)`` with microsecond
integer timestamps and polarity +1/-1. Bulk data lives in an
:class:`EventArray` (structure-of-arrays) so the hot accumulation kernels
can consume contiguous buffers; the scalar :class:`Event` tuple is the
convenience view used at API edges and in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ParseError


class Event(NamedTuple):
    x: int
    y: int
    t: int
    p: int


@dataclass(frozen=True)
class SensorGeometry:
    """Pixel dimensions of the sensor array."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"geometry must be >= 1x1, got {self.width}x{self.height}")
        if self.width > 0xFFFF or self.height > 0xFFFF:
            raise ValueError("geometry exceeds the 16-bit coordinate range")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class WindowSpec:
    """Half-open temporal window [start_us, start_us + duration_us)."""

    index: int
    start_us: int
    duration_us: int

    def __post_init__(self):
        if self.duration_us <= 0:
            raise ValueError("window duration must be positive")
        if self.index < 0:
            raise ValueError("window index must be non-negative")

    @property
    def end_us(self) -> int:
        return self.start_us + self.duration_us

    def contains(self, t_us: int) -> bool:
        return self.start_us <= t_us < self.end_us


@dataclass
class EventArray:
    """Structure-of-arrays event storage.

    Field dtypes are fixed (t: u64, x: u16, y: u16, p: i8); slicing
    produces views, so per-window slices are free.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("field arrays must share one length")

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))

    @classmethod
    def empty(cls) -> "EventArray":
        return cls(
            t=np.empty(0, np.uint64),
            x=np.empty(0, np.uint16),
            y=np.empty(0, np.uint16),
            p=np.empty(0, np.int8),
        )

    @classmethod
    def from_arrays(cls, t, x, y, p) -> "EventArray":
        return cls(
            t=np.ascontiguousarray(t, np.uint64),
            x=np.ascontiguousarray(x, np.uint16),
            y=np.ascontiguousarray(y, np.uint16),
            p=np.ascontiguousarray(p, np.int8),
        )

    @classmethod
    def from_events(cls, events: Sequence[Event]) -> "EventArray":
        if not events:
            return cls.empty()
        return cls.from_arrays(
            [e.t for e in events], [e.x for e in events],
            [e.y for e in events], [e.p for e in events],
        )

    def slice(self, lo: int, hi: int) -> "EventArray":
        return EventArray(self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.p[lo:hi])

    def is_sorted(self) -> bool:
        return bool(len(self) < 2 or np.all(self.t[1:] >= self.t[:-1]))

    def stable_sorted(self) -> "EventArray":
        """Stable sort by timestamp; preserves arrival order among ties."""
        order = np.argsort(self.t, kind="stable")
        return EventArray(self.t[order], self.x[order], self.y[order], self.p[order])

    def check_bounds(self, geometry: SensorGeometry) -> None:
        """Raise ParseError on the first out-of-bounds coordinate."""
        bad = (self.x >= geometry.width) | (self.y >= geometry.height)
        if bad.any():
            i = int(np.argmax(bad))
            raise ParseError(
                f"event {i}: coordinate ({int(self.x[i])},{int(self.y[i])}) outside "
                f"{geometry.width}x{geometry.height}"
            )


def default_origin(first_t_us: int, dt_us: int) -> int:
    """Window origin used when none is given: first timestamp rounded down
    to a dt multiple, so alignment does not depend on the recording offset."""
    return (int(first_t_us) // int(dt_us)) * int(dt_us)


def window_iter(
    events: EventArray,
    dt_us: int,
    t0_us: int | None = None,
    first_index: int = 0,
) -> Iterator[tuple[WindowSpec, EventArray]]:
    """Partition a time-sorted event array into contiguous half-open windows.

    Event e belongs to window k iff t0 + k*dt <= e.t < t0 + (k+1)*dt.
    Empty windows between occupied ones are emitted (state decay depends on
    them); iteration stops after the window holding the last event.
    ``first_index`` starts emission at a later window (resumed encoding);
    events earlier than that window are an error.
    """
    if dt_us <= 0:
        raise ValueError("dt_us must be positive")
    if first_index < 0:
        raise ValueError("first_index must be non-negative")
    if len(events) == 0:
        return
    if not events.is_sorted():
        raise ValueError("events must be sorted by timestamp")
    if t0_us is None:
        t0_us = default_origin(int(events.t[0]), dt_us)
    if int(events.t[0]) < t0_us + first_index * dt_us:
        raise ValueError(
            f"window {first_index} starts at {t0_us + first_index * dt_us} us, "
            f"after the first event at {int(events.t[0])} us"
        )

    last_t = int(events.t[-1])
    k_max = (last_t - t0_us) // dt_us
    # searchsorted over all boundaries at once; slices are views
    ks = np.arange(first_index, k_max + 2, dtype=np.uint64)
    cuts = np.searchsorted(events.t, np.uint64(t0_us) + np.uint64(dt_us) * ks,
                           side="left")
    for j, k in enumerate(range(first_index, k_max + 1)):
        spec = WindowSpec(index=k, start_us=t0_us + k * dt_us, duration_us=dt_us)
        yield spec, events.slice(int(cuts[j]), int(cuts[j + 1]))
