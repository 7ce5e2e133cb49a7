"""Hard events segmentation: fixed count, fixed time slice, or fixed k.

Segments are contiguous, ordered, and jointly cover the processed prefix
of the stream. ``by_count`` drops the trailing remainder (a short segment
would bias the rate maps); ``by_time`` emits empty segments so the time
axis is preserved; ``into_k`` balances event counts to within one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyStream
from .events import EventStream

MODES = ("by_count", "by_time", "into_k")


@dataclass(frozen=True)
class SegmentationPolicy:
    mode: str
    value: int  # n_events, dt in us, or k depending on mode

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.value < 1:
            raise ValueError(f"{self.mode} parameter must be >= 1, got {self.value}")

    @classmethod
    def by_count(cls, n_events: int) -> "SegmentationPolicy":
        return cls("by_count", n_events)

    @classmethod
    def by_time(cls, dt_us: int) -> "SegmentationPolicy":
        return cls("by_time", dt_us)

    @classmethod
    def into_k(cls, k: int) -> "SegmentationPolicy":
        return cls("into_k", k)

    @classmethod
    def parse(cls, text: str) -> "SegmentationPolicy":
        """Parse the CLI form ``mode:value``, e.g. ``into_k:347``."""
        mode, sep, value = text.partition(":")
        if not sep:
            raise ValueError(f"expected 'mode:value', got {text!r}")
        return cls(mode, int(value))


@dataclass(frozen=True)
class EventSegment:
    """Contiguous slice of a stream treated as one frame.

    t_start/t_end are the slice's window bounds: the time-slice bounds for
    by_time, the first/last event timestamps otherwise.
    """

    index: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    t_start: int
    t_end: int

    def __len__(self) -> int:
        return len(self.t)

    @property
    def t_mid(self) -> int:
        return (self.t_start + self.t_end) // 2


def _slice(stream: EventStream, index: int, lo: int, hi: int) -> EventSegment:
    t = stream.t[lo:hi]
    return EventSegment(
        index,
        t,
        stream.x[lo:hi],
        stream.y[lo:hi],
        stream.p[lo:hi],
        int(t[0]) if len(t) else 0,
        int(t[-1]) if len(t) else 0,
    )


def segment(stream: EventStream, policy: SegmentationPolicy) -> list[EventSegment]:
    n = len(stream)
    if policy.mode == "by_count":
        step = policy.value
        return [_slice(stream, i, i * step, (i + 1) * step) for i in range(n // step)]

    if policy.mode == "into_k":
        k = policy.value
        if n < k:
            raise EmptyStream(f"cannot split {n} events into {k} segments")
        base, extra = divmod(n, k)
        out = []
        lo = 0
        for i in range(k):
            hi = lo + base + (1 if i < extra else 0)
            out.append(_slice(stream, i, lo, hi))
            lo = hi
        return out

    # by_time: segment i covers [t0 + i*dt, t0 + (i+1)*dt)
    if n == 0:
        return []
    dt = policy.value
    t0 = int(stream.t[0])
    n_segments = int((int(stream.t[-1]) - t0) // dt) + 1
    bounds = t0 + dt * np.arange(n_segments + 1, dtype=np.int64)
    idx = np.searchsorted(stream.t, bounds, side="left")
    out = []
    for i in range(n_segments):
        lo, hi = int(idx[i]), int(idx[i + 1])
        seg = EventSegment(
            i,
            stream.t[lo:hi],
            stream.x[lo:hi],
            stream.y[lo:hi],
            stream.p[lo:hi],
            int(bounds[i]),
            int(bounds[i + 1]),
        )
        out.append(seg)
    return out
