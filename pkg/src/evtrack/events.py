"""Event data model and text file I/O.

Events are stored column-wise in numpy arrays for fast segmentation and
rate coding; ``Event`` is the per-element view used at API boundaries.

File formats (UTF-8, LF line endings):

* Event file: header ``# evtrack-events v1 width=<W> height=<H>`` followed
  by one ``t,x,y,p`` line per event with ``p`` in ``{1,-1}``.
* Ground-truth file: header ``# evtrack-gt v1``, an optional
  ``# occluded i,j,...`` line, then ``segment,x,y,w,h`` lines (top-left
  convention) with consecutive segment indices from 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import IndexMismatch, MalformedLine, NonMonotonicTime, OutOfBounds

EVENTS_MAGIC = "# evtrack-events v1"
GT_MAGIC = "# evtrack-gt v1"


class Event(NamedTuple):
    """One sensor event: timestamp (µs), pixel position, polarity ±1."""

    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class SensorGeometry:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"invalid sensor geometry {self.width}x{self.height}")

    def contains(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


DVS128 = SensorGeometry(128, 128)
DAVIS240 = SensorGeometry(240, 180)


@dataclass(frozen=True)
class EventStream:
    """Time-ordered event sequence bound to a sensor geometry.

    ``t, x, y, p`` are parallel int64 arrays; timestamps are non-decreasing
    (validated on construction).
    """

    geometry: SensorGeometry
    t: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    x: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    y: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    p: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event columns have differing lengths")
        if n:
            if self.t[0] < 0 or np.any(np.diff(self.t) < 0):
                raise NonMonotonicTime("timestamps must be non-negative and non-decreasing")
            if np.any((self.x < 0) | (self.x >= self.geometry.width)):
                raise OutOfBounds("x outside sensor geometry")
            if np.any((self.y < 0) | (self.y >= self.geometry.height)):
                raise OutOfBounds("y outside sensor geometry")
            if not np.all(np.abs(self.p) == 1):
                raise ValueError("polarity must be +1 or -1")

    @classmethod
    def from_events(cls, geometry: SensorGeometry, events: Sequence[Event]) -> "EventStream":
        if not events:
            return cls(geometry)
        arr = np.asarray(events, dtype=np.int64).reshape(-1, 4)
        return cls(geometry, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy())

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and len(self) == len(other)
            and bool(
                np.array_equal(self.t, other.t)
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.p, other.p)
            )
        )


@dataclass(frozen=True)
class GroundTruthEntry:
    """Per-segment target annotation: 0-based segment index + bbox (x, y, w, h)."""

    segment_index: int
    bbox: tuple[int, int, int, int]

    def center(self) -> tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + w / 2.0, y + h / 2.0)


def _parse_header(line: str, line_no: int) -> SensorGeometry:
    parts = line.strip().split()
    if parts[:3] != ["#", "evtrack-events", "v1"]:
        raise MalformedLine(f"expected event header {EVENTS_MAGIC!r}", line=line_no)
    kv = dict(p.split("=", 1) for p in parts[3:] if "=" in p)
    try:
        return SensorGeometry(int(kv["width"]), int(kv["height"]))
    except (KeyError, ValueError) as exc:
        raise MalformedLine(f"bad geometry in header: {exc}", line=line_no) from exc


def parse_events(source, geometry: SensorGeometry | None = None) -> EventStream:
    """Parse an event file from a path, text, or file object.

    When ``geometry`` is given it must match the header; otherwise the
    header geometry is used.
    """
    lines = _read_lines(source)
    if not lines:
        if geometry is None:
            raise MalformedLine("empty input: missing event header", line=1)
        return EventStream.from_events(geometry, [])
    file_geom = _parse_header(lines[0], 1)
    if geometry is not None and geometry != file_geom:
        raise MalformedLine(
            f"header geometry {file_geom.width}x{file_geom.height} does not match "
            f"expected {geometry.width}x{geometry.height}",
            line=1,
        )
    geom = geometry or file_geom

    n = len(lines) - 1
    t = np.empty(n, np.int64)
    x = np.empty(n, np.int64)
    y = np.empty(n, np.int64)
    p = np.empty(n, np.int64)
    last_t = -1
    for i, line in enumerate(lines[1:]):
        line_no = i + 2
        fields = line.strip().split(",")
        if len(fields) != 4:
            raise MalformedLine(f"expected 4 fields, got {len(fields)}", line=line_no)
        try:
            ti, xi, yi, pi = (int(f) for f in fields)
        except ValueError as exc:
            raise MalformedLine(str(exc), line=line_no) from exc
        if ti < last_t:
            raise NonMonotonicTime(f"timestamp {ti} after {last_t}", line=line_no)
        if ti < 0:
            raise MalformedLine(f"negative timestamp {ti}", line=line_no)
        if not geom.contains(xi, yi):
            raise OutOfBounds(
                f"event at ({xi},{yi}) outside {geom.width}x{geom.height}", line=line_no
            )
        if pi not in (1, -1):
            raise MalformedLine(f"polarity must be 1 or -1, got {pi}", line=line_no)
        t[i], x[i], y[i], p[i] = ti, xi, yi, pi
        last_t = ti
    return EventStream(geom, t, x, y, p)


def write_events(stream: EventStream, sink) -> None:
    """Write an event file; ``parse_events`` round-trips it exactly."""
    with _open_sink(sink) as f:
        f.write(f"{EVENTS_MAGIC} width={stream.geometry.width} height={stream.geometry.height}\n")
        for i in range(len(stream)):
            f.write(f"{stream.t[i]},{stream.x[i]},{stream.y[i]},{stream.p[i]}\n")


def parse_ground_truth(source) -> tuple[list[GroundTruthEntry], list[int]]:
    """Parse a ground-truth file.

    Returns the entries plus the (possibly empty) list of segment indices
    marked occluded by an ``# occluded`` line.
    """
    lines = _read_lines(source)
    if not lines or lines[0].strip() != GT_MAGIC:
        raise MalformedLine(f"expected ground-truth header {GT_MAGIC!r}", line=1)
    occluded: list[int] = []
    body = lines[1:]
    start_no = 2
    if body and body[0].startswith("# occluded"):
        rest = body[0][len("# occluded"):].strip()
        if rest:
            try:
                occluded = [int(s) for s in rest.split(",")]
            except ValueError as exc:
                raise MalformedLine(f"bad occluded list: {exc}", line=2) from exc
        body = body[1:]
        start_no = 3

    entries: list[GroundTruthEntry] = []
    for i, line in enumerate(body):
        line_no = start_no + i
        fields = line.strip().split(",")
        if len(fields) != 5:
            raise MalformedLine(f"expected 5 fields, got {len(fields)}", line=line_no)
        try:
            seg, x, y, w, h = (int(f) for f in fields)
        except ValueError as exc:
            raise MalformedLine(str(exc), line=line_no) from exc
        if seg != i:
            raise IndexMismatch(f"segment index {seg} at position {i}: indices must be consecutive from 0")
        if w < 1 or h < 1:
            raise MalformedLine(f"bbox size {w}x{h} must be >= 1", line=line_no)
        entries.append(GroundTruthEntry(seg, (x, y, w, h)))
    return entries, occluded


def write_ground_truth(entries: Sequence[GroundTruthEntry], sink, occluded: Sequence[int] = ()) -> None:
    with _open_sink(sink) as f:
        f.write(GT_MAGIC + "\n")
        if occluded:
            f.write("# occluded " + ",".join(str(i) for i in occluded) + "\n")
        for e in entries:
            x, y, w, h = e.bbox
            f.write(f"{e.segment_index},{x},{y},{w},{h}\n")


def _read_lines(source) -> list[str]:
    """Accept a path (str/PathLike), bytes content, or a file object."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as f:
            text = f.read()
    elif hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        raise TypeError(f"unsupported source type {type(source)!r}")
    return text.splitlines() if text else []


class _open_sink:
    """Context manager accepting a path or an open text file object."""

    def __init__(self, sink):
        self._sink = sink
        self._owned = None

    def __enter__(self):
        if hasattr(self._sink, "write"):
            return self._sink
        self._owned = open(self._sink, "w", encoding="utf-8", newline="\n")
        return self._owned

    def __exit__(self, *exc):
        if self._owned is not None:
            self._owned.close()
        return False
