"""Tracking accuracy metrics and a small timing harness.

Center location error (CLE) per segment is the Euclidean distance between
the tracker center and the ground-truth box center. The precision curve is
the fraction of segments with CLE below each threshold tau = 1..50 px.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cftracker import TrackerParams, TrajectoryEntry, track
from .errors import EmptyInput, IndexMismatch
from .events import EventStream, GroundTruthEntry
from .segmentation import SegmentationPolicy

PRECISION_TAUS = tuple(range(1, 51))


def center_location_error(
    trajectory: Sequence[TrajectoryEntry],
    ground_truth: Sequence[GroundTruthEntry],
) -> np.ndarray:
    """Per-segment CLE; both sequences must cover the same segment indices."""
    if len(trajectory) == 0:
        raise EmptyInput("empty trajectory")
    if len(trajectory) != len(ground_truth):
        raise IndexMismatch(
            f"trajectory has {len(trajectory)} segments, ground truth {len(ground_truth)}"
        )
    errors = np.empty(len(trajectory))
    for i, (traj, gt) in enumerate(zip(trajectory, ground_truth)):
        if traj.segment_index != gt.segment_index:
            raise IndexMismatch(
                f"segment {traj.segment_index} paired with ground truth {gt.segment_index}"
            )
        gx, gy = gt.center()
        errors[i] = math.hypot(traj.cx - gx, traj.cy - gy)
    return errors


@dataclass(frozen=True)
class CLEReport:
    errors: np.ndarray  # per segment

    @property
    def mean(self) -> float:
        return float(self.errors.mean())

    def precision(self, tau: float) -> float:
        return float((self.errors <= tau).mean())

    def curve(self, taus: Sequence[float] = PRECISION_TAUS) -> list[tuple[float, float]]:
        return [(float(t), self.precision(t)) for t in taus]


def evaluate(
    trajectory: Sequence[TrajectoryEntry],
    ground_truth: Sequence[GroundTruthEntry],
) -> CLEReport:
    return CLEReport(center_location_error(trajectory, ground_truth))


def write_cle_csv(report: CLEReport, trajectory: Sequence[TrajectoryEntry], sink) -> None:
    from .events import _open_sink

    with _open_sink(sink) as f:
        f.write("segment,cle\n")
        for entry, err in zip(trajectory, report.errors):
            f.write(f"{entry.segment_index},{float(err)!r}\n")


def write_precision_csv(report: CLEReport, sink) -> None:
    from .events import _open_sink

    with _open_sink(sink) as f:
        f.write("tau,precision\n")
        for tau, p in report.curve():
            f.write(f"{tau!r},{p!r}\n")


def summary_lines(report: CLEReport) -> list[str]:
    return [
        f"segments={len(report.errors)}",
        f"mean_cle={report.mean!r}",
        f"precision@20={report.precision(20)!r}",
    ]


# ---------------------------------------------------------------------------
# Baseline: event-centroid tracker


def baseline_centroid_tracker(
    stream: EventStream,
    policy: SegmentationPolicy,
    init: GroundTruthEntry,
    padding: float = 2.0,
) -> list[TrajectoryEntry]:
    """Follow the centroid of events inside a search window.

    Same window geometry as the correlation tracker (padding * box size
    around the previous center) so comparisons isolate the filtering, not
    the gating. Empty windows hold the previous position.
    """
    from .segmentation import segment as segment_stream

    x, y, w, h = init.bbox
    cx, cy = x + w // 2, y + h // 2
    win_w = max(4, int(round(padding * w)))
    win_h = max(4, int(round(padding * h)))
    geom = stream.geometry
    out = []
    for seg in segment_stream(stream, policy):
        if len(seg) > 0 and out:
            x0, y0 = cx - win_w // 2, cy - win_h // 2
            inside = (
                (seg.x >= x0)
                & (seg.x < x0 + win_w)
                & (seg.y >= y0)
                & (seg.y < y0 + win_h)
            )
            if inside.any():
                cx = min(max(int(round(seg.x[inside].mean())), 0), geom.width - 1)
                cy = min(max(int(round(seg.y[inside].mean())), 0), geom.height - 1)
        bbox = (cx - w // 2, cy - h // 2, w, h)
        out.append(TrajectoryEntry(seg.index, float(cx), float(cy), bbox))
    return out


# ---------------------------------------------------------------------------
# Throughput


@dataclass(frozen=True)
class BenchResult:
    label: str
    segments: int
    seconds: tuple[float, ...]  # one wall-clock time per rep
    trajectory: list[TrajectoryEntry]

    @property
    def segments_per_second(self) -> float:
        return self.segments / float(np.median(self.seconds))


def bench(
    stream: EventStream,
    policy: SegmentationPolicy,
    init: GroundTruthEntry,
    params: TrackerParams,
    reps: int = 3,
    label: str = "",
    runner: Callable[..., list[TrajectoryEntry]] = track,
) -> BenchResult:
    """Time the full tracking loop serially; report median-based rate.

    Repetitions must produce identical trajectories; a mismatch means the
    pipeline is non-deterministic and the timing is meaningless.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seconds = []
    first = None
    for _ in range(reps):
        t0 = time.perf_counter()
        traj = runner(stream, policy, init, params)
        seconds.append(time.perf_counter() - t0)
        if first is None:
            first = traj
        elif traj != first:
            raise RuntimeError("trajectories differ across repetitions")
    return BenchResult(label, len(first), tuple(seconds), first)
