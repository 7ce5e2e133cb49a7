"""Rate coding: per-pixel event counts for one segment.

Intra-segment timing is discarded on purpose; the count map is what the
feature extractor and tracker consume. ``to_input`` replicates the map
into the three input channels the conv network expects, scaled to the
8-bit range its weights were trained on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import SensorGeometry
from .segmentation import EventSegment

POLARITY_MODES = ("both", "positive_only", "signed")


@dataclass(frozen=True)
class RateMap:
    geometry: SensorGeometry
    counts: np.ndarray  # (H, W) non-negative int64

    def crop(self, cx: int, cy: int, width: int, height: int) -> np.ndarray:
        """Window of the counts centered at (cx, cy), zero-padded outside."""
        out = np.zeros((height, width), dtype=self.counts.dtype)
        x0 = cx - width // 2
        y0 = cy - height // 2
        sx0, sy0 = max(x0, 0), max(y0, 0)
        sx1 = min(x0 + width, self.geometry.width)
        sy1 = min(y0 + height, self.geometry.height)
        if sx1 > sx0 and sy1 > sy0:
            out[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = self.counts[sy0:sy1, sx0:sx1]
        return out


def encode(segment: EventSegment, geometry: SensorGeometry, mode: str = "both") -> RateMap:
    """Count qualifying events per pixel.

    both: every event counts. positive_only: +1 events only.
    signed: |#pos - #neg| per pixel.
    """
    if mode not in POLARITY_MODES:
        raise ValueError(f"mode must be one of {POLARITY_MODES}, got {mode!r}")
    counts = np.zeros((geometry.height, geometry.width), dtype=np.int64)
    if len(segment) == 0:
        return RateMap(geometry, counts)
    if mode == "both":
        np.add.at(counts, (segment.y, segment.x), 1)
    elif mode == "positive_only":
        keep = segment.p > 0
        np.add.at(counts, (segment.y[keep], segment.x[keep]), 1)
    else:
        np.add.at(counts, (segment.y, segment.x), segment.p)
        np.abs(counts, out=counts)
    return RateMap(geometry, counts)


def to_input(rate_map: RateMap | np.ndarray, means: tuple[float, float, float] | None = None) -> np.ndarray:
    """3-channel (H, W, 3) float input: 255 * counts / max, minus channel means.

    Accepts a RateMap or a raw counts window. All three channels carry the
    same rate map; an all-zero map stays zero before mean subtraction.
    """
    counts = rate_map.counts if isinstance(rate_map, RateMap) else rate_map
    counts = np.asarray(counts, dtype=np.float64)
    peak = counts.max() if counts.size else 0.0
    scaled = counts * (255.0 / peak) if peak > 0 else counts
    out = np.repeat(scaled[:, :, None], 3, axis=2)
    if means is not None:
        out = out - np.asarray(means, dtype=np.float64)[None, None, :]
    return out


def write_pgm(rate_map: RateMap, sink) -> None:
    """Debug dump as a plain PGM (P2) image, counts clamped to 0..255."""
    counts = np.clip(rate_map.counts, 0, 255)
    h, w = counts.shape
    lines = [f"P2\n{w} {h}\n255\n"]
    for row in counts:
        lines.append(" ".join(str(int(v)) for v in row) + "\n")
    text = "".join(lines)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
