"""Multi-channel correlation filter tracking over segment rate maps.

Training solves, per feature channel in the frequency domain, the ridge
regression over all circular shifts of the training window: with X_c the
channel spectra and Y the Gaussian label spectrum,

    numerator_c  = Y * conj(X_c)
    denominator  = sum_c X_c * conj(X_c) + lambda      (shared across channels)

and detection on test spectra Z_c recovers the response map

    r = real(IFFT(sum_c numerator_c * Z_c / denominator)),

whose argmax relative to the window center is the displacement estimate.
For a single channel this is the exact least-squares solution; with
several channels the shared denominator is the standard approximation
(the per-channel independent form is available via ``per_channel``).

Responses from several conv taps are bilinearly upsampled to the window
resolution and averaged with non-negative weights. Model state keeps
numerator/denominator running averages with learning rate eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import convnet, ratecode
from .convnet import FeatureStack, NetworkSpec
from .errors import (
    DegenerateDenominator,
    EmptyInput,
    IndexMismatch,
    InitOutOfBounds,
    MalformedLine,
    SizeMismatch,
    TapMismatch,
)
from .events import EventStream, GroundTruthEntry
from .segmentation import SegmentationPolicy, segment as segment_stream

TRAJ_MAGIC = "# evtrack-traj v1"


def make_label(height: int, width: int, sigma: float) -> np.ndarray:
    """Gaussian label grid with peak value exactly 1 at (H//2, W//2)."""
    if height < 1 or width < 1:
        raise ValueError("label size must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    ys = np.arange(height) - height // 2
    xs = np.arange(width) - width // 2
    return np.exp(-(ys[:, None] ** 2 + xs[None, :] ** 2) / (2.0 * sigma**2))


@lru_cache(maxsize=64)
def _hann(height: int, width: int) -> np.ndarray:
    return np.outer(np.hanning(height), np.hanning(width))


def _as_channels(features: FeatureStack | np.ndarray) -> np.ndarray:
    data = features.data if isinstance(features, FeatureStack) else np.asarray(features)
    if data.ndim == 2:
        data = data[:, :, None]
    return data.astype(np.float64, copy=False)


@dataclass(frozen=True)
class LayerFilter:
    """Frequency-domain filter state for one tap."""

    num: np.ndarray  # (H, W, C) complex numerator per channel
    den: np.ndarray  # (H, W) shared, or (H, W, C) when per-channel
    label_spectrum: np.ndarray  # (H, W) complex
    lam: float
    windowed: bool
    per_channel: bool = False

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.num.shape


def train_filter(
    features: FeatureStack | np.ndarray,
    label: np.ndarray,
    lam: float = 1e-4,
    window: bool = True,
    per_channel: bool = False,
) -> LayerFilter:
    """Train a correlation filter on one windowed feature stack."""
    x = _as_channels(features)
    h, w, _ = x.shape
    if label.shape != (h, w):
        raise SizeMismatch(f"label {label.shape} does not match features {(h, w)}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if window:
        x = x * _hann(h, w)[:, :, None]
    xf = np.fft.fft2(x, axes=(0, 1))
    yf = np.fft.fft2(label)
    num = yf[:, :, None] * np.conj(xf)
    power = (xf * np.conj(xf)).real
    den = (power if per_channel else power.sum(axis=2)) + lam
    if lam == 0.0 and np.any(den == 0.0):
        raise DegenerateDenominator("zero denominator bin with lambda = 0")
    return LayerFilter(num, den, yf, lam, window, per_channel)


def detect(filt: LayerFilter, features: FeatureStack | np.ndarray) -> np.ndarray:
    """Correlation response map of the filter on a test feature stack."""
    z = _as_channels(features)
    if z.shape != filt.shape:
        raise SizeMismatch(f"features {z.shape} do not match filter {filt.shape}")
    h, w, _ = z.shape
    if filt.windowed:
        z = z * _hann(h, w)[:, :, None]
    zf = np.fft.fft2(z, axes=(0, 1))
    if filt.per_channel:
        spectrum = (filt.num * zf / filt.den).sum(axis=2)
    else:
        spectrum = (filt.num * zf).sum(axis=2) / filt.den
    return np.fft.ifft2(spectrum).real


def _upsample_bilinear(grid: np.ndarray, factor: int, out_shape: tuple[int, int]) -> np.ndarray:
    if grid.shape == out_shape:
        return grid
    oh, ow = out_shape
    ys = np.clip((np.arange(oh) + 0.5) / factor - 0.5, 0.0, grid.shape[0] - 1.0)
    xs = np.clip((np.arange(ow) + 0.5) / factor - 0.5, 0.0, grid.shape[1] - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, grid.shape[0] - 1)
    x1 = np.minimum(x0 + 1, grid.shape[1] - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    return (
        grid[np.ix_(y0, x0)] * (1 - wy) * (1 - wx)
        + grid[np.ix_(y0, x1)] * (1 - wy) * wx
        + grid[np.ix_(y1, x0)] * wy * (1 - wx)
        + grid[np.ix_(y1, x1)] * wy * wx
    )


def fuse_responses(
    responses: Sequence[tuple[np.ndarray, int, float]],
    out_shape: tuple[int, int] | None = None,
) -> np.ndarray:
    """Weighted mean of responses brought to factor-1 resolution.

    Each item is (response, downsample factor, weight >= 0). The output
    shape defaults to the finest response scaled by its factor.
    """
    if not responses:
        raise EmptyInput("no responses to fuse")
    weights = np.array([w for _, _, w in responses], dtype=np.float64)
    if np.any(weights < 0) or weights.sum() == 0:
        raise ValueError("weights must be >= 0 and not all zero")
    if out_shape is None:
        r, f, _ = min(responses, key=lambda item: item[1])
        out_shape = (r.shape[0] * f, r.shape[1] * f)
    fused = np.zeros(out_shape)
    for r, f, w in responses:
        if w == 0.0:
            continue
        fused += w * _upsample_bilinear(r, f, out_shape)
    return fused / weights.sum()


@dataclass(frozen=True)
class FilterModel:
    """Per-tap filters plus fusion weights and the update learning rate."""

    filters: dict[str, LayerFilter]
    weights: dict[str, float]
    eta: float = 0.01

    def __post_init__(self):
        if set(self.filters) != set(self.weights):
            raise TapMismatch("filters and fusion weights cover different taps")
        total = sum(self.weights.values())
        if total <= 0 or any(w < 0 for w in self.weights.values()):
            raise ValueError("fusion weights must be >= 0 with positive sum")


def update_model(model: FilterModel, new_filters: dict[str, LayerFilter], eta: float | None = None) -> FilterModel:
    """Blend numerator/denominator accumulators: a <- (1-eta) a + eta a_new."""
    eta = model.eta if eta is None else eta
    if set(new_filters) != set(model.filters):
        raise TapMismatch(
            f"update taps {sorted(new_filters)} != model taps {sorted(model.filters)}"
        )
    if eta == 0.0:
        return model
    if eta == 1.0:
        return replace(model, filters=dict(new_filters))
    blended = {}
    for tap, old in model.filters.items():
        new = new_filters[tap]
        if new.shape != old.shape:
            raise SizeMismatch(f"{tap}: filter shape changed {old.shape} -> {new.shape}")
        blended[tap] = replace(
            old,
            num=(1.0 - eta) * old.num + eta * new.num,
            den=(1.0 - eta) * old.den + eta * new.den,
        )
    return replace(model, filters=blended)


# ---------------------------------------------------------------------------
# Segment-by-segment tracking loop


@dataclass(frozen=True)
class TrackerParams:
    """Knobs for the tracking loop; defaults follow the module design notes."""

    taps: tuple[str, ...] = ("raw",)
    network: NetworkSpec | None = None
    fusion_weights: tuple[float, ...] | None = None  # parallel to taps; equal if None
    lam: float = 1e-4
    eta: float = 0.01
    sigma_factor: float = 0.1
    padding: float = 2.0  # search window is padding * target size
    polarity_mode: str = "both"
    window: bool = True  # Hann taper on features
    per_channel: bool = False
    min_psr: float = 6.0  # peak-to-sidelobe gate; <= 0 disables

    def __post_init__(self):
        if not self.taps:
            raise ValueError("at least one tap required")
        conv_taps = [t for t in self.taps if t != "raw"]
        if conv_taps and self.network is None:
            raise ValueError(f"taps {conv_taps} need a network (weights file)")
        if self.fusion_weights is not None and len(self.fusion_weights) != len(self.taps):
            raise ValueError("fusion_weights must parallel taps")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if self.padding <= 0:
            raise ValueError("padding must be > 0")


@dataclass(frozen=True)
class TrajectoryEntry:
    segment_index: int
    cx: float
    cy: float
    bbox: tuple[int, int, int, int]


def peak_to_sidelobe(response: np.ndarray, exclude: int = 5) -> float:
    """MOSSE-style peak quality: (peak - mean) / std of the sidelobe.

    The sidelobe excludes a (2*exclude+1)^2 patch around the peak.
    Returns 0 for flat responses.
    """
    peak_idx = np.unravel_index(np.argmax(response), response.shape)
    mask = np.ones(response.shape, dtype=bool)
    y0 = max(peak_idx[0] - exclude, 0)
    x0 = max(peak_idx[1] - exclude, 0)
    mask[y0 : peak_idx[0] + exclude + 1, x0 : peak_idx[1] + exclude + 1] = False
    side = response[mask]
    if side.size == 0:
        return 0.0
    std = side.std()
    if std == 0.0:
        return 0.0
    return float((response[peak_idx] - side.mean()) / std)


class CorrelationTracker:
    """Holds the target state and filter model across segments."""

    def __init__(self, geometry, init: GroundTruthEntry, params: TrackerParams):
        x, y, w, h = init.bbox
        if not (0 <= x and 0 <= y and x + w <= geometry.width and y + h <= geometry.height):
            raise InitOutOfBounds(f"init bbox {init.bbox} outside {geometry.width}x{geometry.height}")
        self.geometry = geometry
        self.params = params
        self.size = (w, h)
        self.center = (x + w // 2, y + h // 2)
        self.win_w = max(4, int(round(params.padding * w)))
        self.win_h = max(4, int(round(params.padding * h)))
        self.model: FilterModel | None = None
        self._labels: dict[str, np.ndarray] = {}

    # -- feature pipeline ---------------------------------------------------

    def _features(self, rate_map: ratecode.RateMap, center) -> dict[str, FeatureStack]:
        window = rate_map.crop(center[0], center[1], self.win_w, self.win_h)
        stacks: dict[str, FeatureStack] = {}
        conv_taps = [t for t in self.params.taps if t != "raw"]
        if conv_taps:
            net = self.params.network
            tensor = ratecode.to_input(window, net.means)
            for stack in convnet.forward(tensor, net, conv_taps):
                stacks[stack.name] = stack
        if "raw" in self.params.taps:
            stacks["raw"] = convnet.raw_feature(window)
        return stacks

    def _label_for(self, tap: str, stack: FeatureStack) -> np.ndarray:
        if tap not in self._labels:
            w, h = self.size
            sigma = self.params.sigma_factor * math.sqrt(w * h) / stack.factor
            self._labels[tap] = make_label(stack.data.shape[0], stack.data.shape[1], sigma)
        return self._labels[tap]

    def _train(self, stacks: dict[str, FeatureStack]) -> dict[str, LayerFilter]:
        return {
            tap: train_filter(
                stacks[tap],
                self._label_for(tap, stacks[tap]),
                self.params.lam,
                self.params.window,
                self.params.per_channel,
            )
            for tap in self.params.taps
        }

    def _fusion_weights(self) -> dict[str, float]:
        if self.params.fusion_weights is None:
            return {tap: 1.0 for tap in self.params.taps}
        return dict(zip(self.params.taps, self.params.fusion_weights))

    # -- per-segment steps ----------------------------------------------------

    def init_model(self, rate_map: ratecode.RateMap) -> None:
        filters = self._train(self._features(rate_map, self.center))
        self.model = FilterModel(filters, self._fusion_weights(), self.params.eta)

    def _detect_all(self, stacks: dict[str, FeatureStack], windowed: bool | None) -> np.ndarray:
        """Fused response; windowed=False strips the taper from detection only."""
        responses = []
        for tap in self.params.taps:
            filt = self.model.filters[tap]
            if windowed is not None and filt.windowed != windowed:
                filt = replace(filt, windowed=windowed)
            responses.append((detect(filt, stacks[tap]), stacks[tap].factor, self.model.weights[tap]))
        return fuse_responses(responses, (self.win_h, self.win_w))

    def step(self, rate_map: ratecode.RateMap) -> None:
        """Detect around the previous center, move, then update the model."""
        stacks = self._features(rate_map, self.center)
        fused = self._detect_all(stacks, windowed=None)

        if self.params.min_psr > 0 and peak_to_sidelobe(fused) < self.params.min_psr:
            # The taper attenuates off-center targets, so a weak peak is
            # ambiguous: lost target or re-appearing one near the window
            # edge. Retry without the taper; its peak stays low on noise.
            fused = self._detect_all(stacks, windowed=False)
            if peak_to_sidelobe(fused) < self.params.min_psr:
                return  # hold position, keep model

        peak = np.unravel_index(np.argmax(fused), fused.shape)
        dy = int(peak[0]) - self.win_h // 2
        dx = int(peak[1]) - self.win_w // 2
        cx = min(max(self.center[0] + dx, 0), self.geometry.width - 1)
        cy = min(max(self.center[1] + dy, 0), self.geometry.height - 1)
        self.center = (cx, cy)

        new_filters = self._train(self._features(rate_map, self.center))
        self.model = update_model(self.model, new_filters)

    def bbox(self) -> tuple[int, int, int, int]:
        w, h = self.size
        return (self.center[0] - w // 2, self.center[1] - h // 2, w, h)


def track(
    stream: EventStream,
    policy: SegmentationPolicy,
    init: GroundTruthEntry,
    params: TrackerParams = TrackerParams(),
) -> list[TrajectoryEntry]:
    """Run the full per-segment pipeline; segment 0 only trains.

    Empty segments hold the previous position and skip the model update.
    """
    tracker = CorrelationTracker(stream.geometry, init, params)
    out = []
    for seg in segment_stream(stream, policy):
        if len(seg) == 0:
            pass  # hold position
        elif tracker.model is None:
            rate_map = ratecode.encode(seg, stream.geometry, params.polarity_mode)
            tracker.init_model(rate_map)
        else:
            rate_map = ratecode.encode(seg, stream.geometry, params.polarity_mode)
            tracker.step(rate_map)
        out.append(
            TrajectoryEntry(seg.index, float(tracker.center[0]), float(tracker.center[1]), tracker.bbox())
        )
    return out


# ---------------------------------------------------------------------------
# Trajectory file I/O


def write_trajectory(entries: Sequence[TrajectoryEntry], sink) -> None:
    from .events import _open_sink

    with _open_sink(sink) as f:
        f.write(TRAJ_MAGIC + "\n")
        for e in entries:
            x, y, w, h = e.bbox
            f.write(f"{e.segment_index},{e.cx!r},{e.cy!r},{x},{y},{w},{h}\n")


def parse_trajectory(source) -> list[TrajectoryEntry]:
    from .events import _read_lines

    lines = _read_lines(source)
    if not lines or lines[0].strip() != TRAJ_MAGIC:
        raise MalformedLine(f"expected trajectory header {TRAJ_MAGIC!r}", line=1)
    entries = []
    for i, line in enumerate(lines[1:]):
        line_no = i + 2
        fields = line.strip().split(",")
        if len(fields) != 7:
            raise MalformedLine(f"expected 7 fields, got {len(fields)}", line=line_no)
        try:
            seg = int(fields[0])
            cx, cy = float(fields[1]), float(fields[2])
            x, y, w, h = (int(f) for f in fields[3:])
        except ValueError as exc:
            raise MalformedLine(str(exc), line=line_no) from exc
        if seg != i:
            raise IndexMismatch(f"segment index {seg} at position {i}: indices must be consecutive from 0")
        entries.append(TrajectoryEntry(seg, cx, cy, (x, y, w, h)))
    return entries
