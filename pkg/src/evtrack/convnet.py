"""Minimal convolutional forward engine and the EVTW weight format.

The engine supports exactly what hierarchical feature extraction needs:
3x3-ish convolutions with zero padding and stride 1, ReLU, and 2x2
stride-2 max pooling with ceiling semantics on odd sizes. It runs on the
input's native resolution, so feature maps follow the 1/2/4 downsample
progression of the three standard taps (conv1_1, conv2_2, conv3_3).

Weights load from a portable little-endian binary file:

    magic "EVTW", u32 version=1, u32 layer_count,
    per layer: u16 name_len + UTF-8 name, u16 flags (bit0 followed-by-pool,
               bit1 is-tap), u32 in_ch, u32 out_ch, u16 kh, u16 kw,
               f32 weights [out][in][kh][kw], f32 biases [out],
    trailer: u8 has_means, 3 x f32 channel means if set.

Storage is float32; all arithmetic runs in float64.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    ChannelMismatch,
    TruncatedFile,
    UnknownTap,
    VersionMismatch,
    WeightFormatError,
)
from .ratecode import RateMap

EVTW_MAGIC = b"EVTW"
EVTW_VERSION = 1

FLAG_POOL = 0x1
FLAG_TAP = 0x2


@dataclass(frozen=True)
class ConvLayerSpec:
    name: str
    weights: np.ndarray  # (out, in, kh, kw) float64
    bias: np.ndarray  # (out,) float64
    pool_after: bool = False
    is_tap: bool = False

    def __post_init__(self):
        out, cin, kh, kw = self.weights.shape
        if kh != kw or kh % 2 == 0:
            raise ValueError(f"{self.name}: kernel must be square and odd, got {kh}x{kw}")
        if self.bias.shape != (out,):
            raise ValueError(f"{self.name}: bias shape {self.bias.shape} != ({out},)")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError(f"{self.name}: non-finite parameters")

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[ConvLayerSpec, ...]
    means: tuple[float, float, float] | None = None

    def __post_init__(self):
        prev = None
        names = set()
        for layer in self.layers:
            if prev is not None and layer.in_channels != prev.out_channels:
                raise ChannelMismatch(
                    f"{layer.name}: in_channels {layer.in_channels} != "
                    f"previous out_channels {prev.out_channels}"
                )
            if layer.name in names:
                raise ValueError(f"duplicate layer name {layer.name!r}")
            names.add(layer.name)
            prev = layer

    @property
    def tap_names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.layers if l.is_tap)

    def factor_of(self, tap: str) -> int:
        """Downsample factor of a tap: 2^(pools before its output)."""
        f = 1
        for layer in self.layers:
            if layer.name == tap:
                return f
            if layer.pool_after:
                f *= 2
        raise UnknownTap(f"no layer named {tap!r}")


@dataclass(frozen=True)
class FeatureStack:
    """One exported feature map: (H', W', C) grid at a downsample factor."""

    name: str
    data: np.ndarray
    factor: int


# ---------------------------------------------------------------------------
# Forward ops


def conv2d(grid: np.ndarray, layer: ConvLayerSpec) -> np.ndarray:
    """Zero-padded stride-1 convolution of an (H, W, Cin) grid.

    Implemented as im2col + matmul; accumulation is float64.
    """
    h, w, cin = grid.shape
    if cin != layer.in_channels:
        raise ChannelMismatch(f"{layer.name}: input has {cin} channels, expected {layer.in_channels}")
    k = layer.weights.shape[2]
    r = k // 2
    padded = np.pad(grid.astype(np.float64, copy=False), ((r, r), (r, r), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    # windows: (H, W, Cin, k, k) -> columns (H*W, Cin*k*k)
    cols = windows.reshape(h * w, cin * k * k)
    wmat = layer.weights.transpose(1, 2, 3, 0).reshape(cin * k * k, layer.out_channels)
    out = cols @ wmat + layer.bias
    return out.reshape(h, w, layer.out_channels)


def relu(grid: np.ndarray) -> np.ndarray:
    return np.maximum(grid, 0.0)


def maxpool2x2(grid: np.ndarray) -> np.ndarray:
    """2x2 stride-2 max pool; edge blocks shrink on odd sizes (ceil output)."""
    h, w, c = grid.shape
    oh, ow = (h + 1) // 2, (w + 1) // 2
    padded = np.full((oh * 2, ow * 2, c), -np.inf)
    padded[:h, :w] = grid
    blocks = padded.reshape(oh, 2, ow, 2, c)
    return blocks.max(axis=(1, 3))


def forward(input_tensor: np.ndarray, net: NetworkSpec, taps: list[str]) -> list[FeatureStack]:
    """Run conv+ReLU (+pool) stages, exporting the requested tap outputs.

    Returns stacks in the order requested. Computation stops after the
    last requested tap. Tap outputs are post-ReLU, pre-pool.
    """
    known = {l.name for l in net.layers}
    for tap in taps:
        if tap not in known:
            raise UnknownTap(f"no layer named {tap!r}")
    if not taps:
        return []

    remaining = set(taps)
    collected: dict[str, FeatureStack] = {}
    grid = np.asarray(input_tensor, dtype=np.float64)
    factor = 1
    for layer in net.layers:
        grid = relu(conv2d(grid, layer))
        if layer.name in remaining:
            collected[layer.name] = FeatureStack(layer.name, grid, factor)
            remaining.discard(layer.name)
            if not remaining:
                break
        if layer.pool_after:
            grid = maxpool2x2(grid)
            factor *= 2
    return [collected[t] for t in taps]


def raw_feature(rate_map: RateMap | np.ndarray) -> FeatureStack:
    """Weights-free single-channel feature: max-normalized counts, factor 1."""
    counts = rate_map.counts if isinstance(rate_map, RateMap) else rate_map
    counts = np.asarray(counts, dtype=np.float64)
    peak = counts.max() if counts.size else 0.0
    data = counts / peak if peak > 0 else counts
    return FeatureStack("raw", data[:, :, None], 1)


# ---------------------------------------------------------------------------
# EVTW serialization


class _Reader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise TruncatedFile(
                f"need {n} bytes at offset {self._pos}, file has {len(self._data)}"
            )
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def load_network(source) -> NetworkSpec:
    """Load an EVTW weight file from a path, bytes, or binary file object."""
    if isinstance(source, bytes):
        data = source
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as f:
            data = f.read()

    r = _Reader(data)
    if r.take(4) != EVTW_MAGIC:
        raise BadMagic("not an EVTW file")
    (version,) = r.unpack("I")
    if version != EVTW_VERSION:
        raise VersionMismatch(f"unsupported EVTW version {version}")
    (n_layers,) = r.unpack("I")

    layers = []
    for _ in range(n_layers):
        (name_len,) = r.unpack("H")
        name = r.take(name_len).decode("utf-8")
        flags, in_ch, out_ch, kh, kw = r.unpack("HIIHH")
        n_w = out_ch * in_ch * kh * kw
        weights = np.frombuffer(r.take(4 * n_w), dtype="<f4").reshape(out_ch, in_ch, kh, kw)
        bias = np.frombuffer(r.take(4 * out_ch), dtype="<f4")
        layers.append(
            ConvLayerSpec(
                name,
                weights.astype(np.float64),
                bias.astype(np.float64),
                pool_after=bool(flags & FLAG_POOL),
                is_tap=bool(flags & FLAG_TAP),
            )
        )

    (has_means,) = r.unpack("B")
    means = None
    if has_means:
        means = tuple(float(v) for v in r.unpack("fff"))
    if not r.exhausted:
        raise WeightFormatError("trailing data after EVTW trailer")
    return NetworkSpec(tuple(layers), means)


def save_network(net: NetworkSpec, sink) -> None:
    """Write an EVTW file; load then save reproduces it byte-identically."""
    parts = [EVTW_MAGIC, struct.pack("<II", EVTW_VERSION, len(net.layers))]
    for layer in net.layers:
        name = layer.name.encode("utf-8")
        flags = (FLAG_POOL if layer.pool_after else 0) | (FLAG_TAP if layer.is_tap else 0)
        out, cin, kh, kw = layer.weights.shape
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<HIIHH", flags, cin, out, kh, kw))
        parts.append(layer.weights.astype("<f4").tobytes())
        parts.append(layer.bias.astype("<f4").tobytes())
    if net.means is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<Bfff", 1, *net.means))
    blob = b"".join(parts)
    if hasattr(sink, "write"):
        sink.write(blob)
    else:
        with open(sink, "wb") as f:
            f.write(blob)


# ---------------------------------------------------------------------------
# Built-in networks for running without pretrained weights


VGG_PREFIX = (
    # name, stage index, pool after
    ("conv1_1", 0, False),
    ("conv1_2", 0, True),
    ("conv2_1", 1, False),
    ("conv2_2", 1, True),
    ("conv3_1", 2, False),
    ("conv3_2", 2, False),
    ("conv3_3", 2, False),
)
DEFAULT_TAPS = ("conv1_1", "conv2_2", "conv3_3")

# Expected full-width channel chain of the pretrained prefix:
# (name, in_channels, out_channels, pool_after)
VGG_CHAIN = tuple(
    (name, cin, out, pool)
    for (name, stage, pool), cin, out in zip(
        VGG_PREFIX, (3, 64, 64, 128, 128, 256, 256), (64, 64, 128, 128, 256, 256, 256)
    )
)


def _orthogonal_init(rng: np.random.Generator, out: int, cin: int, k: int) -> np.ndarray:
    n = cin * k * k
    if out <= n:
        q, _ = np.linalg.qr(rng.standard_normal((n, out)))
        w = q.T  # orthonormal rows
    else:
        w = rng.standard_normal((out, n))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
    # He-style gain keeps activation scale usable through ReLU stages.
    return (w * math.sqrt(2.0)).reshape(out, cin, k, k)


def random_network(seed: int = 0, widths: tuple[int, int, int] = (16, 32, 64)) -> NetworkSpec:
    """Seeded random network with the standard 3-stage tap topology.

    Channel widths default well below the pretrained model's so that a
    full tracking run stays fast on a CPU; taps and downsample factors
    match the usual conv1_1/conv2_2/conv3_3 layout.
    """
    rng = np.random.default_rng(seed)
    layers = []
    cin = 3
    for name, stage, pool in VGG_PREFIX:
        out = widths[stage]
        w = _orthogonal_init(rng, out, cin, 3)
        b = np.zeros(out)
        layers.append(ConvLayerSpec(name, w, b, pool_after=pool, is_tap=name in DEFAULT_TAPS))
        cin = out
    return NetworkSpec(tuple(layers), means=None)


def gabor_bank(n_orientations: int, k: int = 3, sigma: float = 1.2, wavelength: float = 3.0) -> np.ndarray:
    """(n, k, k) bank of odd/even Gabor kernels over n/2 orientations."""
    half = max((n_orientations + 1) // 2, 1)
    r = k // 2
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    kernels = []
    for i in range(half):
        theta = math.pi * i / half
        xr = xs * math.cos(theta) + ys * math.sin(theta)
        yr = -xs * math.sin(theta) + ys * math.cos(theta)
        envelope = np.exp(-(xr**2 + yr**2) / (2 * sigma**2))
        for phase in (0.0, math.pi / 2):
            g = envelope * np.cos(2 * math.pi * xr / wavelength + phase)
            g -= g.mean()
            n = np.linalg.norm(g)
            kernels.append(g / n if n > 0 else g)
    return np.asarray(kernels[:n_orientations])


def gabor_network(seed: int = 0, widths: tuple[int, int, int] = (16, 32, 64)) -> NetworkSpec:
    """random_network with the first layer replaced by a Gabor bank.

    Each of the three identical input channels sees the same oriented
    edge detectors; deeper layers stay randomly initialized.
    """
    net = random_network(seed, widths)
    first = net.layers[0]
    bank = gabor_bank(first.out_channels)
    w = np.repeat(bank[:, None, :, :], 3, axis=1) / 3.0
    layers = (ConvLayerSpec(first.name, w, np.zeros(first.out_channels), first.pool_after, first.is_tap),) + net.layers[1:]
    return NetworkSpec(layers, means=None)
