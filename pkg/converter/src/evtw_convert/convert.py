"""Convert a pretrained VGG-16 checkpoint into an EVTW weight file.

Only the conv1_1 .. conv3_3 prefix is exported (the tracker never asks
for anything deeper). The source may be a torch state dict (.pt/.pth,
torchvision layer naming) or an .npz archive with the same keys; tensors
are written as little-endian float32 in [out][in][kh][kw] order.

The EVTW layout is the tracker's documented external interface:
magic "EVTW", u32 version=1, u32 layer count, then per layer
u16 name length + UTF-8 name, u16 flags (bit0 followed-by-pool,
bit1 is-tap), u32 in/out channels, u16 kh/kw, f32 weights, f32 biases;
trailer u8 has_means plus three f32 channel means when set.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"EVTW"
VERSION = 1
FLAG_POOL = 0x1
FLAG_TAP = 0x2

# (export name, in_ch, out_ch, pool after, tap) for the VGG-16 prefix
VGG_CHAIN = (
    ("conv1_1", 3, 64, False, True),
    ("conv1_2", 64, 64, True, False),
    ("conv2_1", 64, 128, False, False),
    ("conv2_2", 128, 128, True, True),
    ("conv3_1", 128, 256, False, False),
    ("conv3_2", 256, 256, False, False),
    ("conv3_3", 256, 256, False, True),
)

# torchvision.models.vgg16 state-dict indices for the same layers
TORCHVISION_NAMES = {
    "conv1_1": "features.0",
    "conv1_2": "features.2",
    "conv2_1": "features.5",
    "conv2_2": "features.7",
    "conv3_1": "features.10",
    "conv3_2": "features.12",
    "conv3_3": "features.14",
}

MEANS_KEYS = ("input_means", "means", "mean")


class ConvertError(Exception):
    pass


class MissingLayer(ConvertError):
    pass


class ShapeMismatch(ConvertError):
    pass


@dataclass(frozen=True)
class ExtractedLayer:
    name: str
    weights: np.ndarray  # (out, in, kh, kw) float32
    bias: np.ndarray  # (out,) float32
    pool_after: bool
    is_tap: bool


def load_checkpoint(path) -> dict:
    """Return a name -> array mapping from a .pt/.pth or .npz checkpoint."""
    p = Path(path)
    if p.suffix == ".npz":
        with np.load(p) as data:
            return {k: np.asarray(data[k]) for k in data.files}
    import torch  # local import: npz conversion works without it

    state = torch.load(p, map_location="cpu", weights_only=True)
    if hasattr(state, "state_dict"):
        state = state.state_dict()
    return {k: v.detach().cpu().numpy() if hasattr(v, "detach") else np.asarray(v)
            for k, v in state.items()}


def _lookup(state: dict, layer: str, kind: str) -> np.ndarray:
    for key in (f"{layer}.{kind}", f"{TORCHVISION_NAMES[layer]}.{kind}"):
        if key in state:
            return np.asarray(state[key])
    raise MissingLayer(f"checkpoint has no {kind} for {layer} "
                       f"(tried {layer!r} and {TORCHVISION_NAMES[layer]!r})")


def extract_layers(state: dict) -> list[ExtractedLayer]:
    """Pull the prefix chain out of a checkpoint, validating every shape."""
    layers = []
    for name, cin, cout, pool, tap in VGG_CHAIN:
        w = _lookup(state, name, "weight").astype("<f4")
        b = _lookup(state, name, "bias").astype("<f4")
        if w.shape != (cout, cin, 3, 3):
            raise ShapeMismatch(f"{name}: weight shape {w.shape}, expected {(cout, cin, 3, 3)}")
        if b.shape != (cout,):
            raise ShapeMismatch(f"{name}: bias shape {b.shape}, expected {(cout,)}")
        layers.append(ExtractedLayer(name, w, b, pool, tap))
    return layers


def extract_means(state: dict) -> tuple[float, float, float] | None:
    """Per-channel training means, only when unambiguously present."""
    found = [k for k in MEANS_KEYS if k in state]
    if len(found) != 1:
        return None
    means = np.asarray(state[found[0]], dtype=np.float64).ravel()
    if means.shape != (3,):
        return None
    return (float(means[0]), float(means[1]), float(means[2]))


def serialize(layers: list[ExtractedLayer], means=None) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(layers))
    for layer in layers:
        name = layer.name.encode("utf-8")
        flags = (FLAG_POOL if layer.pool_after else 0) | (FLAG_TAP if layer.is_tap else 0)
        cout, cin, kh, kw = layer.weights.shape
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<HIIHH", flags, cin, cout, kh, kw)
        out += layer.weights.astype("<f4").tobytes()
        out += layer.bias.astype("<f4").tobytes()
    if means is None:
        out += struct.pack("<B", 0)
    else:
        out += struct.pack("<B3f", 1, *means)
    return bytes(out)


def manifest(layers: list[ExtractedLayer], evtw: bytes, means=None) -> dict:
    return {
        "format": "evtw",
        "version": VERSION,
        "sha256": hashlib.sha256(evtw).hexdigest(),
        "means": list(means) if means is not None else None,
        "layers": [
            {
                "name": l.name,
                "in_channels": int(l.weights.shape[1]),
                "out_channels": int(l.weights.shape[0]),
                "kernel": [int(l.weights.shape[2]), int(l.weights.shape[3])],
                "pool_after": l.pool_after,
                "is_tap": l.is_tap,
            }
            for l in layers
        ],
    }


def convert(checkpoint_path, out_path) -> dict:
    """Checkpoint file -> EVTW file + JSON manifest; returns the manifest."""
    state = load_checkpoint(checkpoint_path)
    layers = extract_layers(state)
    means = extract_means(state)
    blob = serialize(layers, means)
    out_path = Path(out_path)
    out_path.write_bytes(blob)
    info = manifest(layers, blob, means)
    out_path.with_suffix(out_path.suffix + ".manifest.json").write_text(
        json.dumps(info, indent=2) + "\n"
    )
    return info
