"""Deterministic synthetic event-stream scenes with ground truth.

A scene holds one target object plus optional decoy objects, all built
from the same parts: a shape (disk, rectangle, ring) whose size may be
modulated over time, and a motion path (linear, circular, sinusoidal).
Moving boundary pixels emit events as a Poisson process; pixels of a
static scene emit nothing, mirroring a temporal-contrast sensor. Leading
edges emit +1 events, trailing edges -1, and background noise events are
uniform over the array with fair-coin polarity.

Ground truth is exposed as a time-parameterized bbox template; callers
convert it to per-segment entries once a segmentation is chosen. Bboxes
are clamped to the sensor when the shape pokes past an edge (the center
path itself must stay inside, else ``PathOutOfBounds``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PathOutOfBounds
from .events import EventStream, GroundTruthEntry, SensorGeometry

US = 1_000_000  # microseconds per second

# ---------------------------------------------------------------------------
# Shapes


@dataclass(frozen=True)
class Shape:
    """Closed shape with a signed boundary-distance function.

    kind: "disk" (size = radius), "rectangle" (size = (w, h)),
    "ring" (size = (outer, inner) radii).
    pulsate: (amplitude_fraction, period_s) radial size modulation.
    growth: fractional size change per second (scale-change scenes).
    spin: rotation in rad/s (rectangles only).
    """

    kind: str = "disk"
    size: tuple[float, ...] = (6.0,)
    pulsate: tuple[float, float] | None = None
    growth: float = 0.0
    spin: float = 0.0

    def scale(self, t_s: float) -> float:
        s = 1.0 + self.growth * t_s
        if self.pulsate is not None:
            amp, period = self.pulsate
            s *= 1.0 + amp * math.sin(2.0 * math.pi * t_s / period)
        return max(s, 0.05)

    def boundary_distance(self, dx, dy, t_s: float):
        """Unsigned distance from points (dx, dy) relative to the center
        to the shape boundary at time t_s. Vectorized over dx, dy."""
        s = self.scale(t_s)
        if self.kind == "disk":
            r = self.size[0] * s
            return np.abs(np.hypot(dx, dy) - r)
        if self.kind == "ring":
            outer, inner = self.size[0] * s, self.size[1] * s
            d = np.hypot(dx, dy)
            return np.minimum(np.abs(d - outer), np.abs(d - inner))
        if self.kind == "rectangle":
            w, h = self.size[0] * s, self.size[1] * s
            ang = self.spin * t_s
            c, si = math.cos(-ang), math.sin(-ang)
            qx = dx * c - dy * si
            qy = dx * si + dy * c
            ex, ey = np.abs(qx) - w / 2.0, np.abs(qy) - h / 2.0
            outside = np.hypot(np.maximum(ex, 0.0), np.maximum(ey, 0.0))
            inside = np.minimum(np.maximum(ex, ey), 0.0)
            return np.abs(outside + inside)
        raise ValueError(f"unknown shape kind {self.kind!r}")

    def extent(self, t_s: float) -> tuple[float, float]:
        """Half-width and half-height of the tight bounding box at t_s."""
        s = self.scale(t_s)
        if self.kind == "disk":
            r = self.size[0] * s
            return r, r
        if self.kind == "ring":
            r = self.size[0] * s
            return r, r
        if self.kind == "rectangle":
            w, h = self.size[0] * s / 2.0, self.size[1] * s / 2.0
            ang = self.spin * t_s
            c, si = abs(math.cos(ang)), abs(math.sin(ang))
            return w * c + h * si, w * si + h * c
        raise ValueError(f"unknown shape kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Motion paths


@dataclass(frozen=True)
class MotionPath:
    """Center trajectory. kinds: "linear", "circular", "sinusoidal".

    linear:     start + speed * t along direction
    circular:   orbit of given radius around start, angular rate speed/radius
    sinusoidal: linear drift plus a perpendicular sine of amplitude/period
    """

    kind: str = "linear"
    start: tuple[float, float] = (20.0, 64.0)
    direction: tuple[float, float] = (1.0, 0.0)
    speed: float = 10.0  # px/s along the path
    radius: float = 30.0  # circular only
    amplitude: float = 10.0  # sinusoidal only
    period: float = 2.0  # s, sinusoidal only

    def _unit(self) -> tuple[float, float]:
        dx, dy = self.direction
        n = math.hypot(dx, dy)
        if n == 0:
            return (0.0, 0.0)
        return (dx / n, dy / n)

    def position(self, t_s: float) -> tuple[float, float]:
        x0, y0 = self.start
        ux, uy = self._unit()
        if self.kind == "linear":
            return (x0 + self.speed * t_s * ux, y0 + self.speed * t_s * uy)
        if self.kind == "circular":
            w = self.speed / self.radius
            a = w * t_s
            return (x0 + self.radius * math.cos(a) - self.radius, y0 + self.radius * math.sin(a))
        if self.kind == "sinusoidal":
            px, py = -uy, ux
            s = self.amplitude * math.sin(2.0 * math.pi * t_s / self.period)
            return (x0 + self.speed * t_s * ux + s * px, y0 + self.speed * t_s * uy + s * py)
        raise ValueError(f"unknown path kind {self.kind!r}")

    def velocity(self, t_s: float) -> tuple[float, float]:
        ux, uy = self._unit()
        if self.kind == "linear":
            return (self.speed * ux, self.speed * uy)
        if self.kind == "circular":
            w = self.speed / self.radius
            a = w * t_s
            return (-self.radius * w * math.sin(a), self.radius * w * math.cos(a))
        if self.kind == "sinusoidal":
            px, py = -uy, ux
            ds = self.amplitude * (2.0 * math.pi / self.period) * math.cos(2.0 * math.pi * t_s / self.period)
            return (self.speed * ux + ds * px, self.speed * uy + ds * py)
        raise ValueError(f"unknown path kind {self.kind!r}")


@dataclass(frozen=True)
class ObjectSpec:
    """One emitting object: shape + path + per-boundary-pixel event rate."""

    shape: Shape = field(default_factory=Shape)
    path: MotionPath = field(default_factory=MotionPath)
    rate: float = 20.0  # events per boundary pixel per second while moving

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("object event rate must be >= 0")


@dataclass(frozen=True)
class SceneSpec:
    """Full synthetic scene description; ``generate_scene`` is a pure
    function of this (the seed included)."""

    geometry: SensorGeometry = field(default_factory=lambda: SensorGeometry(128, 128))
    duration_us: int = 10 * US
    target: ObjectSpec = field(default_factory=ObjectSpec)
    noise_rate: float = 0.0  # uniform background events per second, whole array
    decoys: tuple[ObjectSpec, ...] = ()
    occlusion_us: tuple[tuple[int, int], ...] = ()  # intervals with target suppressed
    seed: int = 0

    def __post_init__(self):
        if self.noise_rate < 0:
            raise ValueError("noise rate must be >= 0")
        if self.duration_us < 1:
            raise ValueError("duration must be >= 1 us")


BAND_WIDTH = 1.0  # px; events land within this distance of the boundary


class GroundTruthTemplate:
    """Target bbox as a function of time, before segmentation."""

    def __init__(self, spec: SceneSpec):
        self._spec = spec

    def bbox(self, t_us: int) -> tuple[float, float, float, float]:
        """Target bbox (x, y, w, h) at t_us, clamped to the sensor."""
        t_s = t_us / US
        cx, cy = self._spec.target.path.position(t_s)
        hx, hy = self._spec.target.shape.extent(t_s)
        geom = self._spec.geometry
        x0 = max(0.0, cx - hx)
        y0 = max(0.0, cy - hy)
        x1 = min(float(geom.width), cx + hx)
        y1 = min(float(geom.height), cy + hy)
        return (x0, y0, max(x1 - x0, 1.0), max(y1 - y0, 1.0))

    def occluded(self, t_us: int) -> bool:
        return any(a <= t_us < b for a, b in self._spec.occlusion_us)

    def entry(self, segment_index: int, t_us: int) -> GroundTruthEntry:
        """Integer-rounded per-segment entry at the given reference time."""
        x, y, w, h = self.bbox(t_us)
        geom = self._spec.geometry
        xi = min(max(int(round(x)), 0), geom.width - 1)
        yi = min(max(int(round(y)), 0), geom.height - 1)
        wi = max(int(round(w)), 1)
        hi = max(int(round(h)), 1)
        wi = min(wi, geom.width - xi)
        hi = min(hi, geom.height - yi)
        return GroundTruthEntry(segment_index, (xi, yi, wi, hi))


def _check_path(spec: SceneSpec, obj: ObjectSpec, label: str) -> None:
    duration_s = spec.duration_us / US
    geom = spec.geometry
    for t_s in np.linspace(0.0, duration_s, 257):
        cx, cy = obj.path.position(float(t_s))
        if not (0.0 <= cx < geom.width and 0.0 <= cy < geom.height):
            raise PathOutOfBounds(
                f"{label} center ({cx:.1f},{cy:.1f}) at t={t_s:.3f}s "
                f"leaves the {geom.width}x{geom.height} sensor"
            )


def _band_pixels(obj: ObjectSpec, t_s: float, geom: SensorGeometry):
    """Integer pixels within BAND_WIDTH of the object boundary at t_s."""
    cx, cy = obj.path.position(t_s)
    hx, hy = obj.shape.extent(t_s)
    x_lo = max(int(math.floor(cx - hx - BAND_WIDTH)), 0)
    x_hi = min(int(math.ceil(cx + hx + BAND_WIDTH)), geom.width - 1)
    y_lo = max(int(math.floor(cy - hy - BAND_WIDTH)), 0)
    y_hi = min(int(math.ceil(cy + hy + BAND_WIDTH)), geom.height - 1)
    if x_hi < x_lo or y_hi < y_lo:
        return np.empty((0, 2), np.int64)
    xs = np.arange(x_lo, x_hi + 1)
    ys = np.arange(y_lo, y_hi + 1)
    gx, gy = np.meshgrid(xs, ys)
    d = obj.shape.boundary_distance(gx - cx, gy - cy, t_s)
    mask = d <= BAND_WIDTH
    return np.column_stack([gx[mask], gy[mask]])


def _object_events(obj: ObjectSpec, spec: SceneSpec, rng: np.random.Generator, occluded_fn):
    """Poisson boundary events for one object over the scene duration."""
    duration_s = spec.duration_us / US
    # Step small enough that the boundary moves well under a pixel per step.
    speed = max(obj.path.speed, 1e-9)
    step_s = min(0.01, 0.25 / speed)
    n_steps = max(1, int(math.ceil(duration_s / step_s)))
    step_s = duration_s / n_steps

    recs = []
    for k in range(n_steps):
        t0 = k * step_s
        tm = t0 + step_s / 2.0
        vx, vy = obj.path.velocity(tm)
        if vx == 0.0 and vy == 0.0:
            continue  # no temporal contrast while static
        n_band = len(_band_pixels(obj, tm, spec.geometry))
        if n_band == 0:
            continue
        n = rng.poisson(obj.rate * n_band * step_s)
        if n == 0:
            continue
        taus = t0 + rng.random(n) * step_s
        taus.sort()
        for tau in taus:
            if occluded_fn(tau):
                continue
            band = _band_pixels(obj, float(tau), spec.geometry)
            if len(band) == 0:
                continue
            px, py = band[rng.integers(len(band))]
            vx, vy = obj.path.velocity(float(tau))
            ccx, ccy = obj.path.position(float(tau))
            lead = (px - ccx) * vx + (py - ccy) * vy
            pol = 1 if lead >= 0 else -1
            recs.append((int(tau * US), int(px), int(py), pol))
    return recs


def generate_scene(spec: SceneSpec) -> tuple[EventStream, GroundTruthTemplate]:
    """Generate the event stream and ground-truth template for a scene.

    Deterministic for a fixed spec (seed included). Object events lie
    within BAND_WIDTH of the emitting shape's boundary at their own
    timestamps; noise events are uniform over pixels and time.
    """
    _check_path(spec, spec.target, "target")
    for i, d in enumerate(spec.decoys):
        _check_path(spec, d, f"decoy {i}")

    rng = np.random.default_rng(spec.seed)
    template = GroundTruthTemplate(spec)

    recs = _object_events(spec.target, spec, rng, lambda t_s: template.occluded(int(t_s * US)))
    for decoy in spec.decoys:
        recs.extend(_object_events(decoy, spec, rng, lambda t_s: False))

    duration_s = spec.duration_us / US
    n_noise = rng.poisson(spec.noise_rate * duration_s)
    if n_noise:
        nt = rng.random(n_noise) * duration_s
        nx = rng.integers(0, spec.geometry.width, n_noise)
        ny = rng.integers(0, spec.geometry.height, n_noise)
        npol = rng.integers(0, 2, n_noise) * 2 - 1
        recs.extend(
            (int(nt[i] * US), int(nx[i]), int(ny[i]), int(npol[i])) for i in range(n_noise)
        )

    if not recs:
        return EventStream(spec.geometry), template
    arr = np.asarray(recs, dtype=np.int64)
    order = np.argsort(arr[:, 0], kind="stable")
    arr = arr[order]
    stream = EventStream(spec.geometry, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy())
    return stream, template


# ---------------------------------------------------------------------------
# Presets: one runnable scene per challenge column of the recordings table.


def _base_disk(seed: int) -> SceneSpec:
    return SceneSpec(
        geometry=SensorGeometry(128, 128),
        duration_us=10 * US,
        target=ObjectSpec(
            shape=Shape("disk", (6.0,)),
            path=MotionPath("linear", start=(14.0, 64.0), direction=(1.0, 0.0), speed=10.0),
            rate=20.0,
        ),
        noise_rate=300.0,
        seed=seed,
    )


def preset_moving_disk(seed: int = 0) -> SceneSpec:
    """Disk sweeping left to right; 1 px per segment at 100 segments."""
    return _base_disk(seed)


def preset_noise(seed: int = 0) -> SceneSpec:
    """Moving disk under heavy uniform background noise."""
    return replace(_base_disk(seed), noise_rate=1500.0)


def preset_occlusion(seed: int = 0) -> SceneSpec:
    """Full occlusion for 0.4 s mid-run (4 segments at 0.1 s each)."""
    return replace(_base_disk(seed), occlusion_us=((int(5.0 * US), int(5.4 * US)),))


def preset_intersection(seed: int = 0) -> SceneSpec:
    """A brighter decoy disk crosses the target trajectory mid-run."""
    base = _base_disk(seed)
    decoy = ObjectSpec(
        shape=Shape("disk", (4.0,)),
        path=MotionPath("linear", start=(64.0, 24.0), direction=(0.0, 1.0), speed=8.0),
        rate=45.0,
    )
    return replace(base, decoys=(decoy,))


def preset_background(seed: int = 0) -> SceneSpec:
    """Textured backdrop: a slow drifting grid of small disks behind the target."""
    base = _base_disk(seed)
    dots = tuple(
        ObjectSpec(
            shape=Shape("disk", (2.0,)),
            path=MotionPath("linear", start=(20.0 + 30.0 * i, 20.0 + 30.0 * j), direction=(0.0, 1.0), speed=1.5),
            rate=8.0,
        )
        for i in range(4)
        for j in range(3)
    )
    return replace(base, decoys=dots)


def preset_deformation(seed: int = 0) -> SceneSpec:
    """Pulsating disk radius (non-rigid deformation)."""
    base = _base_disk(seed)
    shape = Shape("disk", (6.0,), pulsate=(0.3, 2.0))
    return replace(base, target=replace(base.target, shape=shape))


def preset_scale_change(seed: int = 0) -> SceneSpec:
    """Disk growing by 50% over the run."""
    base = _base_disk(seed)
    shape = Shape("disk", (6.0,), growth=0.05)
    return replace(base, target=replace(base.target, shape=shape))


def preset_pose_change(seed: int = 0) -> SceneSpec:
    """Rotating rectangle (changing pose)."""
    base = _base_disk(seed)
    shape = Shape("rectangle", (14.0, 8.0), spin=math.pi / 4.0)
    return replace(base, target=replace(base.target, shape=shape))


PRESETS = {
    "moving-disk": preset_moving_disk,
    "noise": preset_noise,
    "occlusion": preset_occlusion,
    "intersection": preset_intersection,
    "background": preset_background,
    "deformation": preset_deformation,
    "scale-change": preset_scale_change,
    "pose-change": preset_pose_change,
}
