"""Procedural outdoor scenes, sun path and weather presets.

A scene is a ground plane plus seeded boxes and spheres. The camera is
assumed to sit near the origin looking down -z, so object placement is
expressed as a forward distance along -z.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

NEAR_CLIP = 0.5
FAR_CLIP = 2000.0

WEATHER_KINDS = ("sunny", "rainy", "foggy", "stormy", "smoggy")


def _vec3(v) -> tuple:
    out = tuple(float(c) for c in v)
    if len(out) != 3:
        raise ValueError(f"expected a 3-vector, got {v!r}")
    return out


def _check_albedo(albedo):
    if any(not (0.0 <= c <= 1.0) for c in albedo):
        raise ValueError(f"albedo channels must lie in [0, 1], got {albedo}")


@dataclass(frozen=True)
class Plane:
    """Infinite plane ``{p : normal . p == offset}``."""

    normal: tuple
    offset: float
    albedo: tuple = (0.45, 0.42, 0.38)
    kind = "plane"

    def __post_init__(self):
        n = np.asarray(_vec3(self.normal))
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", _vec3(self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "albedo", _vec3(self.albedo))
        _check_albedo(self.albedo)

    @property
    def is_ground(self) -> bool:
        return self.normal == (0.0, 1.0, 0.0)

    def to_dict(self):
        return {"kind": self.kind, "normal": list(self.normal),
                "offset": self.offset, "albedo": list(self.albedo)}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box between corners ``lo`` and ``hi``."""

    lo: tuple
    hi: tuple
    albedo: tuple = (0.5, 0.5, 0.5)
    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec3(self.lo))
        object.__setattr__(self, "hi", _vec3(self.hi))
        object.__setattr__(self, "albedo", _vec3(self.albedo))
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"box needs lo < hi per axis, got {self.lo} / {self.hi}")
        _check_albedo(self.albedo)

    def corners(self) -> np.ndarray:
        lo, hi = self.lo, self.hi
        return np.array([[x, y, z] for x in (lo[0], hi[0])
                         for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])

    def to_dict(self):
        return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi),
                "albedo": list(self.albedo)}


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    albedo: tuple = (0.5, 0.5, 0.5)
    kind = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "albedo", _vec3(self.albedo))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        _check_albedo(self.albedo)

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center),
                "radius": self.radius, "albedo": list(self.albedo)}


Primitive = Union[Plane, Box, Sphere]


def ground_plane(height: float = 0.0, albedo=(0.45, 0.42, 0.38)) -> Plane:
    return Plane((0.0, 1.0, 0.0), height, albedo)


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    rng_seed: int = 0

    def __post_init__(self):
        prims = tuple(self.primitives)
        object.__setattr__(self, "primitives", prims)
        if not prims:
            raise ValueError("a scene needs at least one primitive")
        grounds = [p for p in prims if isinstance(p, Plane) and p.is_ground]
        if len(grounds) != 1:
            raise ValueError(f"a scene needs exactly one ground plane, found {len(grounds)}")

    def serialize(self) -> bytes:
        doc = {"rng_seed": self.rng_seed,
               "primitives": [p.to_dict() for p in self.primitives]}
        return json.dumps(doc, sort_keys=True).encode("utf-8")


@dataclass(frozen=True)
class SceneConfig:
    """Knobs for :func:`generate_scene`.

    Objects live inside ``|x| <= extent_x``, ``0 <= y <= extent_y`` and
    ``-extent_z <= z <= 0``. Their forward distances are log-stratified over
    ``[depth_near, depth_far]`` and their size scales with distance so that
    far objects stay visible.
    """

    box_count: int = 6
    sphere_count: int = 4
    extent_x: float = 1200.0
    extent_y: float = 400.0
    extent_z: float = 1300.0
    depth_near: float = NEAR_CLIP
    depth_far: float = 0.5 * FAR_CLIP
    size_min: float = 0.08
    size_max: float = 0.25

    def __post_init__(self):
        if self.box_count < 0 or self.sphere_count < 0:
            raise ValueError("primitive counts must be non-negative")
        if min(self.extent_x, self.extent_y, self.extent_z) <= 0:
            raise ValueError("extent bounds must be positive")
        if not 0 < self.depth_near < self.depth_far:
            raise ValueError("need 0 < depth_near < depth_far")
        if not 0 < self.size_min <= self.size_max:
            raise ValueError("need 0 < size_min <= size_max")

    def largest_size(self) -> float:
        return self.size_max * self.depth_far


@dataclass(frozen=True)
class Camera:
    position: tuple
    forward: tuple
    up: tuple
    fov_y: float
    width: int
    height: int

    def __post_init__(self):
        for name in ("position", "forward", "up"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        f, u = np.array(self.forward), np.array(self.up)
        if abs(np.linalg.norm(f) - 1) > 1e-9 or abs(np.linalg.norm(u) - 1) > 1e-9:
            raise ValueError("camera forward/up must be unit vectors")
        if abs(f @ u) > 1e-9:
            raise ValueError("camera forward and up must be orthogonal")
        if not 0 < self.fov_y < math.pi:
            raise ValueError("fov must lie in (0, pi)")
        if self.width < 8 or self.height < 8:
            raise ValueError(f"resolution must be at least 8x8, got {self.width}x{self.height}")

    @property
    def right(self) -> np.ndarray:
        return np.cross(self.forward, self.up)

    @classmethod
    def looking(cls, position=(0.0, 1.8, 0.0), pitch: float = 0.0, yaw: float = 0.0,
                fov_y: float = math.radians(60.0), width: int = 64, height: int = 64):
        """Camera facing -z, rotated by ``yaw`` about +y then ``pitch`` (radians, up positive)."""
        cp, sp, cy, sy = math.cos(pitch), math.sin(pitch), math.cos(yaw), math.sin(yaw)
        forward = (-sy * cp, sp, -cy * cp)
        up = (sy * sp, cp, cy * sp)
        return cls(position, forward, up, fov_y, width, height)


@dataclass(frozen=True)
class LightingState:
    time_of_day: float
    sun_direction: tuple
    sun_intensity: float
    ambient: float

    @property
    def elevation(self) -> float:
        return self.sun_direction[1]


@dataclass(frozen=True)
class WeatherState:
    kind: str
    fog_density: float
    sky_color: tuple
    light_scale: float


def sun_state(time_of_day: float) -> LightingState:
    """Sun position for a time in hours; rises at 6, peaks at 12, sets at 18."""
    t = float(time_of_day)
    if not 0.0 <= t < 24.0:
        raise ValueError(f"time of day must lie in [0, 24), got {t}")
    angle = math.pi * (t - 6.0) / 12.0
    elevation = math.sin(angle)
    # east is +x; the sun arc is tilted slightly toward -z so it crosses the view
    horiz = math.cos(angle)
    direction = (0.8 * horiz, elevation, -0.6 * horiz)
    lit = max(elevation, 0.0)
    return LightingState(t, direction, lit, 0.05 + 0.15 * lit)


_WEATHER_TABLE = {
    "sunny": (0.0005, (0.53, 0.72, 0.92), 1.0),
    "rainy": (0.004, (0.50, 0.54, 0.58), 0.7),
    "foggy": (0.02, (0.78, 0.78, 0.76), 0.8),
    "stormy": (0.006, (0.28, 0.30, 0.36), 0.5),
    "smoggy": (0.01, (0.66, 0.60, 0.46), 0.85),
}


def weather_state(kind: str) -> WeatherState:
    try:
        sigma, sky, scale = _WEATHER_TABLE[kind]
    except KeyError:
        raise ValueError(f"unknown weather {kind!r}; expected one of {WEATHER_KINDS}") from None
    return WeatherState(kind, sigma, sky, scale)


def _stratified_depths(rng, count, near, far):
    # one draw per log-stratum, endpoints pinned once there are enough objects
    edges = np.geomspace(near, far, count + 1)
    depths = np.exp(rng.uniform(np.log(edges[:-1]), np.log(edges[1:])))
    if count >= 4:
        depths[0], depths[-1] = near, far
    return depths


def generate_scene(seed: int, config: SceneConfig | None = None) -> Scene:
    """Build a deterministic scene from ``seed``.

    Every object gets a forward distance from a log-stratified draw over
    ``[depth_near, depth_far]`` (shuffled between boxes and spheres), a size
    proportional to that distance, a lateral offset inside the extent and a
    random albedo. Objects rest on the ground.
    """
    config = config or SceneConfig()
    total = config.box_count + config.sphere_count
    size = config.largest_size()
    if (size > 2 * config.extent_x or size > config.extent_y
            or config.depth_far + size > config.extent_z):
        raise ValueError("scene extent is smaller than the largest primitive")

    rng = np.random.default_rng(seed)
    ground_albedo = tuple(0.30 + 0.25 * rng.random(3))
    prims: list = [ground_plane(0.0, ground_albedo)]
    if total == 0:
        return Scene(tuple(prims), seed)

    depths = _stratified_depths(rng, total, config.depth_near, config.depth_far)
    kinds = np.array(["box"] * config.box_count + ["sphere"] * config.sphere_count)
    kinds = kinds[rng.permutation(total)]
    for kind, depth in zip(kinds, depths):
        s = depth * rng.uniform(config.size_min, config.size_max)
        albedo = tuple(0.1 + 0.85 * rng.random(3))
        # lateral spread grows with distance but never leaves the extent
        reach = min(config.extent_x - 0.5 * s, 0.9 * depth)
        x = rng.uniform(-reach, reach)
        # the nearest surface point sits exactly at the drawn forward distance
        if kind == "box":
            w, h, d = s * rng.uniform(0.5, 1.0, size=3)
            prims.append(Box((x - w / 2, 0.0, -(depth + d)), (x + w / 2, h, -depth), albedo))
        else:
            r = 0.5 * s
            prims.append(Sphere((x, r, -(depth + r)), r, albedo))
    return Scene(tuple(prims), seed)


def primitive_inside(prim: Primitive, config: SceneConfig) -> bool:
    """Exhaustive containment check against the configured extent."""
    if isinstance(prim, Plane):
        return True
    if isinstance(prim, Box):
        pts = prim.corners()
    else:
        c, r = np.array(prim.center), prim.radius
        pts = np.concatenate([c + r * np.eye(3), c - r * np.eye(3)])
    return bool(np.all(np.abs(pts[:, 0]) <= config.extent_x)
                and np.all((pts[:, 1] >= 0) & (pts[:, 1] <= config.extent_y))
                and np.all((pts[:, 2] <= 0) & (pts[:, 2] >= -config.extent_z)))


def all_weathers() -> Sequence[WeatherState]:
    return [weather_state(k) for k in WEATHER_KINDS]
