"""Deterministic ray caster producing RGB frames with exact planar depth.

One primary ray per pixel, Lambertian shading and exponential fog. Depth is
the camera-space z of the nearest hit, so it never depends on lighting or
weather.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scenegen import (FAR_CLIP, NEAR_CLIP, Box, Camera, LightingState, Plane,
                       Scene, Sphere, WeatherState)

_GRAZE = 1e-12


@dataclass(frozen=True)
class FrameSample:
    rgb: np.ndarray     # (H, W, 3) in [0, 1]
    depth: np.ndarray   # (H, W) metres in [NEAR_CLIP, FAR_CLIP]
    meta: dict

    def __post_init__(self):
        if self.rgb.shape[:2] != self.depth.shape:
            raise ValueError("rgb and depth rasters must share width/height")


def intersect(origin, direction, prim) -> Optional[float]:
    """Smallest positive hit distance of a single ray, or ``None``."""
    o = np.asarray(origin, dtype=float).reshape(1, 3)
    d = np.asarray(direction, dtype=float).reshape(1, 3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("ray direction must be unit length")
    t, _ = intersect_many(o, d, prim)
    return None if np.isinf(t[0]) else float(t[0])


def _dot3(a, b):
    # fixed evaluation order keeps results independent of array layout
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def intersect_many(origins, dirs, prim):
    """Vectorised intersection: returns hit distances (``inf`` on miss) and normals.

    ``origins`` may be a single (3,) point or shaped like ``dirs`` (..., 3).
    """
    origins = np.broadcast_to(np.asarray(origins, dtype=float), dirs.shape)
    shape = dirs.shape[:-1]
    if isinstance(prim, Plane):
        n = np.array(prim.normal)
        denom = _dot3(dirs, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (prim.offset - _dot3(origins, n)) / denom
        ok = (np.abs(denom) > _GRAZE) & (t > 0)
        t = np.where(ok, t, np.inf)
        # face the normal toward the incoming ray
        sign = np.where(denom > 0, -1.0, 1.0)
        normals = sign[..., None] * n
        return t, normals

    if isinstance(prim, Sphere):
        c = np.array(prim.center)
        oc = origins - c
        b = _dot3(oc, dirs)
        cc = _dot3(oc, oc) - prim.radius ** 2
        disc = b * b - cc
        with np.errstate(invalid="ignore"):
            root = np.sqrt(disc)
        t0, t1 = -b - root, -b + root
        t = np.where(t0 > 0, t0, np.where(t1 > 0, t1, np.inf))
        t = np.where(disc > _GRAZE, t, np.inf)
        p = origins + np.where(np.isinf(t), 0.0, t)[..., None] * dirs
        normals = (p - c) / prim.radius
        return t, normals

    if isinstance(prim, Box):
        lo, hi = np.array(prim.lo), np.array(prim.hi)
        tnear = np.full(shape, -np.inf)
        tfar = np.full(shape, np.inf)
        near_axis = np.zeros(shape, dtype=int)
        far_axis = np.zeros(shape, dtype=int)
        inside_all = np.ones(shape, dtype=bool)
        for ax in range(3):
            o, d = origins[..., ax], dirs[..., ax]
            flat = np.abs(d) <= _GRAZE
            inside_all &= ~flat | ((o > lo[ax]) & (o < hi[ax]))
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo[ax] - o) / d
                tb = (hi[ax] - o) / d
            t1 = np.where(flat, -np.inf, np.minimum(ta, tb))
            t2 = np.where(flat, np.inf, np.maximum(ta, tb))
            near_axis = np.where(t1 > tnear, ax, near_axis)
            far_axis = np.where(t2 < tfar, ax, far_axis)
            tnear = np.maximum(tnear, t1)
            tfar = np.minimum(tfar, t2)
        hit = inside_all & (tfar - tnear > _GRAZE) & (tfar > 0)
        use_near = tnear > 0
        t = np.where(hit, np.where(use_near, tnear, tfar), np.inf)
        axis = np.where(use_near, near_axis, far_axis)
        d_axis = np.take_along_axis(dirs, axis[..., None], axis=-1)[..., 0]
        normals = np.zeros(dirs.shape)
        # outward normal opposes the ray on entry and follows it on exit
        sgn = np.where(use_near, -np.sign(d_axis), np.sign(d_axis))
        np.put_along_axis(normals, axis[..., None], sgn[..., None], axis=-1)
        return t, normals

    raise TypeError(f"unsupported primitive {type(prim).__name__}")


def camera_rays(camera: Camera, rows: slice = slice(None)) -> np.ndarray:
    """Unit pinhole-ray directions through pixel centres, shape (h, W, 3)."""
    w, h = camera.width, camera.height
    tan_half = np.tan(camera.fov_y / 2)
    aspect = w / h
    ys = np.arange(h, dtype=float)[rows]
    sx = (2 * (np.arange(w) + 0.5) / w - 1) * tan_half * aspect
    sy = (1 - 2 * (ys + 0.5) / h) * tan_half
    f, u, r = np.array(camera.forward), np.array(camera.up), camera.right
    d = f + sx[None, :, None] * r + sy[:, None, None] * u
    return d / np.sqrt(_dot3(d, d))[..., None]


def sky_radiance(dirs, light: LightingState, weather: WeatherState) -> np.ndarray:
    """Sky colour seen along ``dirs``: weather tint dimmed at night plus a horizon sun glow."""
    daylight = 0.5 * (1.0 + light.elevation)
    base = np.array(weather.sky_color) * (0.08 + 0.92 * daylight)
    glow_strength = (1.0 - abs(light.elevation)) * weather.light_scale
    facing = np.clip(_dot3(dirs, np.array(light.sun_direction)), 0.0, 1.0) ** 4
    glow = glow_strength * facing[..., None] * np.array([0.45, 0.22, 0.05])
    return np.clip(base + glow, 0.0, 1.0)


def fog_color(light: LightingState, weather: WeatherState) -> np.ndarray:
    daylight = 0.5 * (1.0 + light.elevation)
    return np.array(weather.sky_color) * (0.08 + 0.92 * daylight)


def _render_rows(scene, camera, light, weather, rows):
    dirs = camera_rays(camera, rows)
    origin = np.array(camera.position)
    shape = dirs.shape[:-1]
    t_best = np.full(shape, np.inf)
    normal = np.zeros(dirs.shape)
    albedo = np.zeros(dirs.shape)
    for prim in scene.primitives:
        t, n = intersect_many(origin, dirs, prim)
        closer = t < t_best
        t_best = np.where(closer, t, t_best)
        normal = np.where(closer[..., None], n, normal)
        albedo = np.where(closer[..., None], np.array(prim.albedo), albedo)

    miss = np.isinf(t_best)
    zdepth = np.where(miss, FAR_CLIP, t_best * _dot3(dirs, np.array(camera.forward)))
    depth = np.clip(zdepth, NEAR_CLIP, FAR_CLIP)

    sun = np.array(light.sun_direction)
    lambert = np.maximum(0.0, _dot3(normal, sun))
    shade = light.ambient + light.sun_intensity * weather.light_scale * lambert
    surf = albedo * shade[..., None]
    with np.errstate(invalid="ignore"):
        att = np.exp(-weather.fog_density * np.where(miss, 0.0, t_best))[..., None]
    color = surf * att + fog_color(light, weather) * (1.0 - att)
    color = np.where(miss[..., None], sky_radiance(dirs, light, weather), color)
    return np.clip(color, 0.0, 1.0), depth


def render_frame(scene: Scene, camera: Camera, light: LightingState,
                 weather: WeatherState, workers: int = 1) -> FrameSample:
    """Render one frame; ``workers`` splits rows across threads with identical output."""
    if camera.width < 8 or camera.height < 8:
        raise ValueError("resolution must be at least 8x8")
    h = camera.height
    if workers <= 1:
        rgb, depth = _render_rows(scene, camera, light, weather, slice(None))
    else:
        bounds = np.linspace(0, h, min(workers, h) + 1).astype(int)
        chunks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _render_rows(scene, camera, light, weather, s), chunks))
        rgb = np.concatenate([p[0] for p in parts])
        depth = np.concatenate([p[1] for p in parts])
    meta = {"seed": scene.rng_seed, "time_of_day": light.time_of_day, "weather": weather.kind}
    return FrameSample(rgb, depth, meta)


def time_sweep(scene: Scene, camera: Camera, weather: WeatherState,
               times: Sequence[float]) -> list:
    from .scenegen import sun_state

    if len(times) == 0:
        raise ValueError("time sweep needs at least one time")
    return [render_frame(scene, camera, sun_state(t), weather) for t in times]
