import math

import numpy as np
import pytest

from gamedepth.render import intersect, render_frame, time_sweep
from gamedepth.scenegen import (FAR_CLIP, NEAR_CLIP, WEATHER_KINDS, Box, Camera,
                                Plane, Scene, SceneConfig, Sphere, WeatherState,
                                generate_scene, ground_plane, sun_state, weather_state)


def test_axis_aligned_plane_hit():
    assert intersect((0, 0, 0), (0, 0, 1), Plane((0, 0, 1), 5.0)) == 5.0


def test_on_axis_sphere_hit():
    assert intersect((0, 0, 0), (0, 0, 1), Sphere((0, 0, 10), 2.0)) == 8.0


def test_misses_and_grazing():
    assert intersect((0, 0, 0), (0, 0, -1), Plane((0, 0, 1), 5.0)) is None
    assert intersect((0, 0, 0), (1, 0, 0), Plane((0, 0, 1), 5.0)) is None
    assert intersect((0, 0, 0), (0, 0, 1), Sphere((0, 3, 10), 2.0)) is None
    # tangent ray
    assert intersect((0, 2, 0), (0, 0, 1), Sphere((0, 0, 10), 2.0)) is None
    assert intersect((0, 0, 0), (0, 0, 1), Box((-1, -1, -5), (1, 1, -2))) is None


def test_inside_primitives_return_exit_distance():
    assert intersect((0, 0, 10), (0, 0, 1), Sphere((0, 0, 10), 2.0)) == pytest.approx(2.0)
    assert intersect((0, 0, 0), (1, 0, 0), Box((-1, -1, -1), (3, 1, 1))) == pytest.approx(3.0)


def test_rejects_non_unit_direction():
    with pytest.raises(ValueError):
        intersect((0, 0, 0), (0, 0, 2), Sphere((0, 0, 10), 1.0))


def _march(origin, direction, box, t_max, step=1e-4):
    """First marched sample inside the closed box, or None."""
    ts = np.arange(1, int(t_max / step) + 2) * step
    pts = origin[None, :] + ts[:, None] * direction[None, :]
    lo, hi = np.array(box.lo), np.array(box.hi)
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    k = np.argmax(inside)
    return ts[k] if inside[k] else None


def test_box_intersection_matches_ray_marching():
    rng = np.random.default_rng(99)
    hits = 0
    for _ in range(1000):
        lo = rng.uniform(-3, 3, 3)
        box = Box(tuple(lo), tuple(lo + rng.uniform(0.5, 3.0, 3)))
        while True:
            origin = rng.uniform(-6, 6, 3)
            if np.any(origin < np.array(box.lo)) or np.any(origin > np.array(box.hi)):
                break
        if rng.random() < 0.5:
            target = rng.uniform(box.lo, box.hi)
            d = target - origin
        else:
            d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        t_max = np.linalg.norm(origin - np.array(box.lo)) + np.linalg.norm(np.array(box.hi) - np.array(box.lo))
        expected = _march(origin, d, box, t_max)
        got = intersect(origin, d, box)
        assert (got is None) == (expected is None)
        if got is not None:
            hits += 1
            assert abs(got - expected) <= 2e-4
    assert hits > 400


def _pixel_dirs(cam):
    """Independent pinhole ray directions (not normalised)."""
    f = np.array(cam.forward)
    u = np.array(cam.up)
    r = np.cross(f, u)
    th = math.tan(cam.fov_y / 2)
    aspect = cam.width / cam.height
    out = np.empty((cam.height, cam.width, 3))
    for i in range(cam.height):
        for j in range(cam.width):
            sx = (2 * (j + 0.5) / cam.width - 1) * th * aspect
            sy = (1 - 2 * (i + 0.5) / cam.height) * th
            out[i, j] = f + sx * r + sy * u
    return out


def test_ground_plane_depth_closed_form():
    cam = Camera((0, 1.8, 0), (0, 0, -1), (0, 1, 0), math.radians(60), 40, 30)
    scene = Scene((ground_plane(),))
    frame = render_frame(scene, cam, sun_state(12), weather_state("sunny"))
    dirs = _pixel_dirs(cam)
    below = dirs[..., 1] < 0
    assert below.sum() == 40 * 15
    expected = np.clip(1.8 * np.abs(dirs[..., 2]) / np.abs(dirs[..., 1]), NEAR_CLIP, FAR_CLIP)
    np.testing.assert_allclose(frame.depth[below], expected[below], rtol=1e-9, atol=0)
    assert np.all(frame.depth[~below] == FAR_CLIP)


def test_sky_pixels_get_far_clip():
    cam = Camera.looking(pitch=math.radians(60), width=16, height=16)
    frame = render_frame(Scene((ground_plane(),)), cam, sun_state(12), weather_state("sunny"))
    assert np.all(frame.depth == FAR_CLIP)


def _closed_form_depth(cam, prims):
    """Per-pixel z-depth from geometric formulas, one ray at a time."""
    origin = np.array(cam.position)
    f = np.array(cam.forward)
    dirs = _pixel_dirs(cam)
    out = np.full(dirs.shape[:2], FAR_CLIP)
    for i in range(dirs.shape[0]):
        for j in range(dirs.shape[1]):
            d = dirs[i, j] / np.linalg.norm(dirs[i, j])
            best = math.inf
            for p in prims:
                if isinstance(p, Plane):
                    n = np.array(p.normal)
                    den = n @ d
                    if den != 0:
                        t = (p.offset - n @ origin) / den
                        if t > 0:
                            best = min(best, t)
                elif isinstance(p, Sphere):
                    L = np.array(p.center) - origin
                    tca = L @ d
                    d2 = L @ L - tca * tca
                    if d2 < p.radius ** 2:
                        thc = math.sqrt(p.radius ** 2 - d2)
                        for t in (tca - thc, tca + thc):
                            if t > 0:
                                best = min(best, t)
                                break
                else:
                    lo, hi = np.array(p.lo), np.array(p.hi)
                    for ax in range(3):
                        if d[ax] == 0:
                            continue
                        for face in (lo[ax], hi[ax]):
                            t = (face - origin[ax]) / d[ax]
                            if t <= 0:
                                continue
                            q = origin + t * d
                            others = [k for k in range(3) if k != ax]
                            if all(lo[k] - 1e-12 <= q[k] <= hi[k] + 1e-12 for k in others):
                                best = min(best, t)
            if math.isfinite(best):
                out[i, j] = min(max(best * (d @ f), NEAR_CLIP), FAR_CLIP)
    return out


SMALL_SCENES = [
    (ground_plane(), Sphere((1.0, 1.2, -8.0), 1.2, (0.8, 0.2, 0.2)),
     Box((-3.0, 0.0, -12.0), (-1.0, 2.5, -9.0), (0.2, 0.7, 0.3))),
    (ground_plane(), Box((-0.5, 0.0, -3.0), (0.7, 1.0, -2.0))),
    (ground_plane(), Sphere((0.0, 40.0, -300.0), 35.0)),
]


@pytest.mark.parametrize("prims", SMALL_SCENES)
@pytest.mark.parametrize("pitch,yaw", [(0.0, 0.0), (-0.2, 0.15), (0.1, -0.3)])
def test_small_scene_depth_matches_geometry(prims, pitch, yaw):
    cam = Camera.looking(pitch=pitch, yaw=yaw, width=24, height=20)
    frame = render_frame(Scene(prims), cam, sun_state(12), weather_state("sunny"))
    expected = _closed_form_depth(cam, prims)
    np.testing.assert_allclose(frame.depth, expected, rtol=1e-9, atol=0)


def test_zero_fog_equals_lambertian():
    cam = Camera.looking(pitch=-0.3, width=16, height=16)
    clear = WeatherState("clear", 0.0, (0.5, 0.6, 0.7), 0.9)
    light = sun_state(10.0)
    albedo = (0.4, 0.5, 0.6)
    frame = render_frame(Scene((ground_plane(albedo=albedo),)), cam, light, clear)
    ground = frame.depth < FAR_CLIP
    assert ground.any()
    # ground normal is +y, so n . sun is the sun's y component
    shade = light.ambient + light.sun_intensity * clear.light_scale * max(0.0, light.sun_direction[1])
    expected = np.clip(np.array(albedo) * shade, 0, 1)
    np.testing.assert_array_equal(frame.rgb[ground], np.broadcast_to(expected, frame.rgb[ground].shape))


def test_fog_moves_color_monotonically_toward_fog_color():
    cam = Camera.looking(pitch=-0.2, width=16, height=16)
    scene = generate_scene(3, SceneConfig(box_count=2, sphere_count=2))
    light = sun_state(11.0)
    sigmas = [0.0, 0.001, 0.005, 0.02, 0.1, 1.0]
    frames = [render_frame(scene, cam, light, WeatherState("w", s, (0.9, 0.1, 0.5), 1.0)) for s in sigmas]
    hit = frames[0].depth < FAR_CLIP
    from gamedepth.render import fog_color

    fog = fog_color(light, WeatherState("w", 0.0, (0.9, 0.1, 0.5), 1.0))
    dist = np.stack([np.abs(f.rgb[hit] - fog) for f in frames])
    assert np.all(np.diff(dist, axis=0) <= 1e-15)
    signed = np.stack([f.rgb[hit] for f in frames])
    step = np.diff(signed, axis=0)
    toward = np.sign(fog - signed[0])
    assert np.all(step * toward >= -1e-15)


def test_ranges_and_finiteness():
    cam = Camera.looking(pitch=-0.05, width=32, height=24)
    for seed in range(3):
        scene = generate_scene(seed)
        for kind in WEATHER_KINDS:
            f = render_frame(scene, cam, sun_state(7.5 + seed), weather_state(kind))
            assert np.all(np.isfinite(f.rgb)) and np.all(np.isfinite(f.depth))
            assert f.rgb.min() >= 0 and f.rgb.max() <= 1
            assert f.depth.min() >= NEAR_CLIP and f.depth.max() <= FAR_CLIP
            assert f.meta == {"seed": seed, "time_of_day": 7.5 + seed, "weather": kind}


def test_near_clip_clamps_close_hits():
    cam = Camera.looking(width=8, height=8)
    scene = Scene((ground_plane(), Box((-5, 0, -0.3), (5, 5, -0.1))))
    f = render_frame(scene, cam, sun_state(12), weather_state("sunny"))
    assert np.all(f.depth == NEAR_CLIP)


@pytest.mark.parametrize("workers", [2, 3, 7])
def test_row_parallel_render_is_bit_identical(workers):
    cam = Camera.looking(pitch=-0.05, width=40, height=30)
    scene = generate_scene(11)
    args = (scene, cam, sun_state(15), weather_state("rainy"))
    a = render_frame(*args)
    b = render_frame(*args, workers=workers)
    assert a.rgb.tobytes() == b.rgb.tobytes()
    assert a.depth.tobytes() == b.depth.tobytes()


def test_time_sweep_shares_depth():
    cam = Camera.looking(pitch=-0.05, width=32, height=24)
    scene = generate_scene(5)
    frames = time_sweep(scene, cam, weather_state("sunny"), [0, 6, 12, 18])
    assert len(frames) == 4
    assert len({f.depth.tobytes() for f in frames}) == 1
    assert len({f.rgb.tobytes() for f in frames}) == 4


def test_time_sweep_singleton_and_repeats():
    cam = Camera.looking(width=16, height=16)
    scene = generate_scene(5)
    w = weather_state("smoggy")
    (single,) = time_sweep(scene, cam, w, [12])
    direct = render_frame(scene, cam, sun_state(12), w)
    assert single.rgb.tobytes() == direct.rgb.tobytes()
    assert single.depth.tobytes() == direct.depth.tobytes()
    a, b = time_sweep(scene, cam, w, [10, 10])
    assert a.rgb.tobytes() == b.rgb.tobytes() and a.depth.tobytes() == b.depth.tobytes()
    with pytest.raises(ValueError):
        time_sweep(scene, cam, w, [])
    with pytest.raises(ValueError):
        time_sweep(scene, cam, w, [25])
