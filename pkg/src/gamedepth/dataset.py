"""Synthetic dataset generation, the TSV manifest, preprocessing and augmentation."""

from __future__ import annotations

import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import depthproc
from .io import read_pfm, read_ppm, write_pfm, write_ppm
from .render import FrameSample, render_frame
from .scenegen import (WEATHER_KINDS, Camera, SceneConfig, generate_scene,
                       sun_state, weather_state)

MANIFEST_NAME = "manifest.tsv"


@dataclass(frozen=True)
class ManifestRecord:
    rgb: str
    depth: str
    seed: int
    time_of_day: float
    weather: str

    def to_line(self) -> str:
        return f"{self.rgb}\t{self.depth}\t{self.seed}\t{self.time_of_day!r}\t{self.weather}"


@dataclass
class DatasetManifest:
    root: Path
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def path(self, name) -> Path:
        return self.root / name

    def write(self):
        text = "".join(r.to_line() + "\n" for r in self.records)
        (self.root / MANIFEST_NAME).write_text(text, encoding="utf-8")


def read_manifest(root, check_files=True) -> DatasetManifest:
    root = Path(root)
    path = root / MANIFEST_NAME
    if not path.is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {root}")
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields, got {len(parts)}")
        rgb, depth, seed, t, weather = parts
        records.append(ManifestRecord(rgb, depth, int(seed), float(t), weather))
    seen = set()
    for r in records:
        for name in (r.rgb, r.depth):
            if name in seen:
                raise ValueError(f"duplicate path {name!r} in manifest")
            seen.add(name)
            if check_files and not (root / name).is_file():
                raise FileNotFoundError(f"manifest references missing file {root / name}")
    return DatasetManifest(root, records)


def read_rgb(path) -> np.ndarray:
    path = Path(path)
    return read_pfm(path).astype(float) if path.suffix == ".pfm" else read_ppm(path)


def load_frames(root):
    """Load every frame of a dataset as ``(rgb, depth, manifest)`` stacked arrays."""
    manifest = read_manifest(root)
    if not len(manifest):
        raise ValueError(f"dataset {root} is empty")
    rgb = np.stack([read_rgb(manifest.path(r.rgb)) for r in manifest.records])
    depth = np.stack([read_pfm(manifest.path(r.depth)).astype(float) for r in manifest.records])
    return rgb, depth, manifest


@dataclass(frozen=True)
class GenerationConfig:
    count: int
    width: int = 64
    height: int = 64
    times: Sequence[float] = (12.0,)
    weathers: Sequence[str] = ("sunny",)
    seed: int = 0
    sampling: str = "cartesian"
    scene: SceneConfig = field(default_factory=SceneConfig)
    pitch: float = -0.05
    workers: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("frame count must be >= 1")
        if not self.times or not self.weathers:
            raise ValueError("times and weathers must be non-empty")
        for t in self.times:
            if not 0 <= t < 24:
                raise ValueError(f"time {t} outside [0, 24)")
        for w in self.weathers:
            if w not in WEATHER_KINDS:
                raise ValueError(f"unknown weather {w!r}")
        if self.sampling not in ("cartesian", "sampled"):
            raise ValueError("sampling must be 'cartesian' or 'sampled'")

    def camera(self) -> Camera:
        return Camera.looking(pitch=self.pitch, width=self.width, height=self.height)


def _derive_seed(seed, index) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def frame_plan(config: GenerationConfig):
    """(scene seed, time, weather) for every frame index.

    ``cartesian`` walks every time x weather combination of one scene before
    moving on to the next scene; ``sampled`` draws a fresh scene per frame and
    picks time and weather at random.
    """
    plan = []
    if config.sampling == "cartesian":
        combos = [(t, w) for t in config.times for w in config.weathers]
        for i in range(config.count):
            scene_idx, k = divmod(i, len(combos))
            plan.append((_derive_seed(config.seed, scene_idx), *combos[k]))
    else:
        rng = np.random.default_rng(config.seed)
        for i in range(config.count):
            t = config.times[rng.integers(len(config.times))]
            w = config.weathers[rng.integers(len(config.weathers))]
            plan.append((_derive_seed(config.seed, i), t, w))
    return plan


def render_planned(config: GenerationConfig, seed, t, weather) -> FrameSample:
    scene = generate_scene(seed, config.scene)
    return render_frame(scene, config.camera(), sun_state(t), weather_state(weather))


def generate_dataset(config: GenerationConfig, out_dir) -> DatasetManifest:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = frame_plan(config)

    def work(i):
        seed, t, weather = plan[i]
        frame = render_planned(config, seed, t, weather)
        rgb_name, depth_name = f"frame_{i:05d}.ppm", f"frame_{i:05d}.pfm"
        write_ppm(frame.rgb, out / rgb_name)
        write_pfm(frame.depth, out / depth_name)
        return ManifestRecord(rgb_name, depth_name, seed, float(t), weather)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(work, range(len(plan))))
    else:
        records = [work(i) for i in range(len(plan))]
    manifest = DatasetManifest(out, records)
    manifest.write()
    return manifest


PREPROCESS_MODES = ("histeq", "log", "standardize")


def preprocess_dataset(in_dir, out_dir, mode) -> DatasetManifest:
    """Write a normalised copy of a dataset.

    ``histeq`` and ``log`` rewrite the depth maps; ``standardize`` rewrites the
    RGB images as 3-channel PFMs since the result is no longer in [0, 1].
    """
    if mode not in PREPROCESS_MODES:
        raise ValueError(f"mode must be one of {PREPROCESS_MODES}")
    src = read_manifest(in_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for r in src.records:
        rgb_name, depth_name = r.rgb, r.depth
        if mode == "standardize":
            rgb_name = Path(r.rgb).stem + "_std.pfm"
            write_pfm(depthproc.standardize(read_rgb(src.path(r.rgb))), out / rgb_name)
            shutil.copyfile(src.path(r.depth), out / depth_name)
        else:
            depth = read_pfm(src.path(r.depth)).astype(float)
            if mode == "histeq":
                depth = depthproc.histogram_equalize(depth)
            else:
                depth = depthproc.log_transform(depth)
            write_pfm(depth, out / depth_name)
            shutil.copyfile(src.path(r.rgb), out / rgb_name)
        records.append(ManifestRecord(rgb_name, depth_name, r.seed, r.time_of_day, r.weather))
    manifest = DatasetManifest(out, records)
    manifest.write()
    return manifest


def nearest_index(size_out, size_in):
    """Source index for each output index under nearest-neighbour resizing."""
    idx = np.floor((np.arange(size_out) + 0.5) * size_in / size_out).astype(int)
    return np.minimum(idx, size_in - 1)


def resize_nearest(a, h, w):
    return a[nearest_index(h, a.shape[0])][:, nearest_index(w, a.shape[1])]


def resize_bilinear(a, h, w):
    """Half-pixel-centred bilinear resize of an (H, W, ...) array."""
    def axis_weights(n_out, n_in):
        src = np.clip((np.arange(n_out) + 0.5) * n_in / n_out - 0.5, 0, n_in - 1)
        i0 = np.floor(src).astype(int)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    y0, y1, fy = axis_weights(h, a.shape[0])
    x0, x1, fx = axis_weights(w, a.shape[1])
    extra = (None,) * (a.ndim - 2)
    fy = fy[(slice(None), None) + extra]
    fx = fx[(None, slice(None)) + extra]
    top = a[y0][:, x0] * (1 - fx) + a[y0][:, x1] * fx
    bottom = a[y1][:, x0] * (1 - fx) + a[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def default_max_scale(width) -> int:
    # 30 px at 256 px width, kept proportional
    return int(round(width * 30 / 256))


def augment(sample: FrameSample, rng: np.random.Generator, max_scale_px: int,
            flip: Optional[bool] = None) -> FrameSample:
    """Random upscale, crop back to size at a shared offset and optional mirror.

    RGB is resampled bilinearly and depth with nearest neighbour, so depth
    values are only ever copied. The draws are always taken in the same
    order, whatever ``flip`` says, to keep the random stream aligned.
    """
    h, w = sample.depth.shape
    if max_scale_px < 0 or max_scale_px >= min(h, w):
        raise ValueError(f"max_scale_px must lie in [0, {min(h, w)}), got {max_scale_px}")
    s = int(rng.integers(0, max_scale_px + 1))
    oy = int(rng.integers(0, s + 1))
    ox = int(rng.integers(0, s + 1))
    coin = bool(rng.random() < 0.5)
    flip = coin if flip is None else flip

    rgb, depth = sample.rgb, sample.depth
    if s:
        rgb = resize_bilinear(rgb, h + s, w + s)[oy:oy + h, ox:ox + w]
        depth = resize_nearest(depth, h + s, w + s)[oy:oy + h, ox:ox + w]
    if flip:
        rgb, depth = rgb[:, ::-1], depth[:, ::-1]
    meta = dict(sample.meta, augment={"scale_px": s, "offset": (oy, ox), "flip": flip})
    return FrameSample(np.ascontiguousarray(rgb), np.ascontiguousarray(depth), meta)


def mirror(sample: FrameSample) -> FrameSample:
    return FrameSample(sample.rgb[:, ::-1].copy(), sample.depth[:, ::-1].copy(), dict(sample.meta))
