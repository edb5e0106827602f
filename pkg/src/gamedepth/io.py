"""PFM/PPM rasters and the binary checkpoint format.

Checkpoint layout, all integers little-endian uint32::

    b"GFDC" | version | C | B | r | iteration
    per tensor, in ModelParams order: ndim | dims... | float32 LE data
    config length | UTF-8 JSON config echo
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .nnet import ModelParams


class FormatError(ValueError):
    """A file does not follow the expected binary layout."""


def _read_token_line(f, what):
    line = f.readline()
    if not line.endswith(b"\n"):
        raise FormatError(f"truncated {what} header")
    return line.decode("ascii", errors="replace").strip()


def write_pfm(raster, path):
    a = np.asarray(raster)
    if a.ndim == 2:
        tag, h, w = b"Pf", *a.shape
    elif a.ndim == 3 and a.shape[2] == 3:
        tag, h, w = b"PF", *a.shape[:2]
    else:
        raise ValueError(f"PFM needs an (H, W) or (H, W, 3) raster, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("PFM rasters must be finite")
    payload = np.ascontiguousarray(np.flipud(a), dtype="<f4").tobytes()
    Path(path).write_bytes(tag + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n" + payload)


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        tag = _read_token_line(f, "PFM")
        if tag == "Pf":
            channels = 1
        elif tag == "PF":
            channels = 3
        else:
            raise FormatError(f"not a PFM file (tag {tag!r})")
        try:
            w, h = (int(v) for v in _read_token_line(f, "PFM").split())
            scale = float(_read_token_line(f, "PFM"))
        except ValueError as exc:
            raise FormatError(f"malformed PFM header: {exc}") from None
        if w <= 0 or h <= 0:
            raise FormatError(f"bad PFM dimensions {w}x{h}")
        if scale >= 0:
            raise FormatError("big-endian PFM (positive scale) is not supported")
        count = w * h * channels
        buf = f.read(4 * count)
    if len(buf) != 4 * count:
        raise FormatError(f"truncated PFM payload: {len(buf)} of {4 * count} bytes")
    data = np.frombuffer(buf, dtype="<f4").astype(np.float32)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return np.flipud(data.reshape(shape)).copy()


def write_ppm(rgb, path):
    a = np.asarray(rgb, dtype=float)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"PPM needs an (H, W, 3) raster, got {a.shape}")
    if not np.all((a >= 0) & (a <= 1)):
        raise ValueError("PPM values must lie in [0, 1]")
    h, w = a.shape[:2]
    q = np.floor(a * 255.0 + 0.5).astype(np.uint8)
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + q.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    # magic, width, height, maxval separated by whitespace, then one whitespace byte
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise FormatError(f"not a binary PPM (magic {fields[0]!r})")
    try:
        w, h, maxval = (int(v) for v in fields[1:])
    except ValueError:
        raise FormatError("malformed PPM header") from None
    if maxval != 255 or w <= 0 or h <= 0:
        raise FormatError(f"unsupported PPM: {w}x{h}, maxval {maxval}")
    payload = data[pos + 1: pos + 1 + 3 * w * h]
    if len(payload) != 3 * w * h:
        raise FormatError("truncated PPM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3) / 255.0


CHECKPOINT_MAGIC = b"GFDC"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: ModelParams, path, iteration=0, config=None):
    out = [CHECKPOINT_MAGIC,
           struct.pack("<5I", CHECKPOINT_VERSION, params.channels, params.blocks,
                       params.ratio, iteration)]
    for t in params.tensors:
        out.append(struct.pack(f"<{1 + t.ndim}I", t.ndim, *t.shape))
        out.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    echo = json.dumps(config or {}, sort_keys=True).encode("utf-8")
    out.append(struct.pack("<I", len(echo)) + echo)
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path, expected_dims=None):
    """Read a checkpoint; returns ``(params, meta)`` with float64 tensors.

    ``expected_dims`` is an optional (C, B, r) triple that must match.
    """
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated checkpoint at byte {pos}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4) != CHECKPOINT_MAGIC:
        raise FormatError("bad checkpoint magic")
    version, c, b, r, iteration = struct.unpack("<5I", take(20))
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    if expected_dims is not None and tuple(expected_dims) != (c, b, r):
        raise ValueError(f"checkpoint dims (C={c}, B={b}, r={r}) do not match "
                         f"expected (C={expected_dims[0]}, B={expected_dims[1]}, r={expected_dims[2]})")
    tensors = []
    for name, shape in ModelParams.shapes(c, b, r):
        (ndim,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        if tuple(dims) != shape:
            raise FormatError(f"{name}: stored shape {dims}, expected {shape}")
        count = int(np.prod(dims))
        tensors.append(np.frombuffer(take(4 * count), dtype="<f4").astype(np.float64).reshape(dims))
    (n,) = struct.unpack("<I", take(4))
    config = json.loads(take(n).decode("utf-8"))
    if pos != len(data):
        raise FormatError("trailing bytes after checkpoint")
    return ModelParams(c, b, r, tensors), {"iteration": iteration, "config": config}
