"""
Rendering a procedural scene
============================

One scene, one camera, and the same frame at several times of day and in
several weathers. Depth never changes; only the colours do.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from gamedepth.io import write_pfm, write_ppm
from gamedepth.render import render_frame
from gamedepth.scenegen import Camera, generate_scene, sun_state, weather_state

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="gamedepth_"))
out.mkdir(parents=True, exist_ok=True)

# A scene is a ground plane plus boxes and spheres placed at log-spaced depths.
scene = generate_scene(seed=3)
print(f"{len(scene.primitives)} primitives:", ", ".join(p.kind for p in scene.primitives))

# A slightly downward-looking camera at eye height.
cam = Camera.looking(pitch=-0.05, width=128, height=96)

###############################################################################
# Time of day moves the sun; weather sets fog density and a light multiplier.

for t in (6.5, 12.0, 18.5):
    for kind in ("sunny", "foggy"):
        frame = render_frame(scene, cam, sun_state(t), weather_state(kind))
        name = f"t{t:04.1f}_{kind}"
        write_ppm(frame.rgb, out / f"{name}.ppm")
        print(f"{name}: mean colour {np.round(frame.rgb.mean(axis=(0, 1)), 3)}")

# Depth is planar z in metres, clamped to [0.5, 2000]; sky pixels hold 2000.
write_pfm(frame.depth, out / "depth.pfm")
print(f"depth range {frame.depth.min():.2f} .. {frame.depth.max():.0f}, files in {out}")
