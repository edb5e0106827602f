"""
Three ways to normalise depth
=============================

Depth in a game frame spans several orders of magnitude. Histogram
equalisation flattens it to ranks, the log transform compresses it, and
standardisation only centres and scales.
"""

import numpy as np

from gamedepth.depthproc import histogram_equalize, log_transform, standardize
from gamedepth.render import render_frame
from gamedepth.scenegen import Camera, generate_scene, sun_state, weather_state

frame = render_frame(generate_scene(7), Camera.looking(pitch=-0.05, width=96, height=64),
                     sun_state(12), weather_state("sunny"))
depth = frame.depth

for name, out in (("raw", depth),
                  ("histeq", histogram_equalize(depth)),
                  ("log", log_transform(depth)),
                  ("standardize", standardize(depth))):
    q = np.quantile(out, [0.0, 0.25, 0.5, 0.75, 1.0])
    print(f"{name:>12}: quantiles " + " ".join(f"{v:9.3f}" for v in q))

# All three keep the depth ordering. Only histeq throws away the spacing.
order = np.argsort(depth, axis=None, kind="stable")
for fn in (histogram_equalize, log_transform, standardize):
    assert np.all(np.diff(fn(depth).ravel()[order]) >= 0)
print("ordering preserved by all three")
