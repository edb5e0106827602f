"""
Training a tiny network end to end
==================================

Generate 64 small frames, train an 8-channel two-block network for 500
iterations, then compare it with a constant predictor on unseen frames.
Takes well under a minute on one CPU core.
"""

import tempfile
from pathlib import Path

import numpy as np

from gamedepth.dataset import GenerationConfig, generate_dataset, load_frames
from gamedepth.metrics import aggregate, evaluate
from gamedepth.scenegen import WEATHER_KINDS
from gamedepth.training import TrainConfig, evaluate_params, train

root = Path(tempfile.mkdtemp(prefix="gamedepth_train_"))
times = (7.0, 10.0, 13.0, 16.0, 19.0)
generate_dataset(GenerationConfig(64, 32, 32, times, WEATHER_KINDS, seed=2024, sampling="sampled"),
                 root / "train")
generate_dataset(GenerationConfig(16, 32, 32, times, WEATHER_KINDS, seed=777, sampling="sampled"),
                 root / "test")

cfg = TrainConfig(str(root / "train"), epochs=125, batch_size=16, channels=8, blocks=2)
result = train(cfg, log_path=root / "log.txt", checkpoint_path=root / "model.ckpt")

# The loss log has one row per iteration.
rows = np.array([r[2:] for r in result.log_rows])
print("mean losses     L_SI     L_TV  L_Total")
print(f"first 100  {rows[:100].mean(axis=0)}")
print(f"last 100   {rows[-100:].mean(axis=0)}")

###############################################################################
# Held-out frames: the network against predicting each image's mean log depth.

trained = evaluate_params(result.params, root / "test")
_, depth, _ = load_frames(root / "test")
constant = aggregate([evaluate(np.full_like(d, np.exp(np.log(d).mean())), d) for d in depth])
print(f"rmse_si trained {trained.rmse_si:.4f}  constant {constant.rmse_si:.4f}")
print(trained.format_table())
