"""
Scale-invariant and total-variation losses
==========================================

The scale-invariant loss ignores a global multiplier on predicted depth.
The multi-scale TV term penalises error that changes from pixel to pixel.
Both gradients are derived by hand and checked here by central differences.
"""

import numpy as np

from gamedepth.nnet import model_gradcheck
from gamedepth.objectives import finite_diff_check, si_loss, si_loss_pairwise, total_loss, tv_loss

rng = np.random.default_rng(0)
gt = rng.uniform(0.5, 2000, size=(16, 16))
pred = gt * np.exp(0.2 * rng.standard_normal(gt.shape))

# Multiplying the prediction by any k leaves the loss where it was.
for k in (0.1, 1.0, 1000.0):
    print(f"k={k:>7}: si_loss {si_loss(np.log(k * pred), np.log(gt)).value:.6f}")

# The pairwise double sum and the variance form agree.
p, g = np.log(pred), np.log(gt)
print(f"pairwise {si_loss_pairwise(p, g):.12f}  variance {si_loss(p, g).value:.12f}")

# A prediction with the right mean but per-pixel noise: SI and TV both notice.
res = total_loss(p, g, alpha=0.5, num_scales=3)
print(f"L_SI {si_loss(p, g).value:.4f}  L_TV {tv_loss(p, g, 3).value:.4f}  L_Total {res.value:.4f}")

###############################################################################
# Gradient checks: relative error between analytic and numerical gradients.

print(f"si_loss  {finite_diff_check(si_loss, p, g):.2e}")
print(f"tv_loss  {finite_diff_check(lambda a, b: tv_loss(a, b, 3), p, g):.2e}")
print(f"network  {model_gradcheck(rng, channels=2, blocks=1, size=8):.2e}")
