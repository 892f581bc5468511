#!/usr/bin/env python3
"""Dissect the composite training loss on a synthetic pair: the pixel
term, the structural (SSIM) term, and the detail term in both modes.
"""

import numpy as np

from ivfuse.dataset import synth_corpus
from ivfuse.losses import (LossConfig, avg_gradient, composite_loss_parts,
                           pixel_loss, ssim, ssim_loss)
from ivfuse.network import PreFusionConfig, pre_fuse

pair = synth_corpus(1, 32, seed=4).pairs[0]
iw, vw = pre_fuse(pair.infrared, pair.visible, PreFusionConfig(0.7))
print("pre-fused blends: iw mean %.3f, vw mean %.3f" % (iw.mean(), vw.mean()))

# Pretend a slightly blurred copy is the network output.
blurry = (iw + np.roll(iw, 1, axis=0) + np.roll(iw, 1, axis=1)
          + np.roll(iw, -1, axis=0)) / 4.0

print("\ncomponents against the pre-fused target:")
print("  pixel (mse):   %.6f" % pixel_loss(blurry, iw).item())
print("  pixel (norm):  %.6f" % pixel_loss(blurry, iw, "norm").item())
print("  ssim:          %.6f" % ssim(blurry, iw).item())
print("  ssim loss:     %.6f" % ssim_loss(blurry, iw).item())
print("  avg gradient:  output %.6f vs target %.6f"
      % (avg_gradient(blurry).item(), avg_gradient(iw).item()))

# The default detail mode penalizes the sharpness gap; the literal mode
# penalizes the output's own sharpness (and so rewards blur).
for mode in ("sharpness_match", "literal"):
    cfg = LossConfig(ag_mode=mode)
    total, parts = composite_loss_parts(blurry, iw, cfg)
    print(f"\ncomposite ({mode}): total {parts['L']:.4f}")
    print(f"  L_p {parts['L_p']:.6f}  L_ssim {parts['L_ssim']:.6f}"
          f"  L_ag {parts['L_ag']:.6f}")

# A perfect reconstruction zeroes every component in the default mode.
total, parts = composite_loss_parts(iw, iw.copy(), LossConfig())
print("\nperfect reconstruction total:", parts["L"])
