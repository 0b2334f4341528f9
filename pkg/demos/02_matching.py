"""Matching two templates by shooting, and the round trip back through Exp."""

import numpy as np

from momentum_landmarks import ShootingOptions, exp_map, log_map, rms_distance
from momentum_landmarks.io import synth_ellipse, synth_heart

ellipse = synth_ellipse(4.0, 2.0, 20)
heart = synth_heart(20)

res = log_map(ellipse, heart, opts=ShootingOptions(tol=1e-8))
print(f"converged {res.converged} after {res.iterations} iterations")
print(f"miss-fit history (first five): {np.round(res.missfit_history[:5], 4)}")
print(f"distance estimate ellipse -> heart: {res.distance:.4f}")

back = log_map(heart, ellipse, opts=ShootingOptions(tol=1e-8))
print(f"distance estimate heart -> ellipse: {back.distance:.4f}")

landed = exp_map(ellipse, res.momentum)
print(f"Exp(Log) lands {rms_distance(landed.points, heart.points):.2e} from the heart")
