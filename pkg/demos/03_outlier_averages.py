"""Equal versus robust group averages when a group holds outlying shapes.

Ellipses with random axes are mixed with copies of a heart curve.  The
equal-weight average drifts towards the hearts as their share grows; the
inverse-distance weights keep the robust average near the ellipses.
"""

import numpy as np

from momentum_landmarks import WeightScheme, group_average, rms_distance
from momentum_landmarks.io import synth_group

print(f"{'alpha':>5} {'equal':>8} {'robust':>8} {'heart weight':>13}")
for alpha in (0.1, 0.2, 0.3, 0.4):
    group = synth_group(alpha, m=20, n_landmarks=20, seed=0)
    hearts = np.array([t.label.startswith("heart") for t in group])
    target = np.mean([t.points for t, h in zip(group, hearts) if not h], axis=0)
    eq = group_average(group, WeightScheme("equal"))
    rb = group_average(group, WeightScheme("robust"))
    print(f"{alpha:>5} {rms_distance(eq.average.points, target):>8.4f} "
          f"{rms_distance(rb.average.points, target):>8.4f} {rb.weights[hearts].sum():>13.3f}")
