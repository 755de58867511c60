"""
Unwrapping euler channels
=========================

Per-frame angle extraction returns values in (-pi, pi]; a joint turning
through pi shows up as a jump of almost 2*pi. Flip correction removes those
jumps so each channel is continuous.
"""

import numpy as np

from motionfit import core_math, retarget

truth = np.linspace(2.5, 9.0, 30)          # a steady spin through two wraps
raw = core_math.wrap_angle(truth)
fixed = retarget.flip_correct(raw, lam=5.0)

print("largest raw step      %.3f" % np.abs(np.diff(raw)).max())
print("largest corrected step %.3f" % np.abs(np.diff(fixed)).max())
print("recovered the spin:", np.allclose(fixed, truth))

print(retarget.flip_correct([3.0, -3.0]))   # -3 becomes 3.283...
print(retarget.flip_correct([-3.0, 3.0]))   # 3 becomes -3.283...
