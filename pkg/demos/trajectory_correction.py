"""
Test-time trajectory correction
===============================

Planted feet should not slide. The correction minimises
contact loss + beta * root path length over the root trajectory (and
optionally per-frame foot offsets), holding the first and last frames.
"""

import numpy as np

from motionfit import correct, metrics, skeleton

# A standing pose whose root sways sideways while all feet are planted
tree, motion, contacts = correct.sliding_foot_fixture(frames=40, amplitude=0.05)
before = metrics.contact_loss(skeleton.forward_kinematics(tree, motion), contacts, tree.foot_set)

result = correct.optimize(tree, motion, contacts, correct.CorrectionConfig(beta=0.1))
after = metrics.contact_loss(result.positions, contacts, tree.foot_set)
print("contact loss %.4f -> %.2e in %d steps" % (before, after, len(result.trace) - 1))
print("trace never increases:", bool(np.all(np.diff(result.trace) <= 0)))
print("root sway left: %.2e m" % np.abs(result.motion.root[:, 0]).max())

# On a real walk, feet offsets give the optimiser more freedom
tree, walk, contacts = skeleton.synthesize_test_motion("walk", 60, seed=42)
for targets in ("root", "root+feet"):
    res = correct.optimize(tree, walk, contacts, correct.CorrectionConfig(targets=targets))
    print(f"{targets:10s} objective {res.trace[0]:.3f} -> {res.trace[-1]:.3f}")
