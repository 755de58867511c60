"""
PD control, residual-force curriculum and policy features
=========================================================

Joint torques follow tau = kp (u - q) - kd qdot. The residual force scale
is held, decreased linearly, then held again over training iterations.
"""

import numpy as np

from motionfit import control, retarget, skeleton

gains = control.PDGains(300.0, 40.0)
q, _ = control.simulate_pd_joint(gains, u=1.0, q0=0.0, qdot0=0.0, inertia=1.0, dt=1e-3, steps=2000)
print("overdamped joint: |q - u| = %.1e after 2000 steps" % abs(q[-1] - 1.0))

free = control.PDGains(300.0, 0.0)
q, qd = control.simulate_pd_joint(free, 1.0, 0.0, 0.0, 1.0, 1e-3, 1000)
e = control.pd_energy(free, 1.0, q, qd, 1.0)
print("undamped joint: energy drift %.2f%%" % (100 * np.abs(e - e[0]).max() / e[0]))

for i in (0, 100, 101, 700, 1300, 1500):
    print(f"iteration {i:5d}: residual force scale {control.curriculum_scale(i):.1f}")

tree, walk, _ = skeleton.synthesize_test_motion("walk", 30, seed=42)
humanoid = retarget.retarget_sequence(tree, walk)
f = control.features_at(tree, humanoid, 5)
print("feature vector length:", f.size, "blocks:", ", ".join(control.FEATURE_BLOCKS))
