"""
Matching skeleton poses to humanoid joint angles
================================================

Each driven joint gets a parent and a child frame built from bone vectors;
the z-y-x euler angles between them drive a humanoid with the same bone
lengths. Running humanoid FK on the angles reproduces the source poses.
"""

import time

import numpy as np

from motionfit import retarget, skeleton

tree, poses = skeleton.random_poses(1000, seed=42)
src = skeleton.forward_kinematics(tree, poses)

t0 = time.perf_counter()
humanoid = retarget.retarget_sequence(tree, poses)
back = retarget.humanoid_fk(tree, humanoid)
elapsed = time.perf_counter() - t0

mpjpe = np.linalg.norm(back - src, axis=-1).mean(axis=1) * 1000
print("1000 random bent poses: MPJPE mean %.2e mm, max %.2e mm (%.2f s)"
      % (mpjpe.mean(), mpjpe.max(), elapsed))

# Angles of one frame, in degrees
for name, e in zip(retarget.DRIVEN_JOINTS, np.rad2deg(humanoid.eulers[0])):
    print(f"  {name:15s} ez {e[0]:8.2f}  ey {e[1]:8.2f}  ex {e[2]:8.2f}")

# A straight limb leaves its bend plane undefined. Within a sequence the
# previous frame's plane is reused; alone it is an error.
P = src[:2].copy()
s, e, w = (tree.index(n) for n in ("left_shoulder", "left_elbow", "left_wrist"))
upper = P[1, e] - P[1, s]
P[1, w] = P[1, e] + np.linalg.norm(P[1, w] - P[1, e]) * upper / np.linalg.norm(upper)
_, n = retarget.segment_frames(tree, P)
print("frames that needed the straight-limb fallback:", n)
