"""
Skeletons, forward kinematics and BVH files
===========================================

A motion is a root trajectory plus one local quaternion per joint and frame.
Forward kinematics walks the tree from the root outwards.
"""

import numpy as np

from motionfit import formats, skeleton

# The canonical tree has 20 joints; the rest pose has slightly bent limbs.
tree = skeleton.canonical_tree()
print(len(tree), "joints, feet:", [tree.names[f] for f in tree.foot_set])

rest = skeleton.rest_positions(tree)
print("rest height of the lower neck above the root: %.3f m" % rest[tree.index("lower_neck"), 2])

# A seeded procedural walk with per-foot contact labels
tree, walk, contacts = skeleton.synthesize_test_motion("walk", 60, seed=42)
pos = skeleton.forward_kinematics(tree, walk)
print("positions:", pos.shape, " lowest foot: %.2e m" % pos[:, list(tree.foot_set), 2].min())
print("left-foot contact pattern:", "".join("#" if c else "." for c in contacts.probs[:, 0]))

# Write the walk as BVH (centimeters, z-y-x channels) and read it back
text = formats.dump_bvh(tree, walk, order="ZYX", scale=0.01)
print(text.splitlines()[4])
tree2, walk2 = formats.parse_bvh(text, scale=0.01)
err = np.abs(skeleton.forward_kinematics(tree2, walk2) - pos).max()
print("BVH round trip max position error: %.1e m" % err)
