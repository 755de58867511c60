"""
Plausibility and accuracy metrics
=================================

Ground penetration (FP, FQ, JQ), smoothness (SM), accuracy against ground
truth (L2P, L2Q, MPJPE) and the two self-supervised losses.
"""

import numpy as np

from motionfit import metrics, skeleton

tree, walk, contacts = skeleton.synthesize_test_motion("walk", 60, seed=42)
pos = skeleton.forward_kinematics(tree, walk)
quats = skeleton.global_quats(tree, walk)

# Push the whole motion 1 cm into the ground and jitter it a little
rng = np.random.default_rng(0)
pred = pos + [0, 0, -0.01] + rng.normal(scale=0.003, size=pos.shape)

report = metrics.evaluate(pred, tree.foot_set, root=pred[:, 0], gt_positions=pos,
                          pred_quats=quats, gt_quats=quats, contacts=contacts)
for key, value in report.to_dict().items():
    print(f"{key:10s} {value:10.4f}")
