"""
Kinematic tree, skeleton motion containers, forward kinematics and
procedural test motions.

Conventions: meters, +z up, ground plane z = 0, +y forward, +x to the
character's left. Quaternions are w-first and rotate a joint's children
relative to the parent joint.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import core_math as cm
from .errors import InvalidInputError

JOINT_NAMES = (
    "root",
    "left_hip", "left_knee", "left_ankle", "left_foot",
    "right_hip", "right_knee", "right_ankle", "right_foot",
    "mid_spine", "thorax", "lower_neck",
    "left_clavicle", "left_shoulder", "left_elbow", "left_wrist",
    "right_clavicle", "right_shoulder", "right_elbow", "right_wrist",
)

JOINT_PARENTS = (
    None,
    "root", "left_hip", "left_knee", "left_ankle",
    "root", "right_hip", "right_knee", "right_ankle",
    "root", "mid_spine", "thorax",
    "lower_neck", "left_clavicle", "left_shoulder", "left_elbow",
    "lower_neck", "right_clavicle", "right_shoulder", "right_elbow",
)

# foot-related joints, in contact-column order
FOOT_NAMES = ("left_ankle", "right_ankle", "left_foot", "right_foot")

# Rest offsets of the left side and the midline; the right side mirrors x.
# Spine, elbows and knees are slightly bent so no recipe frame is
# degenerate at rest.
_LEFT_AND_MID = {
    "left_hip": (0.09, 0.0, -0.05),
    "left_knee": (0.0, 0.03, -0.42),
    "left_ankle": (0.0, -0.03, -0.41),
    "left_foot": (0.0, 0.13, -0.05),
    "mid_spine": (0.0, -0.02, 0.12),
    "thorax": (0.0, 0.03, 0.20),
    "lower_neck": (0.0, -0.02, 0.18),
    "left_clavicle": (0.04, 0.01, -0.03),
    "left_shoulder": (0.14, -0.01, 0.0),
    "left_elbow": (0.10, 0.0, -0.26),
    "left_wrist": (0.06, 0.06, -0.22),
}


def _rest_offsets():
    out = []
    for name in JOINT_NAMES:
        if name == "root":
            out.append((0.0, 0.0, 0.0))
        elif name.startswith("right_"):
            x, y, z = _LEFT_AND_MID["left_" + name[6:]]
            out.append((-x, y, z))
        else:
            out.append(_LEFT_AND_MID[name])
    return np.array(out)


@dataclass(frozen=True)
class JointTree:
    """Named kinematic tree in topological order (parent index < child index)."""

    names: tuple
    parents: tuple
    offsets: np.ndarray
    foot_set: tuple = field(default=None)

    def __post_init__(self):
        names = tuple(self.names)
        parents = tuple(-1 if p is None else int(p) for p in self.parents)
        offsets = np.asarray(self.offsets, dtype=float)
        if len(names) == 0:
            raise InvalidInputError("tree has no joints")
        if len(set(names)) != len(names):
            raise InvalidInputError("duplicate joint names")
        if len(parents) != len(names) or offsets.shape != (len(names), 3):
            raise InvalidInputError("names, parents and offsets disagree in length")
        roots = [i for i, p in enumerate(parents) if p < 0]
        if roots != [0]:
            raise InvalidInputError("tree needs exactly one root, at index 0")
        for i, p in enumerate(parents[1:], start=1):
            if not 0 <= p < i:
                raise InvalidInputError(f"joint {names[i]!r} has parent {p}, not in topological order")
        foot = self.foot_set
        if foot is None:
            foot = tuple(names.index(n) for n in FOOT_NAMES if n in names)
        foot = tuple(int(f) for f in foot)
        if foot and (len(foot) != 4 or any(not 0 <= f < len(names) for f in foot)):
            raise InvalidInputError("foot set must hold exactly 4 valid joint indices")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "parents", parents)
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "foot_set", foot)

    def __len__(self):
        return len(self.names)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"unknown joint {name!r}") from None

    def bone_lengths(self):
        return np.linalg.norm(self.offsets, axis=1)


def canonical_tree():
    """The 20-joint tree used throughout the package."""
    parents = [None] + [JOINT_NAMES.index(p) for p in JOINT_PARENTS[1:]]
    return JointTree(JOINT_NAMES, parents, _rest_offsets())


def identity_quats(frames, joints):
    q = np.zeros((frames, joints, 4))
    q[..., 0] = 1.0
    return q


@dataclass(frozen=True)
class SkeletonMotion:
    """Root translations ``(T, 3)`` and local joint quaternions ``(T, J, 4)``.

    ``positions`` optionally caches FK output ``(T, J, 3)``; the correction
    stage stores edited foot positions there.
    """

    fps: float
    root: np.ndarray
    quats: np.ndarray
    positions: np.ndarray = None

    def __post_init__(self):
        root = np.array(self.root, dtype=float)
        quats = np.array(self.quats, dtype=float)
        if root.ndim != 2 or root.shape[1] != 3:
            raise InvalidInputError(f"root must be (T, 3), got {root.shape}")
        if quats.ndim != 3 or quats.shape[2] != 4 or quats.shape[0] != root.shape[0]:
            raise InvalidInputError(f"quats must be (T, J, 4) matching root, got {quats.shape}")
        if root.shape[0] < 1:
            raise InvalidInputError("motion has no frames")
        if not self.fps > 0:
            raise InvalidInputError("fps must be positive")
        if np.any(np.abs(np.linalg.norm(quats, axis=-1) - 1.0) > cm.UNIT_TOL):
            raise InvalidInputError("joint quaternions must be unit norm")
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "quats", quats)
        if self.positions is not None:
            pos = np.array(self.positions, dtype=float)
            if pos.shape != quats.shape[:2] + (3,):
                raise InvalidInputError("cached positions do not match the motion shape")
            object.__setattr__(self, "positions", pos)

    @property
    def n_frames(self):
        return self.root.shape[0]

    @property
    def n_joints(self):
        return self.quats.shape[1]

    def with_positions(self, positions):
        return replace(self, positions=positions)


class ContactPrediction:
    """Per-frame, per-foot contact probabilities, clamped to [0, 1]."""

    def __init__(self, probs):
        p = np.array(probs, dtype=float)
        if p.ndim != 2:
            raise InvalidInputError(f"contacts must be (T, n_feet), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("contacts must be finite")
        self.probs = np.clip(p, 0.0, 1.0)

    def __len__(self):
        return self.probs.shape[0]

    def __repr__(self):
        return f"ContactPrediction(frames={self.probs.shape[0]}, feet={self.probs.shape[1]})"


def _check_tree_motion(tree, motion):
    if motion.n_joints != len(tree):
        raise InvalidInputError(
            f"motion has {motion.n_joints} joints but tree has {len(tree)}")


def global_rotations(tree, motion):
    """World rotation matrices ``(T, J, 3, 3)`` of every joint."""
    _check_tree_motion(tree, motion)
    local = cm.quat_to_matrix(motion.quats)
    g = np.empty_like(local)
    g[:, 0] = local[:, 0]
    for j in range(1, len(tree)):
        g[:, j] = g[:, tree.parents[j]] @ local[:, j]
    return g


def global_quats(tree, motion):
    """World quaternions ``(T, J, 4)`` composed root to leaf."""
    _check_tree_motion(tree, motion)
    g = np.empty_like(motion.quats)
    g[:, 0] = motion.quats[:, 0]
    for j in range(1, len(tree)):
        g[:, j] = cm.quat_multiply(g[:, tree.parents[j]], motion.quats[:, j])
    return cm.quat_normalize(g)


def forward_kinematics(tree, motion):
    """Joint positions ``(T, J, 3)``: each child sits at its parent plus the
    parent's accumulated rotation applied to the child's rest offset."""
    g = global_rotations(tree, motion)
    pos = np.empty(g.shape[:2] + (3,))
    pos[:, 0] = motion.root
    for j in range(1, len(tree)):
        p = tree.parents[j]
        pos[:, j] = pos[:, p] + g[:, p] @ tree.offsets[j]
    return pos


def rest_positions(tree):
    """Joint positions with identity rotations and the root at the origin."""
    pos = np.zeros((len(tree), 3))
    for j in range(1, len(tree)):
        pos[j] = pos[tree.parents[j]] + tree.offsets[j]
    return pos


def positions_of(tree, motion):
    """Cached positions if present, otherwise a fresh FK pass."""
    return motion.positions if motion.positions is not None else forward_kinematics(tree, motion)


# ---------------------------------------------------------------------------
# procedural fixtures
# ---------------------------------------------------------------------------

def _axis_rot(axis, angle):
    return cm.quat_from_axis_angle(np.broadcast_to(axis, np.shape(angle) + (3,)), angle)


def synthesize_test_motion(kind, frames, seed=42, fps=30.0):
    """Seeded procedural motion with contact ground truth.

    ``kind`` is one of ``"walk"``, ``"crawl"``, ``"static"``. Returns
    ``(tree, motion, contacts)``; contact columns follow ``tree.foot_set``.
    In ``walk`` and ``crawl`` each leg's ankle and foot are in contact
    during that leg's stance half-cycle and the two legs alternate.
    """
    if kind not in ("walk", "crawl", "static"):
        raise InvalidInputError(f"unknown motion kind {kind!r}")
    frames = int(frames)
    if frames < 2:
        raise InvalidInputError("need at least 2 frames")
    rng = np.random.default_rng(seed)
    tree = canonical_tree()
    J = len(tree)
    idx = {n: i for i, n in enumerate(tree.names)}
    t = np.arange(frames) / fps
    x_axis = np.array([1.0, 0, 0])
    z_axis = np.array([0, 0, 1.0])

    quats = identity_quats(frames, J)
    root = np.zeros((frames, 3))

    if kind == "static":
        noise = rng.normal(scale=0.05, size=(J, 3))
        q = cm.quat_from_axis_angle(noise + 1e-12, np.linalg.norm(noise, axis=1))
        q[0] = (1.0, 0, 0, 0)
        quats[:] = q
        stance_l = stance_r = np.ones(frames)
    else:
        period = 1.1 if kind == "walk" else 1.6
        phase = 2 * np.pi * t / period + rng.uniform(0, 2 * np.pi)
        swing_l, swing_r = np.sin(phase), np.sin(phase + np.pi)
        # a leg is in stance while its hip swings backwards
        stance_l = (np.cos(phase) <= 0).astype(float)
        stance_r = (np.cos(phase + np.pi) <= 0).astype(float)

        if kind == "walk":
            amp_hip, amp_knee, amp_arm = 0.4, 0.6, 0.3
            root_tilt = np.zeros(frames)
            base_hip = np.zeros(frames)
            base_knee = np.zeros(frames)
            base_shoulder = np.zeros(frames)
        else:
            amp_hip, amp_knee, amp_arm = 0.25, 0.2, 0.25
            root_tilt = np.full(frames, -1.25)
            base_hip = np.full(frames, 1.35)
            base_knee = np.full(frames, -1.3)
            base_shoulder = np.full(frames, 1.2)

        quats[:, idx["root"]] = cm.quat_multiply(
            _axis_rot(z_axis, 0.05 * np.sin(phase)), _axis_rot(x_axis, root_tilt))
        for side, swing, other in (("left", swing_l, swing_r), ("right", swing_r, swing_l)):
            flex = np.maximum(0.0, np.cos(phase if side == "left" else phase + np.pi))
            quats[:, idx[f"{side}_hip"]] = _axis_rot(x_axis, base_hip + amp_hip * swing)
            quats[:, idx[f"{side}_knee"]] = _axis_rot(x_axis, base_knee - amp_knee * flex)
            quats[:, idx[f"{side}_ankle"]] = _axis_rot(x_axis, 0.1 * swing)
            quats[:, idx[f"{side}_shoulder"]] = _axis_rot(x_axis, base_shoulder + amp_arm * other)
            quats[:, idx[f"{side}_elbow"]] = _axis_rot(x_axis, 0.3 + 0.2 * np.maximum(0.0, other))
        quats[:, idx["mid_spine"]] = _axis_rot(z_axis, 0.08 * swing_l)
        quats[:, idx["thorax"]] = _axis_rot(z_axis, 0.05 * swing_r)

        jitter = rng.normal(scale=0.01, size=(frames, J, 3))
        jitter[:, 0] = 0.0
        jq = cm.quat_from_axis_angle(jitter + 1e-12, np.linalg.norm(jitter, axis=2))
        quats = cm.quat_normalize(cm.quat_multiply(quats, jq))

        speed = 1.2 if kind == "walk" else 0.35
        root[:, 1] = speed * t
        root[:, 2] = 0.015 * np.cos(2 * phase)

    motion = SkeletonMotion(fps, root, quats)
    pos = forward_kinematics(tree, motion)
    # lift so the lowest foot joint touches the ground
    lift = -pos[:, list(tree.foot_set), 2].min()
    if kind == "crawl":
        lift = -pos[:, :, 2].min()
    root = root.copy()
    root[:, 2] += lift
    motion = SkeletonMotion(fps, root, quats)
    contacts = np.stack([stance_l, stance_r, stance_l, stance_r], axis=1)
    return tree, motion, ContactPrediction(contacts)


def interior_angles(tree, positions):
    """Angle at every (parent, joint, child) triple, ``(T, n_triples)``, in
    radians: pi for a straight limb, 0 for a fully folded one."""
    P = np.asarray(positions, dtype=float)
    out = []
    for c in range(1, len(tree)):
        j = tree.parents[c]
        if j == 0:
            continue
        a = P[..., tree.parents[j], :] - P[..., j, :]
        b = P[..., c, :] - P[..., j, :]
        cos = np.sum(a * b, axis=-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
        out.append(np.arccos(np.clip(cos, -1.0, 1.0)))
    return np.stack(out, axis=-1)


def random_poses(n, seed=42, max_angle=1.2, min_bend=0.2, tree=None):
    """``n`` seeded random poses of the canonical tree, returned as a motion.

    Local rotations have uniformly random axes and angles up to
    ``max_angle``. Poses with any interior angle closer than ``min_bend``
    to straight or to fully folded are redrawn.
    """
    tree = canonical_tree() if tree is None else tree
    rng = np.random.default_rng(seed)
    J = len(tree)
    kept = []
    total = 0
    while total < n:
        m = 2 * (n - total) + 16
        axis = rng.normal(size=(m, J, 3))
        angle = rng.uniform(0.0, max_angle, size=(m, J))
        q = cm.quat_from_axis_angle(axis, angle)
        cand = SkeletonMotion(30.0, np.zeros((m, 3)), q)
        ang = interior_angles(tree, forward_kinematics(tree, cand))
        ok = np.all((ang >= min_bend) & (ang <= np.pi - min_bend), axis=1)
        kept.append(q[ok])
        total += int(ok.sum())
    quats = np.concatenate(kept)[:n]
    root = np.zeros((n, 3))
    root[:, 2] = 1.0
    return tree, SkeletonMotion(30.0, root, quats)
