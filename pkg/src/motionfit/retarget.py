"""
Analytical skeleton-to-humanoid matching.

Every driven joint rotates a *child* body segment relative to a *parent*
segment. Each segment carries a coordinate frame built from bone vectors
of the current pose (``SEGMENT_RECIPES``); a joint's z-y-x euler angles
are read off the parent and child frames. Adjacent joints share frames
(the child frame of the shoulder is the parent frame of the elbow, and so
on), so the frames are evaluated once per segment.

Bone vectors are written ``bone(a, b) = p[b] - p[a]``, pointing from
joint ``a`` to joint ``b``.

The humanoid model has the skeleton's bone lengths but its own rest
orientation: at zero angles every segment is aligned with the pelvis
frame. Each bone is stored in the frame of the segment that carries it,
so ``humanoid_fk`` inverts the matching exactly whenever no frame needed
the degenerate-limb fallback.
"""

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import numpy as np

from . import core_math as cm
from .errors import DegenerateFrameError, InvalidInputError
from .skeleton import positions_of, rest_positions

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 5.0
UP = np.array([0.0, 0.0, 1.0])


class SegmentRecipe(NamedTuple):
    """``primary_axis`` = unit(bone ``primary``); ``normal_axis`` =
    unit(``cross_a`` x ``cross_b``), orthogonalised against the primary.
    A leading ``-`` on a bone name negates it."""
    primary_axis: str
    primary: tuple
    normal_axis: str
    cross_a: tuple
    cross_b: tuple


def _r(pa, primary, na, a, b):
    return SegmentRecipe(pa, primary, na, a, b)


SEGMENT_RECIPES = {
    # hips line and hip-triangle normal
    "pelvis": _r("x", ("right_hip", "left_hip"), "y",
                 ("root", "right_hip"), ("root", "left_hip")),
    "mid_spine": _r("y", ("mid_spine", "thorax"), "x",
                    ("mid_spine", "thorax"), ("mid_spine", "root")),
    "thorax": _r("y", ("thorax", "lower_neck"), "x",
                 ("thorax", "lower_neck"), ("thorax", "mid_spine")),
    "lower_neck": _r("x", ("right_clavicle", "left_clavicle"), "z",
                     ("lower_neck", "left_clavicle"), ("lower_neck", "right_clavicle")),
    "left_clavicle": _r("x", ("left_clavicle", "left_shoulder"), "z",
                        ("left_clavicle", "mid_spine"), ("left_clavicle", "left_shoulder")),
    "left_shoulder": _r("x", ("left_shoulder", "left_elbow"), "z",
                        ("-", "left_shoulder", "left_elbow"), ("left_elbow", "left_wrist")),
    # elbow hinge: the forearm frame keeps the upper-arm z axis
    "left_elbow": _r("x", ("left_elbow", "left_wrist"), "z",
                     ("-", "left_shoulder", "left_elbow"), ("left_elbow", "left_wrist")),
    "right_clavicle": _r("x", ("right_shoulder", "right_clavicle"), "z",
                         ("right_clavicle", "mid_spine"), ("right_shoulder", "right_clavicle")),
    "right_shoulder": _r("x", ("right_elbow", "right_shoulder"), "z",
                         ("right_elbow", "right_wrist"), ("right_elbow", "right_shoulder")),
    "right_elbow": _r("x", ("right_wrist", "right_elbow"), "z",
                      ("right_elbow", "right_wrist"), ("right_elbow", "right_shoulder")),
    "left_hip": _r("y", ("left_knee", "left_hip"), "z",
                   ("left_hip", "right_hip"), ("-", "left_knee", "left_hip")),
    "left_knee": _r("y", ("left_ankle", "left_knee"), "x",
                    ("-", "left_ankle", "left_knee"), ("left_knee", "left_hip")),
    # the foot bone is kept exact; the shin only fixes the roll
    "left_ankle": _r("z", ("left_ankle", "left_foot"), "x",
                     ("left_ankle", "left_knee"), ("left_ankle", "left_foot")),
    "right_hip": _r("y", ("right_knee", "right_hip"), "z",
                    ("-", "right_knee", "right_hip"), ("right_hip", "left_hip")),
    "right_knee": _r("y", ("right_ankle", "right_knee"), "x",
                     ("-", "right_ankle", "right_knee"), ("right_knee", "right_hip")),
    "right_ankle": _r("z", ("right_ankle", "right_foot"), "x",
                      ("right_ankle", "right_knee"), ("right_ankle", "right_foot")),
}

SEGMENTS = tuple(SEGMENT_RECIPES)

# driven joint -> (parent segment, child segment), in evaluation order
JOINT_RECIPES = {
    "mid_spine": ("pelvis", "mid_spine"),
    "thorax": ("mid_spine", "thorax"),
    "lower_neck": ("thorax", "lower_neck"),
    "left_clavicle": ("lower_neck", "left_clavicle"),
    "left_shoulder": ("left_clavicle", "left_shoulder"),
    "left_elbow": ("left_shoulder", "left_elbow"),
    "right_clavicle": ("lower_neck", "right_clavicle"),
    "right_shoulder": ("right_clavicle", "right_shoulder"),
    "right_elbow": ("right_shoulder", "right_elbow"),
    "left_hip": ("pelvis", "left_hip"),
    "left_knee": ("left_hip", "left_knee"),
    "left_ankle": ("left_knee", "left_ankle"),
    "right_hip": ("pelvis", "right_hip"),
    "right_knee": ("right_hip", "right_knee"),
    "right_ankle": ("right_knee", "right_ankle"),
}

DRIVEN_JOINTS = tuple(JOINT_RECIPES)

# joints whose position is fixed by some segment; the root is the translation
REQUIRED_JOINTS = (
    "root", "left_hip", "left_knee", "left_ankle", "left_foot",
    "right_hip", "right_knee", "right_ankle", "right_foot",
    "mid_spine", "thorax", "lower_neck",
    "left_clavicle", "left_shoulder", "left_elbow", "left_wrist",
    "right_clavicle", "right_shoulder", "right_elbow", "right_wrist",
)


def carrier_segment(tree, j):
    """Segment whose orientation carries the bone ending at joint ``j``."""
    parent = tree.names[tree.parents[j]]
    return "pelvis" if parent == "root" else parent


def own_segment(tree, j):
    """Segment a joint rotates: its own, the pelvis for the root, the
    parent's segment for leaf joints."""
    name = tree.names[j]
    if name == "root":
        return "pelvis"
    if name in SEGMENT_RECIPES:
        return name
    return carrier_segment(tree, j)


def _check_tree(tree):
    missing = [n for n in REQUIRED_JOINTS if n not in tree.names]
    if missing:
        raise InvalidInputError(f"tree lacks joints required for matching: {missing}")
    for j in range(1, len(tree)):
        seg = carrier_segment(tree, j)
        if seg not in SEGMENT_RECIPES:
            raise InvalidInputError(f"joint {tree.names[j]!r} hangs off a joint with no segment frame")


def _bone(P, idx, bone):
    if bone[0] == "-":
        return -_bone(P, idx, bone[1:])
    a, b = bone
    return P[..., idx[b], :] - P[..., idx[a], :]


def _segment_inputs(P, idx, recipe):
    primary = _bone(P, idx, recipe.primary)
    a = _bone(P, idx, recipe.cross_a)
    b = _bone(P, idx, recipe.cross_b)
    return primary, a, b


def segment_frames(tree, positions, fallback=True):
    """Frames of every segment for a ``(T, J, 3)`` position array.

    Returns ``(mats, n_fallback)`` with ``mats`` of shape ``(T, S, 3, 3)``
    in ``SEGMENTS`` order. A frame whose cross-product operands are
    collinear (sine below 1e-4) takes the previous frame's normal axis, or
    world up projected off the primary axis at the first frame. With
    ``fallback=False`` or when the fallback itself degenerates,
    DegenerateFrameError is raised.
    """
    _check_tree(tree)
    P = np.asarray(positions, dtype=float)
    if P.ndim == 2:
        P = P[None]
    if P.shape[1:] != (len(tree), 3):
        raise InvalidInputError(f"positions must be (T, {len(tree)}, 3), got {P.shape}")
    idx = {n: i for i, n in enumerate(tree.names)}
    T = P.shape[0]
    mats = np.empty((T, len(SEGMENTS), 3, 3))
    n_fallback = 0
    for s, name in enumerate(SEGMENTS):
        rec = SEGMENT_RECIPES[name]
        primary, a, b = _segment_inputs(P, idx, rec)
        m, sin2 = cm.frame_axes(primary, np.cross(a, b), rec.primary_axis, rec.normal_axis)
        bad = ((cm.cross_sin(a, b) < cm.DEGENERATE_SIN) | (sin2 < cm.DEGENERATE_SIN)
               | (np.linalg.norm(primary, axis=-1) == 0))
        mats[:, s] = m
        if not bad.any():
            continue
        if not fallback:
            raise DegenerateFrameError(f"degenerate frame for segment {name!r}")
        if np.any(np.linalg.norm(primary[bad], axis=-1) == 0):
            raise DegenerateFrameError(f"zero-length primary bone for segment {name!r}")
        na = cm._AXES[rec.normal_axis]
        for t in np.flatnonzero(bad):
            hint = mats[t - 1, s, :, na] if t > 0 else UP
            m_t, sin = cm.frame_axes(primary[t], hint, rec.primary_axis, rec.normal_axis)
            if sin < cm.DEGENERATE_SIN:
                raise DegenerateFrameError(
                    f"segment {name!r} at frame {t}: fallback axis is collinear with the bone")
            mats[t, s] = m_t
            n_fallback += 1
    if n_fallback:
        log.info("degenerate-limb fallback applied to %d segment frames", n_fallback)
    return mats, n_fallback


def joint_frames(tree, positions, joint):
    """Parent and child ``Frame3`` of one driven joint for a single pose.

    Raises DegenerateFrameError for straight limbs; no fallback is applied.
    """
    if joint not in JOINT_RECIPES:
        raise InvalidInputError(f"no recipe for joint {joint!r}")
    _check_tree(tree)
    P = np.asarray(positions, dtype=float)
    idx = {n: i for i, n in enumerate(tree.names)}
    out = []
    for seg in JOINT_RECIPES[joint]:
        rec = SEGMENT_RECIPES[seg]
        primary, a, b = _segment_inputs(P, idx, rec)
        if cm.cross_sin(a, b) < cm.DEGENERATE_SIN:
            raise DegenerateFrameError(f"degenerate frame for segment {seg!r}")
        m, sin = cm.frame_axes(primary, np.cross(a, b), rec.primary_axis, rec.normal_axis)
        if sin < cm.DEGENERATE_SIN:
            raise DegenerateFrameError(f"degenerate frame for segment {seg!r}")
        out.append(cm.Frame3.from_matrix(m))
    return tuple(out)


def _joint_eulers(mats):
    seg = {n: i for i, n in enumerate(SEGMENTS)}
    parents = mats[:, [seg[p] for p, _ in JOINT_RECIPES.values()]]
    children = mats[:, [seg[c] for _, c in JOINT_RECIPES.values()]]
    return cm.euler_from_frames(parents, children)


def retarget_frame(tree, positions):
    """Raw euler angles ``(15, 3)`` of the driven joints for one pose,
    ordered as ``DRIVEN_JOINTS``; components in (-pi, pi]."""
    mats, _ = segment_frames(tree, np.asarray(positions, dtype=float)[None])
    return _joint_eulers(mats)[0]


def flip_correct(sequence, lam=DEFAULT_LAMBDA):
    """Remove 2*pi jumps from euler channels, left to right in time.

    ``sequence`` has time on axis 0; every other index is an independent
    channel. A value that jumps by more than ``lam`` from the
    already-corrected previous value is shifted by +2*pi when the previous
    value is positive and by -2*pi otherwise, repeatedly while the shift
    brings it closer. Output equals input modulo 2*pi.
    """
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    x = np.array(sequence, dtype=float)
    if x.ndim == 0 or x.shape[0] == 0:
        raise InvalidInputError("sequence must be non-empty")
    two_pi = 2.0 * np.pi
    out = x.copy()
    for t in range(1, x.shape[0]):
        prev = out[t - 1]
        k = np.zeros(x.shape[1:])
        step = np.where(prev > 0, 1.0, -1.0)
        while True:
            cur = x[t] + two_pi * k
            gap = np.abs(cur - prev)
            move = (gap > lam) & (np.abs(cur + two_pi * step - prev) < gap)
            if not move.any():
                break
            k = k + np.where(move, step, 0.0)
        out[t] = x[t] + two_pi * k
    return out


def load_joint_limits(path=None):
    """Per-joint euler limits ``(15, 3, 2)`` in radians, from a JSON table in
    degrees (the packaged permissive defaults if ``path`` is None)."""
    if path is None:
        text = resources.files("motionfit").joinpath("data/joint_limits.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    table = json.loads(text)
    default = np.asarray(table["default"], dtype=float)
    limits = np.broadcast_to(default, (len(DRIVEN_JOINTS), 3, 2)).copy()
    for name, rng in table.get("joints", {}).items():
        if name not in JOINT_RECIPES:
            raise InvalidInputError(f"limit table names unknown joint {name!r}")
        limits[DRIVEN_JOINTS.index(name)] = rng
    return np.deg2rad(limits)


@dataclass(frozen=True)
class HumanoidMotion:
    """Root translation ``(T, 3)``, root euler ``(T, 3)`` and driven-joint
    eulers ``(T, 15, 3)``, all angles z-y-x in radians."""

    fps: float
    root: np.ndarray
    root_euler: np.ndarray
    eulers: np.ndarray
    joint_names: tuple = DRIVEN_JOINTS
    limits: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        root = np.array(self.root, dtype=float)
        root_euler = np.array(self.root_euler, dtype=float)
        eulers = np.array(self.eulers, dtype=float)
        names = tuple(self.joint_names)
        unknown = [n for n in names if n not in JOINT_RECIPES]
        if unknown:
            raise InvalidInputError(f"unknown humanoid joints: {unknown}")
        T = root.shape[0]
        if root.shape != (T, 3) or root_euler.shape != (T, 3) or eulers.shape != (T, len(names), 3):
            raise InvalidInputError("humanoid motion arrays disagree in shape")
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "root_euler", root_euler)
        object.__setattr__(self, "eulers", eulers)
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def n_frames(self):
        return self.root.shape[0]

    def full_eulers(self):
        """Eulers for all 15 driven joints in ``DRIVEN_JOINTS`` order; joints
        absent from the motion get zero angles."""
        if self.joint_names == DRIVEN_JOINTS:
            return self.eulers
        out = np.zeros((self.n_frames, len(DRIVEN_JOINTS), 3))
        for k, n in enumerate(self.joint_names):
            out[:, DRIVEN_JOINTS.index(n)] = self.eulers[:, k]
        return out

    def limit_violations(self):
        """Boolean ``(T, 15, 3)``: angle (wrapped to (-pi, pi]) outside its
        limit range. Limits are reported, never enforced."""
        limits = self.limits if self.limits is not None else load_joint_limits()
        e = cm.wrap_angle(self.full_eulers())
        return (e < limits[..., 0]) | (e > limits[..., 1])


def retarget_positions(tree, positions, root=None, root_quats=None, fps=30.0,
                       lam=DEFAULT_LAMBDA, limits=None):
    """Match a ``(T, J, 3)`` position sequence to humanoid angles.

    The root orientation comes from ``root_quats`` when given, otherwise
    from the pelvis frame relative to the rest pose.
    """
    P = np.asarray(positions, dtype=float)
    mats, _ = segment_frames(tree, P)
    raw = _joint_eulers(mats)
    if root_quats is not None:
        r_root = cm.quat_to_matrix(root_quats)
    else:
        rest, _ = segment_frames(tree, rest_positions(tree)[None], fallback=False)
        r_root = mats[:, 0] @ rest[0, 0].T
    root_euler = cm.euler_zyx_from_matrix(r_root)
    eulers = flip_correct(raw, lam)
    root_euler = flip_correct(root_euler, lam)
    root = P[:, 0] if root is None else np.asarray(root, dtype=float)
    return HumanoidMotion(fps, root, root_euler, eulers, DRIVEN_JOINTS, limits)


def retarget_sequence(tree, motion, lam=DEFAULT_LAMBDA, limits=None):
    """Skeleton motion to humanoid motion: per-frame matching, then flip
    correction of every channel. Root translation is copied through and the
    root orientation is the skeleton root quaternion as z-y-x eulers."""
    P = positions_of(tree, motion)
    return retarget_positions(tree, P, root=motion.root, root_quats=motion.quats[:, 0],
                              fps=motion.fps, lam=lam, limits=limits)


class HumanoidModel:
    """Humanoid built from a skeleton tree: same joints and bone lengths,
    segment frames aligned with the pelvis at zero angles."""

    def __init__(self, tree):
        _check_tree(tree)
        self.tree = tree
        rest = rest_positions(tree)
        mats, _ = segment_frames(tree, rest[None], fallback=False)
        self.rest_frames = mats[0]
        seg = {n: i for i, n in enumerate(SEGMENTS)}
        self.carrier = [None] + [seg[carrier_segment(tree, j)] for j in range(1, len(tree))]
        self.local_offsets = np.zeros((len(tree), 3))
        for j in range(1, len(tree)):
            bone = rest[j] - rest[tree.parents[j]]
            self.local_offsets[j] = self.rest_frames[self.carrier[j]].T @ bone
        self._joint_segs = [(seg[p], seg[c]) for p, c in JOINT_RECIPES.values()]

    def segment_orientations(self, root_euler, eulers):
        """World frames ``(T, S, 3, 3)`` of all segments."""
        root_euler = np.asarray(root_euler, dtype=float)
        eulers = np.asarray(eulers, dtype=float)
        T = root_euler.shape[0]
        W = np.empty((T, len(SEGMENTS), 3, 3))
        W[:, 0] = cm.euler_zyx_to_matrix(root_euler) @ self.rest_frames[0]
        R = cm.euler_zyx_to_matrix(eulers)
        for k, (p, c) in enumerate(self._joint_segs):
            W[:, c] = W[:, p] @ R[:, k]
        return W

    def fk(self, root, root_euler, eulers):
        W = self.segment_orientations(root_euler, eulers)
        root = np.asarray(root, dtype=float)
        pos = np.empty((root.shape[0], len(self.tree), 3))
        pos[:, 0] = root
        for j in range(1, len(self.tree)):
            pos[:, j] = pos[:, self.tree.parents[j]] + W[:, self.carrier[j]] @ self.local_offsets[j]
        return pos


def humanoid_fk(tree, humanoid):
    """Joint positions ``(T, J, 3)`` of the humanoid posed by ``humanoid``."""
    model = HumanoidModel(tree)
    return model.fk(humanoid.root, humanoid.root_euler, humanoid.full_eulers())


def _segment_rotation_quats(tree, mats, rest_mats):
    seg = {n: i for i, n in enumerate(SEGMENTS)}
    cols = [seg[own_segment(tree, j)] for j in range(len(tree))]
    rel = mats[:, cols] @ np.swapaxes(rest_mats[cols], -1, -2)
    return cm.quat_from_matrix(rel)


def positional_global_quats(tree, positions):
    """Per-joint world rotations ``(T, J, 4)`` of each joint's segment frame
    relative to its rest frame, computed from positions alone."""
    mats, _ = segment_frames(tree, positions)
    rest, _ = segment_frames(tree, rest_positions(tree)[None], fallback=False)
    return _segment_rotation_quats(tree, mats, rest[0])


def humanoid_global_quats(tree, humanoid):
    """Per-joint world rotations ``(T, J, 4)`` of the humanoid segments
    relative to the skeleton rest pose (comparable with
    ``positional_global_quats`` of the source positions)."""
    model = HumanoidModel(tree)
    W = model.segment_orientations(humanoid.root_euler, humanoid.full_eulers())
    return _segment_rotation_quats(tree, W, model.rest_frames)
