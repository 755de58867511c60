"""
Motion file I/O: skeleton JSON, a BVH subset, humanoid JSON.

Skeleton JSON::

    {"fps": 30,
     "joints": [{"name": "root", "parent": null, "offset": [x, y, z]}, ...],
     "frames": [{"root": [x, y, z], "quats": [[w, x, y, z], ...]}, ...],
     "contacts": [[p0, p1, p2, p3], ...]}          # optional

Frames may also carry ``"positions"`` (per-joint ``[x, y, z]``), written
after a correction pass that edits joint positions directly.

Humanoid JSON (radians, z-y-x)::

    {"fps": 30,
     "frames": [{"root": [x, y, z], "root_euler": [ez, ey, ex],
                 "eulers": {"left_elbow": [ez, ey, ex], ...}}, ...]}
"""

import json
import os
import re

import numpy as np

from . import core_math as cm
from .errors import InvalidInputError, ParseError, UnsupportedFormatError
from .retarget import DRIVEN_JOINTS, HumanoidMotion
from .skeleton import ContactPrediction, JointTree, SkeletonMotion


def _floats(v, n, what):
    try:
        out = [float(x) for x in v]
    except (TypeError, ValueError):
        raise ParseError(f"{what} must be a list of numbers") from None
    if len(out) != n:
        raise ParseError(f"{what} must have {n} numbers, got {len(out)}")
    return out


def _read_json(path):
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{exc.msg} (column {exc.colno})", line=exc.lineno) from None


def dumps(obj):
    """Deterministic compact-ish JSON used by every writer."""
    return json.dumps(obj, indent=None, separators=(",", ":"), allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# skeleton JSON
# ---------------------------------------------------------------------------

def skeleton_from_dict(d):
    """Returns ``(tree, motion, contacts_or_None)``."""
    if not isinstance(d, dict):
        raise ParseError("top level must be an object")
    for key in ("fps", "joints", "frames"):
        if key not in d:
            raise ParseError(f"missing key {key!r}")
    joints = d["joints"]
    if not isinstance(joints, list) or not joints:
        raise ParseError("'joints' must be a non-empty list")
    names = []
    for k, jt in enumerate(joints):
        if not isinstance(jt, dict) or "name" not in jt:
            raise ParseError(f"joint {k} lacks a name")
        names.append(str(jt["name"]))
    parents, offsets = [], []
    for k, jt in enumerate(joints):
        p = jt.get("parent")
        if isinstance(p, str):
            if p not in names:
                raise ParseError(f"joint {names[k]!r} has unknown parent {p!r}")
            p = names.index(p)
        elif p is not None and not isinstance(p, int):
            raise ParseError(f"joint {names[k]!r}: parent must be a name, index or null")
        parents.append(p)
        offsets.append(_floats(jt.get("offset"), 3, f"offset of {names[k]!r}"))
    frames = d["frames"]
    if not isinstance(frames, list) or not frames:
        raise ParseError("'frames' must be a non-empty list")
    root, quats, positions = [], [], []
    for t, fr in enumerate(frames):
        if not isinstance(fr, dict) or "root" not in fr or "quats" not in fr:
            raise ParseError(f"frame {t} needs 'root' and 'quats'")
        root.append(_floats(fr["root"], 3, f"root of frame {t}"))
        q = fr["quats"]
        if not isinstance(q, list) or len(q) != len(names):
            raise ParseError(f"frame {t} must hold {len(names)} quaternions")
        quats.append([_floats(x, 4, f"quaternion in frame {t}") for x in q])
        if "positions" in fr:
            positions.append([_floats(x, 3, f"position in frame {t}") for x in fr["positions"]])
    if positions and len(positions) != len(frames):
        raise ParseError("either every frame or no frame may carry positions")
    try:
        tree = JointTree(names, parents, np.array(offsets))
        motion = SkeletonMotion(d["fps"], np.array(root), np.array(quats),
                                np.array(positions) if positions else None)
        contacts = ContactPrediction(d["contacts"]) if d.get("contacts") is not None else None
    except (InvalidInputError, TypeError) as exc:
        raise ParseError(str(exc)) from None
    if contacts is not None and len(contacts) != motion.n_frames:
        raise ParseError("contacts must have one row per frame")
    return tree, motion, contacts


def skeleton_to_dict(tree, motion, contacts=None):
    d = {
        "fps": motion.fps,
        "joints": [
            {"name": n, "parent": (None if p < 0 else p), "offset": off.tolist()}
            for n, p, off in zip(tree.names, tree.parents, tree.offsets)
        ],
        "frames": [],
    }
    for t in range(motion.n_frames):
        fr = {"root": motion.root[t].tolist(), "quats": motion.quats[t].tolist()}
        if motion.positions is not None:
            fr["positions"] = motion.positions[t].tolist()
        d["frames"].append(fr)
    if contacts is not None:
        d["contacts"] = getattr(contacts, "probs", np.asarray(contacts)).tolist()
    return d


def save_skeleton_json(path, tree, motion, contacts=None):
    with open(path, "w") as fh:
        fh.write(dumps(skeleton_to_dict(tree, motion, contacts)))


def load_contacts(path):
    d = _read_json(path)
    if isinstance(d, dict):
        d = d.get("contacts")
    if d is None:
        raise ParseError("no contacts found")
    try:
        return ContactPrediction(d)
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from None


# ---------------------------------------------------------------------------
# BVH subset
# ---------------------------------------------------------------------------

_ROT_ORDERS = {("Z", "Y", "X"): "ZYX", ("X", "Y", "Z"): "XYZ"}
_AXIS = {"X": np.array([1.0, 0, 0]), "Y": np.array([0, 1.0, 0]), "Z": np.array([0, 0, 1.0])}


def euler_channels_to_quat(angles_deg, order):
    """Quaternion of intrinsic rotations in ``order`` (e.g. ``"ZYX"``), angles
    ``(..., 3)`` in degrees listed in the same order."""
    a = np.deg2rad(np.asarray(angles_deg, dtype=float))
    q = None
    for k, axis in enumerate(order):
        qa = cm.quat_from_axis_angle(np.broadcast_to(_AXIS[axis], a.shape[:-1] + (3,)), a[..., k])
        q = qa if q is None else cm.quat_multiply(q, qa)
    return cm.quat_normalize(q)


class _Tokens:
    def __init__(self, text):
        self.items = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, lineno))
        self.pos = 0

    def peek(self):
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    @property
    def line(self):
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 1

    def next(self, expect=None):
        if self.pos >= len(self.items):
            raise ParseError("unexpected end of file" + (f", expected {expect!r}" if expect else ""),
                             line=self.line)
        tok, _ = self.items[self.pos]
        if expect is not None and tok != expect:
            raise ParseError(f"expected {expect!r}, got {tok!r}", line=self.line)
        self.pos += 1
        return tok

    def number(self):
        line = self.line
        tok = self.next()
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected a number, got {tok!r}", line=line) from None


def parse_bvh(text, scale=1.0):
    """Parse BVH text. Root needs 3 position + 3 rotation channels, other
    joints 3 rotation channels; rotation orders ZYX and XYZ are accepted.
    End Sites are dropped. Returns ``(tree, motion)``."""
    tok = _Tokens(text)
    tok.next("HIERARCHY")
    names, parents, offsets, channels = [], [], [], []

    def joint(parent):
        kind_line = tok.line
        name = tok.next()
        tok.next("{")
        tok.next("OFFSET")
        off = [tok.number() for _ in range(3)]
        tok.next("CHANNELS")
        ch_line = tok.line
        n = tok.number()
        if n != int(n) or n < 0:
            raise ParseError("bad channel count", line=ch_line)
        chans = [tok.next() for _ in range(int(n))]
        idx = len(names)
        names.append(name)
        parents.append(parent)
        offsets.append(off)
        channels.append((chans, kind_line))
        while True:
            kw = tok.next()
            if kw == "}":
                return
            if kw == "JOINT":
                joint(idx)
            elif kw == "End":
                tok.next("Site")
                tok.next("{")
                tok.next("OFFSET")
                for _ in range(3):
                    tok.number()
                tok.next("}")
            else:
                raise ParseError(f"unexpected token {kw!r}", line=tok.line)

    tok.next("ROOT")
    joint(None)
    tok.next("MOTION")
    tok.next("Frames:")
    n_frames = tok.number()
    tok.next("Frame")
    tok.next("Time:")
    frame_time = tok.number()
    if n_frames < 1 or n_frames != int(n_frames):
        raise ParseError("frame count must be a positive integer")
    if frame_time <= 0:
        raise ParseError("frame time must be positive")

    layout = []
    for k, (chans, line) in enumerate(channels):
        pos = [c for c in chans if c.endswith("position")]
        rot = tuple(c[0] for c in chans if c.endswith("rotation"))
        if len(pos) + len(rot) != len(chans):
            raise UnsupportedFormatError(f"joint {names[k]!r}: unknown channel in {chans}")
        if k == 0 and len(pos) != 3:
            raise UnsupportedFormatError("root must carry 3 position channels")
        if k > 0 and pos:
            raise UnsupportedFormatError(f"joint {names[k]!r}: position channels only allowed on the root")
        if rot not in _ROT_ORDERS:
            raise UnsupportedFormatError(
                f"joint {names[k]!r}: rotation channel order {''.join(rot)} not supported (ZYX or XYZ)")
        layout.append(chans)

    width = sum(len(c) for c in layout)
    total = int(n_frames) * width
    values = np.array([tok.number() for _ in range(total)])
    if tok.peek() is not None:
        raise ParseError("trailing data after the last frame", line=tok.line)
    values = values.reshape(int(n_frames), width)

    T, J = values.shape[0], len(names)
    root = np.zeros((T, 3))
    quats = np.zeros((T, J, 4))
    col = 0
    for k, chans in enumerate(layout):
        block = values[:, col:col + len(chans)]
        col += len(chans)
        rot_cols = [i for i, c in enumerate(chans) if c.endswith("rotation")]
        order = "".join(chans[i][0] for i in rot_cols)
        quats[:, k] = euler_channels_to_quat(block[:, rot_cols], order)
        if k == 0:
            for i, c in enumerate(chans):
                if c.endswith("position"):
                    root[:, "XYZ".index(c[0])] = block[:, i] * scale
    tree = JointTree(names, [-1 if p is None else p for p in parents], np.array(offsets) * scale)
    motion = SkeletonMotion(1.0 / frame_time, root, quats)
    return tree, motion


def dump_bvh(tree, motion, order="ZYX", scale=1.0):
    """BVH text with the given rotation channel order (angles in degrees)."""
    if order not in _ROT_ORDERS.values():
        raise UnsupportedFormatError(f"rotation order {order!r} not supported")
    children = {i: [] for i in range(len(tree))}
    for j in range(1, len(tree)):
        children[tree.parents[j]].append(j)
    rot = " ".join(f"{a}rotation" for a in order)
    lines = ["HIERARCHY"]

    def emit(j, depth):
        pad = "  " * depth
        kw = "ROOT" if j == 0 else "JOINT"
        lines.append(f"{pad}{kw} {tree.names[j]}")
        lines.append(f"{pad}{{")
        off = " ".join(repr(float(x)) for x in tree.offsets[j] / scale)
        lines.append(f"{pad}  OFFSET {off}")
        if j == 0:
            lines.append(f"{pad}  CHANNELS 6 Xposition Yposition Zposition {rot}")
        else:
            lines.append(f"{pad}  CHANNELS 3 {rot}")
        for c in children[j]:
            emit(c, depth + 1)
        if not children[j]:
            lines.append(f"{pad}  End Site")
            lines.append(f"{pad}  {{")
            lines.append(f"{pad}    OFFSET 0.0 0.0 0.0")
            lines.append(f"{pad}  }}")
        lines.append(f"{pad}}}")

    emit(0, 0)
    lines += ["MOTION", f"Frames: {motion.n_frames}", f"Frame Time: {1.0 / motion.fps!r}"]
    mats = cm.quat_to_matrix(motion.quats)
    angles = np.rad2deg(_matrix_to_intrinsic(mats, order))
    for t in range(motion.n_frames):
        row = list(motion.root[t] / scale)
        for j in range(len(tree)):
            row.extend(angles[t, j])
        lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _matrix_to_intrinsic(m, order):
    if order == "ZYX":
        return cm.euler_zyx_from_matrix(m)
    # XYZ: R = Rx(a) Ry(b) Rz(c)
    b = np.arcsin(np.clip(m[..., 0, 2], -1.0, 1.0))
    a = np.arctan2(-m[..., 1, 2], m[..., 2, 2])
    c = np.arctan2(-m[..., 0, 1], m[..., 0, 0])
    return np.stack([a, b, c], axis=-1)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _detect_format(path, fmt):
    if fmt is not None:
        return fmt
    ext = os.path.splitext(path)[1].lower()
    if ext == ".bvh":
        return "bvh"
    if ext == ".json":
        return "json"
    raise UnsupportedFormatError(f"cannot infer format of {path!r}; pass format='json' or 'bvh'")


def load_motion(path, format=None, scale=1.0):
    """Load ``(tree, motion)`` from a skeleton JSON or BVH file."""
    fmt = _detect_format(path, format)
    if fmt == "json":
        tree, motion, _ = skeleton_from_dict(_read_json(path))
        return tree, motion
    if fmt == "bvh":
        with open(path) as fh:
            return parse_bvh(fh.read(), scale=scale)
    raise UnsupportedFormatError(f"unknown format {fmt!r}")


def load_motion_with_contacts(path, format=None, scale=1.0):
    fmt = _detect_format(path, format)
    if fmt == "json":
        return skeleton_from_dict(_read_json(path))
    tree, motion = load_motion(path, fmt, scale)
    return tree, motion, None


def convert_up_axis(motion, up):
    """Re-express a ``+up`` world in the package's +z-up world."""
    if up == "z":
        return motion
    if up != "y":
        raise InvalidInputError(f"up axis must be 'z' or 'y', got {up!r}")
    qw = cm.quat_from_axis_angle(np.array([1.0, 0, 0]), np.pi / 2)
    rw = cm.quat_to_matrix(qw)
    quats = motion.quats.copy()
    quats[:, 0] = cm.quat_normalize(cm.quat_multiply(qw, quats[:, 0]))
    pos = None if motion.positions is None else motion.positions @ rw.T
    return SkeletonMotion(motion.fps, motion.root @ rw.T, quats, pos)


# ---------------------------------------------------------------------------
# humanoid JSON
# ---------------------------------------------------------------------------

def humanoid_to_dict(h):
    frames = []
    for t in range(h.n_frames):
        frames.append({
            "root": h.root[t].tolist(),
            "root_euler": h.root_euler[t].tolist(),
            "eulers": {n: h.eulers[t, k].tolist() for k, n in enumerate(h.joint_names)},
        })
    return {"fps": h.fps, "frames": frames}


def humanoid_from_dict(d):
    if not isinstance(d, dict) or "frames" not in d or "fps" not in d:
        raise ParseError("humanoid motion needs 'fps' and 'frames'")
    frames = d["frames"]
    if not isinstance(frames, list) or not frames:
        raise ParseError("'frames' must be a non-empty list")
    first = frames[0].get("eulers") if isinstance(frames[0], dict) else None
    if not isinstance(first, dict):
        raise ParseError("frame 0 lacks an 'eulers' object")
    names = tuple(first)
    unknown = [n for n in names if n not in DRIVEN_JOINTS]
    if unknown:
        raise InvalidInputError(f"unknown humanoid joints: {unknown}")
    root, root_euler, eulers = [], [], []
    for t, fr in enumerate(frames):
        try:
            root.append(_floats(fr["root"], 3, f"root of frame {t}"))
            root_euler.append(_floats(fr.get("root_euler", [0, 0, 0]), 3, f"root_euler of frame {t}"))
            e = fr["eulers"]
            if set(e) != set(names):
                raise ParseError(f"frame {t} has a different joint set")
            eulers.append([_floats(e[n], 3, f"euler of {n!r} in frame {t}") for n in names])
        except (KeyError, TypeError):
            raise ParseError(f"frame {t} is malformed") from None
    return HumanoidMotion(d["fps"], np.array(root), np.array(root_euler), np.array(eulers), names)


def save_humanoid_json(path, h):
    with open(path, "w") as fh:
        fh.write(dumps(humanoid_to_dict(h)))


def load_humanoid_json(path):
    return humanoid_from_dict(_read_json(path))


def is_humanoid_file(path):
    """True for humanoid JSON (frames carry ``eulers``), False for skeleton files."""
    if _detect_format(path, None) == "bvh":
        return False
    d = _read_json(path)
    return isinstance(d, dict) and "joints" not in d and bool(d.get("frames")) \
        and isinstance(d["frames"][0], dict) and "eulers" in d["frames"][0]


def rescale(tree, motion, scale):
    """Lengths multiplied by ``scale`` (e.g. 0.01 for centimeter input)."""
    if scale == 1.0:
        return tree, motion
    tree = JointTree(tree.names, tree.parents, tree.offsets * scale, tree.foot_set)
    pos = None if motion.positions is None else motion.positions * scale
    return tree, SkeletonMotion(motion.fps, motion.root * scale, motion.quats, pos)
