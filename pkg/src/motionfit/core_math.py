"""
Fixed-size rotation and frame algebra.

Quaternions are stored w-first as ``(..., 4)`` arrays. Frames are 3x3
matrices whose *columns* are the x, y and z axes expressed in world
coordinates, so ``frame @ v_local`` maps a local vector to world.
Every function broadcasts over leading dimensions.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateFrameError, InvalidInputError

UNIT_TOL = 1e-6
ORTHO_TOL = 1e-6
DEGENERATE_SIN = 1e-4

_AXES = {"x": 0, "y": 1, "z": 2}


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.remainder(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w <= -np.pi, w + 2.0 * np.pi, w)


# ---------------------------------------------------------------------------
# quaternions
# ---------------------------------------------------------------------------

def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise InvalidInputError("cannot normalize a zero quaternion")
    return q / n


def quat_multiply(q1, q2):
    """Hamilton product ``q1 * q2`` (apply q2 first, then q1)."""
    w1, x1, y1, z1 = np.moveaxis(np.asarray(q1, dtype=float), -1, 0)
    w2, x2, y2, z2 = np.moveaxis(np.asarray(q2, dtype=float), -1, 0)
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def quat_to_matrix(q):
    """Rotation matrix of a unit quaternion.

    Raises InvalidInputError if any quaternion is off unit norm by more
    than 1e-6.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise InvalidInputError(f"quaternion must have 4 components, got shape {q.shape}")
    n = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(n - 1.0) > UNIT_TOL):
        raise InvalidInputError("quaternion is not unit norm")
    w, x, y, z = np.moveaxis(q, -1, 0)
    m = np.stack([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ], axis=-1)
    return m.reshape(q.shape[:-1] + (3, 3))


def quat_from_matrix(m):
    """Unit quaternion (w >= 0) of a rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    flat = m.reshape(-1, 3, 3)
    out = np.empty((flat.shape[0], 4))
    for i, r in enumerate(flat):
        tr = r[0, 0] + r[1, 1] + r[2, 2]
        if tr > 0:
            s = 2.0 * np.sqrt(tr + 1.0)
            q = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
            s = 2.0 * np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
            q = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        elif r[1, 1] > r[2, 2]:
            s = 2.0 * np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
            q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        else:
            s = 2.0 * np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
            q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        q = np.asarray(q)
        out[i] = q / np.linalg.norm(q) * (1.0 if q[0] >= 0 else -1.0)
    return out.reshape(m.shape[:-2] + (4,))


def quat_rotate(q, v):
    return np.einsum("...ij,...j->...i", quat_to_matrix(q), np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# elementary rotations / euler z-y-x
# ---------------------------------------------------------------------------

def rot_x(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([o, z, z, z, c, -s, z, s, c], axis=-1).reshape(a.shape + (3, 3))


def rot_y(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([c, z, s, z, o, z, -s, z, c], axis=-1).reshape(a.shape + (3, 3))


def rot_z(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([c, -s, z, s, c, z, z, z, o], axis=-1).reshape(a.shape + (3, 3))


def euler_zyx_to_matrix(e):
    """Rotation for intrinsic z-y-x angles ``e[..., :] = (ez, ey, ex)``: Rz @ Ry @ Rx."""
    e = np.asarray(e, dtype=float)
    return rot_z(e[..., 0]) @ rot_y(e[..., 1]) @ rot_x(e[..., 2])


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame3:
    x_axis: np.ndarray
    y_axis: np.ndarray
    z_axis: np.ndarray

    @property
    def matrix(self):
        return np.stack([self.x_axis, self.y_axis, self.z_axis], axis=-1)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(m[..., :, 0], m[..., :, 1], m[..., :, 2])


WORLD = Frame3(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))


class AxisRecipe(NamedTuple):
    """Which frame axis the primary vector defines, which axis the cross
    product ``sign * (primary x secondary)`` defines; the third axis
    completes a right-handed frame."""
    primary: str = "x"
    normal: str = "z"
    sign: int = 1


ELBOW_PARENT = AxisRecipe("x", "z", -1)


def _as_matrix(f):
    return f.matrix if isinstance(f, Frame3) else np.asarray(f, dtype=float)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def frame_axes(primary, normal, primary_axis="x", normal_axis="z"):
    """Frame matrix from a primary direction and a normal direction.

    The normal is Gram-Schmidt orthogonalised against the primary. Returns
    ``(matrix, sin)`` where ``sin`` is the sine of the angle between the
    two inputs; no degeneracy check is made here.
    """
    i, j = _AXES[primary_axis], _AXES[normal_axis]
    if i == j:
        raise InvalidInputError("primary and normal axes must differ")
    k = 3 - i - j
    p = np.asarray(primary, dtype=float)
    n = np.asarray(normal, dtype=float)
    pn = np.linalg.norm(p, axis=-1, keepdims=True)
    nn = np.linalg.norm(n, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        pu = p / pn
        nu = n / nn
        perp = nu - np.sum(nu * pu, axis=-1, keepdims=True) * pu
        sin = np.linalg.norm(perp, axis=-1)
        nu = perp / sin[..., None]
    if (k - i) % 3 == 2:  # (i, j, k) cyclic
        third = np.cross(pu, nu)
    else:
        third = np.cross(nu, pu)
    m = np.empty(p.shape[:-1] + (3, 3))
    m[..., :, i] = pu
    m[..., :, j] = nu
    m[..., :, k] = third
    sin = np.where((pn[..., 0] == 0) | (nn[..., 0] == 0), 0.0, np.nan_to_num(sin))
    return m, sin


def cross_sin(a, b):
    """Sine of the angle between a and b (0 if either is zero)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    den = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
    num = np.linalg.norm(np.cross(a, b), axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def build_orthonormal(primary, secondary, recipe=AxisRecipe()):
    """Right-handed orthonormal frame from two non-collinear vectors.

    ``recipe.primary`` axis = primary / |primary|, ``recipe.normal`` axis =
    unit(sign * primary x secondary). Raises DegenerateFrameError when the
    inputs are collinear (sin of angle < 1e-4).
    """
    primary = np.asarray(primary, dtype=float)
    secondary = np.asarray(secondary, dtype=float)
    sin = cross_sin(primary, secondary)
    if np.any(sin < DEGENERATE_SIN):
        raise DegenerateFrameError("primary and secondary vectors are collinear")
    normal = recipe.sign * np.cross(primary, secondary)
    m, _ = frame_axes(primary, normal, recipe.primary, recipe.normal)
    return Frame3.from_matrix(m)


def check_orthonormal(m, tol=ORTHO_TOL):
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise InvalidInputError(f"frame must be 3x3, got {m.shape}")
    err = np.abs(np.swapaxes(m, -1, -2) @ m - np.eye(3)).max(initial=0.0)
    if not np.isfinite(err) or err > tol:
        raise InvalidInputError(f"frame is not orthonormal (error {err:.3g})")
    if np.any(np.linalg.det(m) <= 0):
        raise InvalidInputError("frame is not right-handed")


def euler_from_frames(parent, child):
    """Intrinsic z-y-x euler angles rotating ``parent`` onto ``child``.

    Rows N, O, A are the child x, y, z axes projected on the parent axes.
    Returns an array ``(..., 3)`` ordered (ez, ey, ex), each in (-pi, pi].
    """
    p = _as_matrix(parent)
    c = _as_matrix(child)
    check_orthonormal(p)
    check_orthonormal(c)
    r = np.swapaxes(p, -1, -2) @ c
    n0, n1, n2 = r[..., 0, 0], r[..., 1, 0], r[..., 2, 0]
    o0, o1 = r[..., 0, 1], r[..., 1, 1]
    a0, a1 = r[..., 0, 2], r[..., 1, 2]
    ez = np.arctan2(n1, n0)
    cz, sz = np.cos(ez), np.sin(ez)
    ey = np.arctan2(-n2, n0 * cz + n1 * sz)
    ex = np.arctan2(-a1 * cz + a0 * sz, o1 * cz - o0 * sz)
    return wrap_angle(np.stack([ez, ey, ex], axis=-1))


def euler_zyx_from_matrix(m):
    """Euler angles of a rotation matrix relative to the world frame."""
    m = np.asarray(m, dtype=float)
    return euler_from_frames(np.broadcast_to(np.eye(3), m.shape), m)
