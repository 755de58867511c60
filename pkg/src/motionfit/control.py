"""
Control-side math for physics-based imitation: PD torques, residual
forces, the residual-force curriculum, policy state features, and a
decoupled single-joint integrator for checking the PD law.
"""

from dataclasses import dataclass

import numpy as np

from . import core_math as cm
from .errors import InvalidInputError


@dataclass(frozen=True)
class PDGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.kp, dtype=float))
        kd = np.atleast_1d(np.asarray(self.kd, dtype=float))
        if kp.shape != kd.shape:
            raise InvalidInputError("kp and kd must have the same length")
        if np.any(kp <= 0) or np.any(kd < 0):
            raise InvalidInputError("need kp > 0 and kd >= 0")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)


def pd_torque(gains, u, q, qdot):
    """tau = kp * (u - q) - kd * qdot, elementwise."""
    u, q, qdot = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (u, q, qdot))
    n = gains.kp.shape
    if not (u.shape == q.shape == qdot.shape == n):
        raise InvalidInputError(
            f"length mismatch: gains {n}, u {u.shape}, q {q.shape}, qdot {qdot.shape}")
    return gains.kp * (u - q) - gains.kd * qdot


def residual_force(kr, s_r):
    """eta = kr * s_r with policy weights kr in [0, 1]."""
    kr = np.asarray(kr, dtype=float)
    if np.any(kr < 0) or np.any(kr > 1):
        raise InvalidInputError("residual weights must lie in [0, 1]")
    if np.any(np.asarray(s_r) < 0):
        raise InvalidInputError("residual force scale must be non-negative")
    return kr * s_r


@dataclass(frozen=True)
class CurriculumParams:
    s_init: float = 220.0
    i_start: int = 100
    i_end: int = 1300
    rate: float = 0.1

    def __post_init__(self):
        if self.i_start > self.i_end:
            raise InvalidInputError("i_start must not exceed i_end")
        if self.rate < 0:
            raise InvalidInputError("rate must be non-negative")
        if self.s_init - self.rate * (self.i_end - self.i_start) < 0:
            raise InvalidInputError("schedule would drive the force scale negative")

    @property
    def s_final(self):
        return self.s_init - self.rate * (self.i_end - self.i_start)


def curriculum_scale(i, params=CurriculumParams()):
    """Residual force scale at training iteration ``i``: held at ``s_init``
    until ``i_start``, decreased by ``rate`` per iteration until ``i_end``,
    then held."""
    if i < 0:
        raise InvalidInputError("iteration must be non-negative")
    if i <= params.i_start:
        return params.s_init
    if i <= params.i_end:
        return params.s_init - params.rate * (i - params.i_start)
    return params.s_final


# ---------------------------------------------------------------------------
# state features
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseState:
    """Angles ``q``, angle velocities ``v``, head-local joint positions ``j``
    and global joint positions ``g`` for one frame."""
    q: np.ndarray
    v: np.ndarray
    j: np.ndarray
    g: np.ndarray


FEATURE_BLOCKS = ("q", "v", "j", "g", "dq1", "dj1", "dg1", "dv1", "dq2", "dj2", "dg2", "dv2")


def finite_difference(x, fps):
    """Forward differences ``(x[t+1] - x[t]) * fps`` along axis 0; the last
    frame repeats the previous velocity."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise InvalidInputError("velocities need at least 2 frames")
    v = np.empty_like(x)
    v[:-1] = np.diff(x, axis=0) * fps
    v[-1] = v[-2]
    return v


def head_local_positions(positions, head_index, yaw):
    """Positions relative to the head joint, rotated by -yaw about +z."""
    p = np.asarray(positions, dtype=float)
    rel = p - p[..., head_index:head_index + 1, :]
    r = cm.rot_z(-np.asarray(yaw, dtype=float))
    return np.einsum("...ij,...kj->...ki", r, rel)


def pose_states(tree, humanoid, head="lower_neck"):
    """Per-frame ``PoseState`` of a humanoid motion.

    ``q`` is the root euler followed by the 15 joint eulers; positions come
    from the humanoid FK. The head frame is anchored at ``head`` with the
    root heading (z angle) removed.
    """
    from .retarget import humanoid_fk

    q = np.concatenate([humanoid.root_euler[:, None], humanoid.full_eulers()], axis=1)
    q = q.reshape(humanoid.n_frames, -1)
    v = finite_difference(q, humanoid.fps)
    g = humanoid_fk(tree, humanoid)
    j = head_local_positions(g, tree.index(head), humanoid.root_euler[:, 0])
    T = humanoid.n_frames
    return [PoseState(q[t], v[t], j[t].ravel(), g[t].ravel()) for t in range(T)]


def extract_features(current, ref1, ref2):
    """Concatenate the current state with its differences to the reference
    states one and two frames ahead, in ``FEATURE_BLOCKS`` order."""
    for s in (ref1, ref2):
        for k in ("q", "v", "j", "g"):
            if np.shape(getattr(s, k)) != np.shape(getattr(current, k)):
                raise InvalidInputError(f"state block {k!r} has inconsistent shape")
    blocks = [current.q, current.v, current.j, current.g]
    for r in (ref1, ref2):
        blocks += [r.q - current.q, r.j - current.j, r.g - current.g, r.v - current.v]
    return np.concatenate([np.ravel(b) for b in blocks])


def features_at(tree, humanoid, t, states=None):
    """Features at frame ``t`` using the motion itself as the reference."""
    if not 0 <= t < humanoid.n_frames - 2:
        raise InvalidInputError(f"frame {t} needs two following frames")
    states = pose_states(tree, humanoid) if states is None else states
    return extract_features(states[t], states[t + 1], states[t + 2])


# ---------------------------------------------------------------------------
# decoupled joint
# ---------------------------------------------------------------------------

def simulate_pd_joint(gains, u, q0, qdot0, inertia, dt, steps):
    """Semi-implicit Euler for inertia * qddot = tau(q, qdot).

    Returns ``(q, qdot)`` arrays of length ``steps + 1`` including the
    initial state.
    """
    if not inertia > 0 or not dt > 0:
        raise InvalidInputError("inertia and dt must be positive")
    kp, kd = float(gains.kp[0]), float(gains.kd[0])
    q = np.empty(steps + 1)
    qd = np.empty(steps + 1)
    q[0], qd[0] = q0, qdot0
    for n in range(steps):
        tau = kp * (u - q[n]) - kd * qd[n]
        qd[n + 1] = qd[n] + dt * tau / inertia
        q[n + 1] = q[n] + dt * qd[n + 1]
    return q, qd


def pd_energy(gains, u, q, qdot, inertia):
    """Kinetic plus spring energy 0.5*I*qdot^2 + 0.5*kp*(q - u)^2."""
    kp = float(gains.kp[0])
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * inertia * qdot ** 2 + 0.5 * kp * (q - u) ** 2
