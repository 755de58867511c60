"""
Test-time trajectory correction.

Minimises contact loss + beta * smoothness loss directly over the root
trajectory (and optionally per-frame foot offsets) by gradient descent
with a backtracking line search. The first and last frames act as fixed
keyframes and never move.

Foot offsets are applied to cached joint positions only; they are not
pushed back through the rotations. ``refit`` re-runs the matching on the
edited positions when joint angles are wanted.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .metrics import contact_loss, smooth_loss
from .skeleton import SkeletonMotion, canonical_tree, identity_quats, positions_of, forward_kinematics
from .skeleton import ContactPrediction

log = logging.getLogger(__name__)

TARGETS = ("root", "root+feet")


@dataclass(frozen=True)
class CorrectionConfig:
    beta: float = 0.1
    steps: int = 200
    step_size: float = 0.01
    targets: str = "root"
    tol: float = 1e-10
    max_halvings: int = 30
    # smoothing of the descent direction, meters; shrunk 10x on stalls
    smoothing: float = 1e-2
    min_smoothing: float = 1e-9

    def __post_init__(self):
        if self.beta < 0:
            raise InvalidInputError("beta must be non-negative")
        if self.steps < 1:
            raise InvalidInputError("steps must be >= 1")
        if not self.step_size > 0:
            raise InvalidInputError("step_size must be positive")
        if self.targets not in TARGETS:
            raise InvalidInputError(f"targets must be one of {TARGETS}")


@dataclass
class CorrectionResult:
    motion: SkeletonMotion
    positions: np.ndarray
    trace: list = field(default_factory=list)
    converged: bool = False
    root_offset: np.ndarray = None
    foot_offset: np.ndarray = None


class CorrectionObjective:
    """Loss and gradient over (root offset, foot offsets) for fixed input
    positions; ``loss`` and ``gradient`` take ``d_feet=None`` for root-only."""

    def __init__(self, positions, root, contacts, foot_set, beta):
        self.P = np.asarray(positions, dtype=float)
        self.root = np.asarray(root, dtype=float)
        self.c = np.asarray(getattr(contacts, "probs", contacts), dtype=float)
        self.feet = list(foot_set)
        self.beta = float(beta)
        T = self.P.shape[0]
        if T < 2:
            raise InvalidInputError("correction needs at least 2 frames")
        if self.c.shape != (T, len(self.feet)):
            raise InvalidInputError(f"contacts shape {self.c.shape} does not match motion")
        if self.root.shape != (T, 3):
            raise InvalidInputError("root must be (T, 3)")

    def apply(self, d_root, d_feet):
        P = self.P + d_root[:, None, :]
        if d_feet is not None:
            P[:, self.feet] += d_feet
        return P, self.root + d_root

    def loss(self, d_root, d_feet):
        P, r = self.apply(d_root, d_feet)
        return contact_loss(P, self.c, self.feet) + self.beta * smooth_loss(r)

    def gradient(self, d_root, d_feet, eps=0.0):
        """Exact subgradient for ``eps == 0``; otherwise the gradient of the
        objective with every norm |d| replaced by sqrt(|d|^2 + eps^2)."""
        P, r = self.apply(d_root, d_feet)
        F = P[:, self.feet]
        D = np.diff(F, axis=0)
        n = np.sqrt(np.sum(D * D, axis=-1, keepdims=True) + eps * eps)
        # subgradient 0 where a displacement vanishes
        U = np.divide(D, n, out=np.zeros_like(D), where=n > 0)
        W = U * self.c[1:, :, None]
        g_feet = np.zeros_like(F)
        g_feet[1:] += W
        g_feet[:-1] -= W
        Dr = np.diff(r, axis=0)
        nr = np.sqrt(np.sum(Dr * Dr, axis=-1, keepdims=True) + eps * eps)
        Ur = np.divide(Dr, nr, out=np.zeros_like(Dr), where=nr > 0)
        g_root = g_feet.sum(axis=1)
        g_root[1:] += self.beta * Ur
        g_root[:-1] -= self.beta * Ur
        g_root[[0, -1]] = 0.0
        g_feet[[0, -1]] = 0.0
        return g_root, (g_feet if d_feet is not None else None)


def make_objective(tree, motion, contacts, config=CorrectionConfig()):
    """Objective for ``motion``; positions are evaluated once."""
    P = positions_of(tree, motion)
    if not tree.foot_set:
        raise InvalidInputError("tree has no foot set")
    return CorrectionObjective(P, motion.root, contacts, tree.foot_set, config.beta)


def loss_gradient(tree, motion, contacts, config=CorrectionConfig(), d_root=None, d_feet=None):
    """Analytic (sub)gradient of the objective at the given offsets.

    Returns ``(grad_root (T, 3), grad_feet (T, 4, 3) or None)``; rows of the
    fixed first and last frames are zero. Offsets default to zero.
    """
    prob = make_objective(tree, motion, contacts, config)
    T = prob.P.shape[0]
    d_root = np.zeros((T, 3)) if d_root is None else np.asarray(d_root, dtype=float)
    if config.targets == "root+feet":
        d_feet = np.zeros((T, len(prob.feet), 3)) if d_feet is None else np.asarray(d_feet, dtype=float)
    else:
        d_feet = None
    return prob.gradient(d_root, d_feet)


def objective(tree, motion, contacts, config=CorrectionConfig(), d_root=None, d_feet=None):
    """Objective value at the given offsets (zero offsets by default)."""
    prob = make_objective(tree, motion, contacts, config)
    T = prob.P.shape[0]
    d_root = np.zeros((T, 3)) if d_root is None else np.asarray(d_root, dtype=float)
    return prob.loss(d_root, d_feet)


def optimize(tree, motion, contacts, config=CorrectionConfig()):
    """Descent with step halving on any loss increase.

    Every accepted step lowers the exact objective, so the loss trace
    (initial loss first) is non-increasing. Subgradient steps stall on the
    kinks of the norm terms, so the direction is the gradient of a
    slightly smoothed objective; the smoothing shrinks whenever no step
    along it decreases the exact loss.
    """
    prob = make_objective(tree, motion, contacts, config)
    T = prob.P.shape[0]
    d_root = np.zeros((T, 3))
    d_feet = np.zeros((T, len(prob.feet), 3)) if config.targets == "root+feet" else None
    loss = prob.loss(d_root, d_feet)
    trace = [loss]
    step = config.step_size
    eps = config.smoothing
    converged = False
    it = 0
    while it < config.steps:
        g_root, g_feet = prob.gradient(d_root, d_feet, eps)
        if not np.any(g_root) and (g_feet is None or not np.any(g_feet)):
            converged = True
            break
        step = min(2.0 * step, config.step_size)
        accepted = False
        for _ in range(config.max_halvings):
            new_root = d_root - step * g_root
            new_feet = None if d_feet is None else d_feet - step * g_feet
            new_loss = prob.loss(new_root, new_feet)
            if new_loss <= loss:
                accepted = True
                break
            step *= 0.5
        if not accepted or loss - new_loss <= config.tol * max(trace[0], 1e-300):
            if accepted:
                d_root, d_feet, loss = new_root, new_feet, new_loss
                trace.append(loss)
                it += 1
            if eps <= config.min_smoothing:
                converged = True
                break
            eps = max(eps * 0.1, config.min_smoothing)
            step = config.step_size
            continue
        d_root, d_feet, loss = new_root, new_feet, new_loss
        trace.append(loss)
        it += 1
    P, r = prob.apply(d_root, d_feet)
    # keep the keyframes bit-identical
    P[[0, -1]] = prob.P[[0, -1]]
    r[[0, -1]] = prob.root[[0, -1]]
    corrected = SkeletonMotion(motion.fps, r, motion.quats, P)
    log.debug("correction: %d iterations, loss %.6g -> %.6g", len(trace) - 1, trace[0], trace[-1])
    return CorrectionResult(corrected, P, trace, converged, d_root, d_feet)


def sliding_foot_fixture(frames=40, amplitude=0.05, cycles=2, fps=30.0):
    """Standing pose whose root sways sideways while every foot is marked
    in contact. The sway is zero at both ends, so a still body is reachable
    with the keyframes fixed."""
    if frames < 3:
        raise InvalidInputError("need at least 3 frames")
    tree = canonical_tree()
    quats = identity_quats(frames, len(tree))
    s = np.arange(frames) / (frames - 1)
    root = np.zeros((frames, 3))
    root[:, 0] = amplitude * np.sin(2 * np.pi * cycles * s)
    motion = SkeletonMotion(fps, root, quats)
    lift = -forward_kinematics(tree, motion)[0, list(tree.foot_set), 2].min()
    root[:, 2] = lift
    motion = SkeletonMotion(fps, root, quats)
    return tree, motion, ContactPrediction(np.ones((frames, len(tree.foot_set))))
