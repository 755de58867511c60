"""
Physical-plausibility losses and evaluation metrics.

Positions are ``(T, J, 3)`` arrays in meters with +z up unless ``up``
says otherwise. Reported units: FP in centimeters, SM and MPJPE in
millimeters, L2P in meters, L2Q dimensionless.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError

_UP = {"x": 0, "y": 1, "z": 2}


def _positions(p, min_frames=1):
    p = np.asarray(p, dtype=float)
    if p.ndim != 3 or p.shape[-1] != 3:
        raise InvalidInputError(f"positions must be (T, J, 3), got {p.shape}")
    if p.shape[0] < min_frames:
        raise InvalidInputError(f"need at least {min_frames} frames, got {p.shape[0]}")
    return p


def _contact_probs(contacts):
    probs = getattr(contacts, "probs", contacts)
    return np.asarray(probs, dtype=float)


def contact_loss(positions, contacts, foot_set):
    """Contact-weighted foot travel.

    Sum over t = 0..T-2 and feet of |p[t+1] - p[t]| * contact[t+1], with
    |.| the Euclidean norm. ``contacts`` is ``(T, len(foot_set))`` in the
    order of ``foot_set``.
    """
    p = _positions(positions)
    c = _contact_probs(contacts)
    foot_set = list(foot_set)
    if c.shape != (p.shape[0], len(foot_set)):
        raise InvalidInputError(
            f"contacts shape {c.shape} does not match ({p.shape[0]}, {len(foot_set)})")
    feet = p[:, foot_set]
    step = np.linalg.norm(np.diff(feet, axis=0), axis=-1)
    return float(np.sum(step * c[1:]))


def smooth_loss(root):
    """Root path length: sum of |r[t+1] - r[t]|."""
    r = np.asarray(root, dtype=float)
    if r.ndim != 2 or r.shape[0] < 2:
        raise InvalidInputError("smooth loss needs a (T>=2, 3) root trajectory")
    return float(np.sum(np.linalg.norm(np.diff(r, axis=0), axis=-1)))


def test_loss(positions, root, contacts, foot_set, beta=0.1):
    """Self-supervised objective: contact loss + beta * smoothness loss."""
    if beta < 0:
        raise InvalidInputError("beta must be non-negative")
    return contact_loss(positions, contacts, foot_set) + beta * smooth_loss(root)


test_loss.__test__ = False  # keep pytest from collecting it


def fp_fq_jq(positions, foot_set, eps_pen=0.0, up="z", ground=0.0):
    """Foot penetration depth (cm, <= 0), foot penetration frequency and
    all-joint penetration frequency against the ground plane."""
    p = _positions(positions)
    h = p[..., _UP[up]] - ground
    feet = h[:, list(foot_set)]
    fp = float(np.mean(np.minimum(feet, 0.0))) * 100.0
    fq = float(np.mean(feet < -eps_pen))
    jq = float(np.mean(h < -eps_pen))
    return fp, fq, jq


def sm(positions):
    """Mean joint displacement between adjacent frames, in millimeters."""
    p = _positions(positions, min_frames=2)
    return float(np.mean(np.linalg.norm(np.diff(p, axis=0), axis=-1))) * 1000.0


def align_quat_signs(pred, ref):
    """Flip each predicted quaternion onto the reference's hemisphere."""
    pred = np.asarray(pred, dtype=float)
    dot = np.sum(pred * np.asarray(ref, dtype=float), axis=-1, keepdims=True)
    return np.where(dot < 0, -pred, pred)


def l2p_l2q_mpjpe(pred_pos, gt_pos, pred_quats=None, gt_quats=None):
    """Accuracy against ground truth.

    L2P and L2Q are the L2 norm of the whole-pose difference vector
    (all joints concatenated), averaged over frames; quaternion signs are
    aligned per joint to the ground truth first. MPJPE is the mean
    per-joint Euclidean error in millimeters. L2Q is NaN when no
    quaternions are given.
    """
    a = _positions(pred_pos)
    b = _positions(gt_pos)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    T = a.shape[0]
    l2p = float(np.mean(np.linalg.norm(d.reshape(T, -1), axis=1)))
    mpjpe = float(np.mean(np.linalg.norm(d, axis=-1))) * 1000.0
    if pred_quats is None or gt_quats is None:
        return l2p, float("nan"), mpjpe
    qa = np.asarray(pred_quats, dtype=float)
    qb = np.asarray(gt_quats, dtype=float)
    if qa.shape != qb.shape or qa.shape[:2] != a.shape[:2]:
        raise InvalidInputError(f"quaternion shape mismatch: {qa.shape} vs {qb.shape}")
    dq = align_quat_signs(qa, qb) - qb
    l2q = float(np.mean(np.linalg.norm(dq.reshape(T, -1), axis=1)))
    return l2p, l2q, mpjpe


@dataclass
class MetricReport:
    fp: float = None
    fq: float = None
    jq: float = None
    sm: float = None
    l2p: float = None
    l2q: float = None
    mpjpe: float = None
    l_contact: float = None
    l_smooth: float = None
    l_test: float = None

    def to_dict(self):
        """Key order is the field order; missing metrics are dropped."""
        return {k: v for k, v in asdict(self).items() if v is not None}


def evaluate(positions, foot_set, root=None, gt_positions=None, pred_quats=None,
             gt_quats=None, contacts=None, eps_pen=0.0, up="z", beta=0.1):
    """Every metric computable from the given inputs. ``l_test`` is
    ``l_contact + beta * l_smooth``."""
    p = _positions(positions)
    rep = MetricReport()
    if foot_set:
        rep.fp, rep.fq, rep.jq = fp_fq_jq(p, foot_set, eps_pen, up)
    if p.shape[0] >= 2:
        rep.sm = sm(p)
        rep.l_smooth = smooth_loss(p[:, 0] if root is None else root)
    if gt_positions is not None:
        rep.l2p, l2q, rep.mpjpe = l2p_l2q_mpjpe(p, gt_positions, pred_quats, gt_quats)
        rep.l2q = None if np.isnan(l2q) else l2q
    if contacts is not None:
        rep.l_contact = contact_loss(p, contacts, foot_set)
        if rep.l_smooth is not None:
            rep.l_test = rep.l_contact + beta * rep.l_smooth
    return rep
