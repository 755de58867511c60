"""
Acceptance criteria, one test each. Every test prints a PASS/FAIL line
(collected again in the terminal summary) and asserts the criterion at
its stated tolerance and runtime budget.
"""

import json
import time

import numpy as np
from scipy.spatial.transform import Rotation

from motionfit import control as ct
from motionfit import core_math as cm
from motionfit import correct as co
from motionfit import metrics as mt
from motionfit import retarget as rt
from motionfit import skeleton as sk
from motionfit.cli import run

TWO_PI = 2 * np.pi


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_ik_round_trip_precision(report):
    with Timer() as tm:
        tree, motion = sk.random_poses(1000, seed=42)
        src = sk.forward_kinematics(tree, motion)
        h = rt.retarget_sequence(tree, motion)
        out = rt.humanoid_fk(tree, h)
        per_pose = np.linalg.norm(out - src, axis=-1).mean(axis=1) * 1000.0
    bend = sk.interior_angles(tree, src)
    ok = (per_pose.mean() < 12.0 and per_pose.max() < 15.0 and tm.seconds < 10.0
          and bend.min() >= 0.2 and bend.max() <= np.pi - 0.2)
    report("IK round trip", ok, f"mean {per_pose.mean():.3g} mm, max {per_pose.max():.3g} mm "
           f"over 1000 poses, {tm.seconds:.2f} s")
    assert ok


def wrapped_channels(rng, n_wraps, count=40, frames=120):
    """Smooth channels whose wrapped form has exactly ``n_wraps`` jumps."""
    chans = []
    while len(chans) < count:
        direction = rng.choice([-1.0, 1.0])
        start = rng.uniform(-np.pi, np.pi)
        # travel far enough to cross n_wraps odd multiples of pi, not more
        first = np.pi - start if direction > 0 else start + np.pi
        travel = first + (n_wraps - 1) * TWO_PI + rng.uniform(0.2, TWO_PI - 0.2)
        steps = rng.uniform(0.5, 1.5, frames - 1)
        steps *= travel / steps.sum()
        truth = start + direction * np.concatenate([[0.0], np.cumsum(steps)])
        raw = cm.wrap_angle(truth)
        if np.sum(np.abs(np.diff(raw)) > np.pi) == n_wraps and np.abs(np.diff(truth)).max() < 1.0:
            chans.append(raw)
    return np.stack(chans, axis=1)


def test_flip_correction_suite(report):
    rng = np.random.default_rng(42)
    lam = rt.DEFAULT_LAMBDA
    worst_delta, worst_mod, idem = 0.0, 0.0, True
    with Timer() as tm:
        for n in range(1, 6):
            raw = wrapped_channels(rng, n)
            out = rt.flip_correct(raw, lam)
            worst_delta = max(worst_delta, np.abs(np.diff(out, axis=0)).max())
            worst_mod = max(worst_mod, np.abs(cm.wrap_angle(out - raw)).max())
            idem &= np.array_equal(rt.flip_correct(out, lam), out)
    ok = worst_delta <= lam and worst_mod < 1e-12 and idem and tm.seconds < 1.0
    report("flip correction", ok, f"max delta {worst_delta:.3g} <= {lam}, mod-2pi error "
           f"{worst_mod:.2g}, idempotent {idem}, {tm.seconds:.3f} s")
    assert ok


def test_euler_extraction_round_trip(report):
    with Timer() as tm:
        parents = Rotation.random(10_000, random_state=1).as_matrix()
        children = Rotation.random(10_000, random_state=2).as_matrix()
        e = cm.euler_from_frames(parents, children)
        rebuilt = parents @ cm.euler_zyx_to_matrix(e)
        err = np.linalg.norm(rebuilt - children, axis=(1, 2)).max()
    ok = err < 1e-6 and tm.seconds < 5.0
    report("euler round trip", ok, f"max Frobenius error {err:.2g} over 1e4 rotations, "
           f"{tm.seconds:.3f} s")
    assert ok


def test_curriculum_schedule(report):
    s_init, i_start, i_end, rate = 220, 100, 1300, 0.1
    hand = {0: s_init, 100: s_init, 101: s_init - rate * (101 - i_start),
            700: s_init - rate * (700 - i_start), 1300: s_init - rate * (i_end - i_start),
            1500: s_init - rate * (i_end - i_start)}
    with Timer() as tm:
        params = ct.CurriculumParams(s_init, i_start, i_end, rate)
        got = {i: ct.curriculum_scale(i, params) for i in hand}
        # both branches meet at each breakpoint
        cont = (s_init - rate * (i_start - i_start) == got[100]
                and s_init - rate * (i_end - i_start) == got[1300]
                and ct.curriculum_scale(1301, params) == got[1300])
    ok = all(got[i] == hand[i] for i in hand) and cont and tm.seconds < 1.0
    report("curriculum schedule", ok, f"{ {i: float(v) for i, v in got.items()} }, continuous {cont}")
    assert ok


def test_pd_contract(report):
    with Timer() as tm:
        u = 0.5
        q, _ = ct.simulate_pd_joint(ct.PDGains(300, 40), u, u - 1.0, 0.0, 1.0, 1e-3, 2000)
        inside = np.flatnonzero(np.abs(q - u) < 1e-3)
        settle = int(inside[0]) if inside.size else None
        stays = settle is not None and np.all(np.abs(q[settle:] - u) < 1e-3)
        g0 = ct.PDGains(300, 0)
        q0, qd0 = ct.simulate_pd_joint(g0, u, u - 1.0, 0.0, 1.0, 1e-3, 1000)
        energy = ct.pd_energy(g0, u, q0, qd0, 1.0)
        drift = np.abs(energy - energy[0]).max() / energy[0]
    ok = settle is not None and settle <= 2000 and stays and drift < 0.01 and tm.seconds < 1.0
    report("PD contract", ok, f"settles in {settle} steps, undamped energy drift "
           f"{100 * drift:.2f}%, {tm.seconds:.3f} s")
    assert ok


def central_difference(f, x, h=1e-6):
    g = np.zeros(x.size)
    flat = x.reshape(-1)
    for i in range(x.size):
        xp, xm = flat.copy(), flat.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2 * h)
    return g.reshape(x.shape)


def test_loss_gradients(report):
    rng = np.random.default_rng(42)
    worst = 0.0
    with Timer() as tm:
        for k in range(100):
            tree, m, c = sk.synthesize_test_motion("walk", 6, seed=k)
            c = sk.ContactPrediction(rng.uniform(size=c.probs.shape))
            cfg = co.CorrectionConfig(beta=rng.uniform(0, 1), targets="root+feet")
            obj = co.make_objective(tree, m, c, cfg)
            d_root = rng.normal(scale=0.05, size=(6, 3))
            d_feet = rng.normal(scale=0.05, size=(6, 4, 3))
            g_root, g_feet = obj.gradient(d_root, d_feet)

            def f_root(x):
                x = x.copy()
                x[[0, -1]] = d_root[[0, -1]]
                return obj.loss(x, d_feet)

            def f_feet(x):
                x = x.copy()
                x[[0, -1]] = d_feet[[0, -1]]
                return obj.loss(d_root, x)

            fd = np.concatenate([central_difference(f_root, d_root).ravel(),
                                 central_difference(f_feet, d_feet).ravel()])
            an = np.concatenate([g_root.ravel(), g_feet.ravel()])
            worst = max(worst, np.abs(an - fd).max() / np.abs(fd).max())
    ok = worst < 1e-4 and tm.seconds < 5.0
    report("loss gradients", ok, f"max relative error {worst:.2g} at 100 points, {tm.seconds:.2f} s")
    assert ok


def test_correction_optimizer(report):
    with Timer() as tm:
        tree, m, c = co.sliding_foot_fixture()
        before_pos = sk.forward_kinematics(tree, m)
        res = co.optimize(tree, m, c)
        before = mt.contact_loss(before_pos, c, tree.foot_set)
        after = mt.contact_loss(res.positions, c, tree.foot_set)
    monotone = bool(np.all(np.diff(res.trace) <= 0))
    fixed = (np.array_equal(res.positions[[0, -1]], before_pos[[0, -1]])
             and np.array_equal(res.motion.root[[0, -1]], m.root[[0, -1]]))
    ok = after < 0.1 * before and monotone and fixed and tm.seconds < 10.0
    report("correction optimizer", ok, f"L_contact {before:.4g} -> {after:.3g}, monotone {monotone}, "
           f"endpoints fixed {fixed}, {tm.seconds:.2f} s")
    assert ok


def test_metric_hand_checks(report):
    feet = [0, 1, 2, 3]
    checks = {}
    p = np.zeros((6, 10, 3))
    p[:, 2, 2] = -0.01
    fp, fq, _ = mt.fp_fq_jq(p, feet)
    checks["fp"] = (fp, -0.25)
    checks["fq"] = (fq, 0.25)
    p = np.zeros((5, 7, 3))
    p[:, :, 0] = 0.002 * np.arange(5)[:, None]
    checks["sm"] = (mt.sm(p), 2.0)
    p = np.zeros((2, 4, 3))
    p[1, 0, 0] = 0.1
    checks["contact"] = (mt.contact_loss(p, np.full((2, 4), 0.5), feet), 0.05)
    r = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float)
    checks["smooth"] = (mt.smooth_loss(r), 2.0)
    hand_ok = all(abs(a - b) < 1e-12 for a, b in checks.values())

    tree, m, c = sk.synthesize_test_motion("walk", 30)
    pos, q = sk.forward_kinematics(tree, m), sk.global_quats(tree, m)
    acc = mt.l2p_l2q_mpjpe(pos, pos, q, q)
    still = np.repeat(pos[:1], 30, axis=0)
    static_losses = (mt.contact_loss(still, c, tree.foot_set), mt.smooth_loss(m.root[:1].repeat(30, 0)),
                     mt.sm(still))
    zero_ok = acc == (0.0, 0.0, 0.0) and static_losses == (0.0, 0.0, 0.0)
    ok = hand_ok and zero_ok
    report("metric hand-checks", ok, ", ".join(f"{k} {a:g}" for k, (a, _) in checks.items())
           + f"; pred = gt gives {acc}")
    assert ok


def pipeline(workdir):
    """synth -> retarget -> correct -> metrics; returns every produced byte."""
    import contextlib
    import io

    outputs = []
    steps = [
        ["synth", "--kind", "walk", "--frames", "45", "--seed", "42", "--out", f"{workdir}/walk.json"],
        ["retarget", "--in", f"{workdir}/walk.json", "--out", f"{workdir}/h.json"],
        ["correct", "--in", f"{workdir}/walk.json", "--steps", "30", "--out", f"{workdir}/c.json"],
        ["metrics", "--pred", f"{workdir}/h.json", "--gt", f"{workdir}/walk.json"],
        ["metrics", "--pred", f"{workdir}/c.json", "--gt", f"{workdir}/walk.json"],
        ["features", "--motion", f"{workdir}/h.json", "--t", "5"],
    ]
    for argv in steps:
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            assert run(argv) == 0
        outputs.append(buf.getvalue().replace(str(workdir), "<dir>").encode())
    for name in ("walk.json", "h.json", "c.json"):
        outputs.append((workdir / name).read_bytes())
    return outputs


def test_determinism(report, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    out_a, out_b = pipeline(a), pipeline(b)
    same = out_a == out_b
    json.loads(out_a[3])   # metrics output is JSON
    report("determinism", same, f"{len(out_a)} outputs, {sum(map(len, out_a))} bytes, identical {same}")
    assert same
