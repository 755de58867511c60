import numpy as np
import pytest
from hypothesis import given, strategies as st

from motionfit import correct as co
from motionfit import metrics as mt
from motionfit import skeleton as sk
from motionfit.errors import InvalidInputError


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    flat = g.reshape(-1)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        e = e.reshape(x.shape)
        flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def small_problem(seed, frames=6):
    rng = np.random.default_rng(seed)
    tree, m, c = sk.synthesize_test_motion("walk", frames, seed=seed)
    c = sk.ContactPrediction(rng.uniform(size=c.probs.shape))
    return tree, m, c, rng


@pytest.mark.parametrize("targets", ["root", "root+feet"])
def test_gradient_matches_central_differences(targets):
    tree, m, c, rng = small_problem(0)
    cfg = co.CorrectionConfig(beta=0.3, targets=targets)
    T = m.n_frames
    d_root = rng.normal(scale=0.05, size=(T, 3))
    d_feet = rng.normal(scale=0.05, size=(T, 4, 3)) if targets == "root+feet" else None
    g_root, g_feet = co.loss_gradient(tree, m, c, cfg, d_root, d_feet)

    def f_root(x):
        x = x.copy()
        x[[0, -1]] = d_root[[0, -1]]            # keyframes are not variables
        return co.objective(tree, m, c, cfg, x, d_feet)

    fd = fd_gradient(f_root, d_root)
    fd[[0, -1]] = 0.0
    assert np.abs(g_root - fd).max() / np.abs(fd).max() < 1e-4
    if d_feet is not None:
        fd_f = fd_gradient(lambda x: co.objective(tree, m, c, cfg, d_root, x), d_feet)
        fd_f[[0, -1]] = 0.0
        assert np.abs(g_feet - fd_f).max() / np.abs(fd_f).max() < 1e-4


def test_static_motion_zero_gradient():
    tree, m, c = sk.synthesize_test_motion("static", 8)
    g, _ = co.loss_gradient(tree, m, c)
    assert not g.any()


def test_zero_weights_zero_gradient(walk):
    tree, m, c = walk
    zero = sk.ContactPrediction(np.zeros_like(c.probs))
    g_root, g_feet = co.loss_gradient(tree, m, zero, co.CorrectionConfig(beta=0.0, targets="root+feet"))
    assert not g_root.any() and not g_feet.any()


def test_identity_without_contacts_or_smoothing(walk):
    tree, m, c = walk
    zero = sk.ContactPrediction(np.zeros_like(c.probs))
    res = co.optimize(tree, m, zero, co.CorrectionConfig(beta=0.0))
    assert np.array_equal(res.motion.root, m.root)
    assert np.array_equal(res.positions, sk.forward_kinematics(tree, m))


def test_static_motion_unchanged():
    tree, m, c = sk.synthesize_test_motion("static", 8)
    res = co.optimize(tree, m, c)
    assert np.array_equal(res.motion.root, m.root)
    assert all(v == res.trace[0] for v in res.trace)


@pytest.mark.parametrize("targets", ["root", "root+feet"])
def test_sliding_foot_fixture(targets):
    tree, m, c = co.sliding_foot_fixture()
    res = co.optimize(tree, m, c, co.CorrectionConfig(targets=targets))
    before = mt.contact_loss(sk.forward_kinematics(tree, m), c, tree.foot_set)
    after = mt.contact_loss(res.positions, c, tree.foot_set)
    assert after < 0.1 * before
    assert np.all(np.diff(res.trace) <= 0)
    assert np.array_equal(res.positions[[0, -1]], sk.forward_kinematics(tree, m)[[0, -1]])
    assert np.array_equal(res.motion.root[[0, -1]], m.root[[0, -1]])


@given(st.integers(0, 200), st.sampled_from(["root", "root+feet"]))
def test_trace_monotone_and_keyframes_fixed(seed, targets):
    tree, m, c, _ = small_problem(seed, frames=12)
    res = co.optimize(tree, m, c, co.CorrectionConfig(steps=25, targets=targets))
    assert np.all(np.diff(res.trace) <= 0)
    assert np.array_equal(res.motion.root[[0, -1]], m.root[[0, -1]])
    assert np.array_equal(res.positions[[0, -1]], sk.forward_kinematics(tree, m)[[0, -1]])


def test_large_beta_straightens_root(walk):
    tree, m, c = walk
    zero = sk.ContactPrediction(np.zeros_like(c.probs))
    res = co.optimize(tree, m, zero, co.CorrectionConfig(beta=1.0, steps=500))
    chord = np.linalg.norm(m.root[-1] - m.root[0])
    assert mt.smooth_loss(res.motion.root) < chord * (1 + 1e-4)
    assert mt.smooth_loss(res.motion.root) < mt.smooth_loss(m.root)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        co.CorrectionConfig(steps=0)
    with pytest.raises(InvalidInputError):
        co.CorrectionConfig(step_size=0)
    with pytest.raises(InvalidInputError):
        co.CorrectionConfig(targets="hands")
    with pytest.raises(InvalidInputError):
        co.CorrectionConfig(beta=-1)


def test_contacts_shape_checked(walk):
    tree, m, _ = walk
    with pytest.raises(InvalidInputError):
        co.optimize(tree, m, np.ones((3, 4)))
