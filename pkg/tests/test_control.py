import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from motionfit import control as ct
from motionfit import retarget as rt
from motionfit import skeleton as sk
from motionfit.errors import InvalidInputError

DATA = Path(__file__).parent / "data"


def test_pd_examples():
    g = ct.PDGains([300.0], [30.0])
    assert ct.pd_torque(g, 0.5, 0.2, 1.0)[0] == pytest.approx(60.0, abs=1e-12)
    assert ct.pd_torque(ct.PDGains(1, 0), 1, 0, 0)[0] == 1.0
    assert ct.pd_torque(g, 0.3, 0.3, 0.0)[0] == 0.0


def test_pd_length_mismatch():
    with pytest.raises(InvalidInputError):
        ct.pd_torque(ct.PDGains([1, 2], [0, 0]), [1], [0, 0], [0, 0])
    with pytest.raises(InvalidInputError):
        ct.PDGains([0.0], [1.0])


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 2))
def test_pd_linearity(u, q, qd, s):
    g = ct.PDGains([120.0], [7.0])
    base = ct.pd_torque(g, u, q, qd)
    assert np.isclose(ct.pd_torque(g, q + s * (u - q), q, 0) - ct.pd_torque(g, q, q, 0),
                      s * (ct.pd_torque(g, u, q, 0)))
    assert np.isclose(ct.pd_torque(g, u, q, s * qd) - ct.pd_torque(g, u, q, 0),
                      s * (base - ct.pd_torque(g, u, q, 0)))


def test_residual_force():
    assert ct.residual_force(0.0, 220.0) == 0.0
    assert ct.residual_force(1.0, 220.0) == 220.0
    assert ct.residual_force(0.5, 100.0) == 50.0
    with pytest.raises(InvalidInputError):
        ct.residual_force(1.5, 10.0)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.floats(0, 500))
def test_residual_force_bounded(kr, s):
    assert np.max(np.abs(ct.residual_force(kr, s))) <= s


def test_curriculum_examples():
    assert ct.curriculum_scale(0) == 220
    assert ct.curriculum_scale(700) == pytest.approx(160.0, abs=1e-12)
    assert ct.curriculum_scale(1500) == pytest.approx(100.0, abs=1e-12)


@given(st.integers(0, 3000), st.integers(0, 3000))
def test_curriculum_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert ct.curriculum_scale(hi) <= ct.curriculum_scale(lo)


def test_curriculum_params_validated():
    with pytest.raises(InvalidInputError):
        ct.CurriculumParams(i_start=10, i_end=5)
    with pytest.raises(InvalidInputError):
        ct.CurriculumParams(s_init=10, rate=1.0)


def test_equilibrium_is_constant():
    q, qd = ct.simulate_pd_joint(ct.PDGains(300, 40), 0.7, 0.7, 0.0, 1.0, 1e-3, 100)
    assert np.all(q == 0.7) and np.all(qd == 0.0)


def test_overdamped_converges_monotonically():
    g = ct.PDGains(300, 40)
    q, _ = ct.simulate_pd_joint(g, 1.0, 0.0, 0.0, 1.0, 1e-3, 2000)
    assert abs(q[-1] - 1.0) < 1e-3
    assert np.all(np.diff(q) >= 0)


def test_undamped_energy_conserved():
    g = ct.PDGains(300, 0)
    q, qd = ct.simulate_pd_joint(g, 0.5, 0.0, 0.0, 1.0, 1e-3, 1000)
    e = ct.pd_energy(g, 0.5, q, qd, 1.0)
    assert np.abs(e - e[0]).max() / e[0] < 0.01


def test_integrator_inputs_validated():
    with pytest.raises(InvalidInputError):
        ct.simulate_pd_joint(ct.PDGains(1, 1), 0, 0, 0, 0.0, 1e-3, 10)


def make_state(rng, n):
    return ct.PoseState(*(rng.normal(size=(n, 3)) for _ in range(4)))


def test_features_block_order(rng):
    cur, r1, r2 = (make_state(rng, 5) for _ in range(3))
    f = ct.extract_features(cur, r1, r2).reshape(12, 5, 3)
    expect = [cur.q, cur.v, cur.j, cur.g,
              r1.q - cur.q, r1.j - cur.j, r1.g - cur.g, r1.v - cur.v,
              r2.q - cur.q, r2.j - cur.j, r2.g - cur.g, r2.v - cur.v]
    for block, e in zip(f, expect):
        assert np.array_equal(block, e)


def test_features_zero_differences_for_same_state(rng):
    s = make_state(rng, 4)
    f = ct.extract_features(s, s, s).reshape(12, -1)
    assert not f[4:].any()


def test_features_permutation_equivariant(rng):
    cur, r1, r2 = (make_state(rng, 6) for _ in range(3))
    perm = rng.permutation(6)

    def permuted(s):
        return ct.PoseState(s.q[perm], s.v[perm], s.j[perm], s.g[perm])

    a = ct.extract_features(cur, r1, r2).reshape(12, 6, 3)
    b = ct.extract_features(permuted(cur), permuted(r1), permuted(r2)).reshape(12, 6, 3)
    assert np.array_equal(a[:, perm], b)


def test_features_shape_mismatch(rng):
    with pytest.raises(InvalidInputError):
        ct.extract_features(make_state(rng, 3), make_state(rng, 4), make_state(rng, 3))


def test_features_golden_and_constant_length():
    tree, m, _ = sk.synthesize_test_motion("walk", 8, seed=42)
    h = rt.retarget_sequence(tree, m)
    golden = json.loads((DATA / "features_walk.json").read_text())["features"]
    assert np.allclose(ct.features_at(tree, h, 2), golden, atol=1e-9)
    states = ct.pose_states(tree, h)
    lengths = {len(ct.features_at(tree, h, t, states)) for t in range(h.n_frames - 2)}
    assert lengths == {6 * 16 * 3 + 6 * 20 * 3}
    with pytest.raises(InvalidInputError):
        ct.features_at(tree, h, h.n_frames - 2)


def test_head_local_positions_remove_yaw():
    p = np.array([[[1.0, 0, 0], [0, 0, 0]]])
    out = ct.head_local_positions(p, 1, np.array([np.pi / 2]))
    assert np.allclose(out[0, 0], [0, -1, 0])


def test_finite_difference_boundary():
    v = ct.finite_difference(np.array([0.0, 1.0, 3.0]), fps=10)
    assert np.allclose(v, [10, 20, 20])
