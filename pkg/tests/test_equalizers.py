import numpy as np
import pytest

from vleq.adaptive import LmsState, RlsState, VslmsState, rls_init
from vleq.channels import load_profile
from vleq.equalizers import (
    Decision,
    DfeState,
    FbfLengthController,
    LeLengthController,
    SegmentedLe,
    apply_fbf_decision,
    apply_le_decision,
    detect,
    dfe_step,
    fbf_length_update,
    le_length_update,
    le_step,
    optimal_dfe_delay,
    resize_weights,
    rls_resize_dfe_fbf,
    rls_resize_le,
)


def test_detect_ties_go_positive():
    assert detect(0.0) == 1.0
    assert detect(-1e-300) == -1.0


def test_segmented_le_partials_and_weights():
    eq = SegmentedLe(seg_len=2, max_segs=3, active=2, delay=1,
                     alg=LmsState(np.array([1.0, 2.0, 3.0, 4.0]), 0.0))
    for x in [1.0, 0.0, 0.0, 0.0]:
        eq.push(x)
    # line is [0, 0, 0, 1]: only the last active tap sees the impulse
    assert np.allclose(eq.partial_outputs(), [0.0, 4.0])
    assert np.allclose(eq.weights, [1, 2, 3, 4, 0, 0])
    assert eq.min_segments == 1


def test_segmented_le_validation():
    with pytest.raises(ValueError):
        SegmentedLe(seg_len=3, max_segs=4, active=1, delay=5)
    with pytest.raises(ValueError):
        SegmentedLe(seg_len=3, max_segs=4, active=5)
    with pytest.raises(ValueError):
        SegmentedLe(seg_len=3, max_segs=4, active=2, alg=LmsState(np.zeros(5), 0.1))


def test_le_step_trains_towards_inverse():
    rng = np.random.default_rng(0)
    c = np.array([1.0, 0.4])
    s = np.sign(rng.standard_normal(6000))
    r = np.convolve(s, c)[: s.size]
    eq = SegmentedLe(seg_len=3, max_segs=3, active=2, delay=0, alg=LmsState(np.zeros(6), 0.02))
    errs = []
    for n in range(s.size):
        _, _, e, partials = le_step(eq, r[n], s[n])
        errs.append(e * e)
    assert len(partials) == 2
    assert np.mean(errs[-1000:]) < 0.01
    # the truncated inverse of 1 + 0.4 z^-1
    assert np.allclose(eq.alg.weights[:3], [1.0, -0.4, 0.16], atol=0.03)


def test_le_controller_decisions():
    eq = SegmentedLe(seg_len=3, max_segs=5, active=2, delay=0)
    ctl = LeLengthController(t_hold=2)
    assert le_length_update(ctl, eq, 1.0, 0.1) is Decision.HOLD
    assert le_length_update(ctl, eq, 1.0, 0.1) is Decision.HOLD
    # past the hold time, a last segment that removes much error expands
    assert le_length_update(ctl, eq, 1.0, 0.1) is Decision.EXPAND
    apply_le_decision(ctl, eq, Decision.EXPAND)
    assert eq.active == 3 and ctl.hold == 2 and ctl.ase_last == 0.0
    ctl.hold = 0
    # a useless last segment contracts
    assert le_length_update(ctl, eq, 1.0, 1.0) is Decision.CONTRACT
    # in between holds
    ctl2 = LeLengthController(t_hold=0)
    assert le_length_update(ctl2, eq, 1.0, 0.9) is Decision.HOLD


def test_le_controller_respects_bounds_and_floor():
    eq = SegmentedLe(seg_len=3, max_segs=3, active=3, delay=0)
    ctl = LeLengthController(t_hold=0)
    assert le_length_update(ctl, eq, 1.0, 0.1) is Decision.HOLD
    eq = SegmentedLe(seg_len=3, max_segs=3, active=2, delay=4)
    assert eq.min_segments == 2
    assert le_length_update(LeLengthController(t_hold=0), eq, 1.0, 1.0) is Decision.HOLD
    # the floor blocks expansion once the error is already tiny
    eq = SegmentedLe(seg_len=3, max_segs=3, active=1, delay=0)
    ctl = LeLengthController(t_hold=0, n_tau=0.05)
    assert le_length_update(ctl, eq, 0.1, 0.01) is Decision.HOLD
    ctl = LeLengthController(t_hold=0, n_tau=0.05)
    assert le_length_update(ctl, eq, 1.0, 0.5) is Decision.EXPAND


def test_le_controller_parameter_checks():
    with pytest.raises(ValueError):
        LeLengthController(alpha_up=0.995, alpha_dw=0.99)
    with pytest.raises(ValueError):
        LeLengthController(beta=0.0)


def test_resize_weights_lms_caps_step():
    s = LmsState(np.array([1.0, 2.0]), 0.1)
    big = resize_weights(s, 30, input_power=1.0, mu_cap=0.1)
    assert np.allclose(big.weights[:2], [1, 2]) and not big.weights[2:].any()
    assert big.mu == pytest.approx(2 / 90)
    small = resize_weights(big, 1, input_power=1.0, mu_cap=0.1)
    assert np.allclose(small.weights, [1.0]) and small.mu == pytest.approx(0.1)
    v = resize_weights(VslmsState(np.zeros(2), 0.5, power=2.0), 10)
    assert v.mu == pytest.approx(2 / 60)


def test_rls_resize_policies():
    s = rls_init(3, 0.01)
    s = RlsState(np.array([1.0, 2.0, 3.0]), s.P * 0.5, 0.99, 0.01)
    grown = rls_resize_le(s, 3, 6, 0.01)
    assert np.allclose(grown.P[:3, :3], s.P[:3, :3])
    assert np.allclose(np.diag(grown.P)[3:], 100.0)
    assert rls_resize_le(s, 3, 2) is None
    with pytest.raises(ValueError):
        rls_resize_le(s, 4, 6)
    dropped = rls_resize_dfe_fbf(s, -1)
    assert dropped.weights.size == 2 and dropped.P.shape == (2, 2)
    assert rls_resize_dfe_fbf(s, +1).weights.size == 4
    with pytest.raises(ValueError):
        rls_resize_dfe_fbf(s, 2)


def test_set_segments_rls_restarts_on_contraction():
    eq = SegmentedLe(seg_len=2, max_segs=4, active=3, delay=0, alg=rls_init(6, lam=0.98))
    eq.alg = RlsState(np.ones(6), eq.alg.P, 0.98, 0.01)
    eq.set_segments(2)
    assert not eq.alg.weights.any() and eq.alg.lam == 0.98
    eq.alg = RlsState(np.ones(4), eq.alg.P, 0.98, 0.01)
    eq.set_segments(3)
    assert np.allclose(eq.alg.weights, [1, 1, 1, 1, 0, 0])
    with pytest.raises(ValueError):
        eq.set_segments(5)


def test_dfe_feedback_holds_used_references():
    eq = DfeState(n_ff=2, nb=2, delay=1, nb_min=1, nb_max=4, alg=LmsState(np.zeros(4), 0.0))
    dfe_step(eq, 0.5, training=-1.0)
    dfe_step(eq, 0.2, training=1.0)
    assert np.allclose(eq.fb_line, [1.0, -1.0, 0, 0])
    assert np.allclose(eq.regressor(), [0.2, 0.5, 1.0, -1.0])
    # decision-directed: the slicer output is fed back
    eq.alg = LmsState(np.array([1.0, 0, 0, 0]), 0.0)
    y, d_hat, _ = dfe_step(eq, -0.3)
    assert y == pytest.approx(-0.3) and d_hat == -1.0 and eq.fb_line[0] == -1.0


def test_dfe_cancels_postcursor():
    rng = np.random.default_rng(3)
    c = np.array([1.0, 0.5, -0.3])
    s = np.sign(rng.standard_normal(5000))
    r = np.convolve(s, c)[: s.size]
    eq = DfeState(n_ff=1, nb=2, delay=0, nb_min=0, alg=rls_init(3, 0.01))
    for n in range(s.size):
        dfe_step(eq, r[n], s[n])
    assert np.allclose(eq.w_f, [1.0], atol=1e-6)
    assert np.allclose(eq.w_b, [-0.5, 0.3], atol=1e-6)


def test_fbf_controller_window_logic():
    eq = DfeState(n_ff=2, nb=3, delay=1, nb_min=2, nb_max=5,
                  alg=LmsState(np.array([1.0, 0.0, 0.5, 0.2, 0.3]), 0.0))
    ctl = FbfLengthController(chi=0.01, window=3)
    assert fbf_length_update(ctl, eq, 1.0) is Decision.HOLD
    assert fbf_length_update(ctl, eq, 1.0) is Decision.HOLD
    # tail tap power 3 * 0.09 > 0.01 * 3
    assert fbf_length_update(ctl, eq, 1.0) is Decision.EXPAND
    assert ctl.count == 0 and ctl.sse == 0.0
    apply_fbf_decision(eq, Decision.EXPAND)
    assert eq.nb == 4 and eq.w_b[-1] == 0.0
    # last tap zero but the one before significant: hold
    for _ in range(2):
        fbf_length_update(ctl, eq, 1.0)
    assert fbf_length_update(ctl, eq, 1.0) is Decision.HOLD
    eq.alg = LmsState(np.array([1.0, 0.0, 0.5, 0.0, 0.0, 0.0]), 0.0)
    eq.nb = 4
    for _ in range(2):
        fbf_length_update(ctl, eq, 1.0)
    assert fbf_length_update(ctl, eq, 1.0) is Decision.CONTRACT
    apply_fbf_decision(eq, Decision.CONTRACT)
    assert eq.nb == 3


def test_fbf_probe_opens_feedback_filter():
    eq = DfeState(n_ff=2, nb=2, delay=1, nb_min=2, nb_max=6,
                  alg=LmsState(np.array([1.0, 0.0, 0.0, 0.0]), 0.0))
    ctl = FbfLengthController(window=2, probe=4)
    decisions = [fbf_length_update(ctl, eq, 0.5) for _ in range(4)]
    assert decisions[-1] is Decision.HOLD
    assert eq.nb == 6


def test_fbf_controller_checks():
    with pytest.raises(ValueError):
        FbfLengthController(chi=0.0)
    with pytest.raises(ValueError):
        DfeState(n_ff=2, nb=1, delay=0, nb_min=2)


def test_optimal_dfe_delay():
    assert optimal_dfe_delay(load_profile("model2"), 6) == 7
    assert optimal_dfe_delay(np.array([0.2, -0.5, 1.0, -0.2]), 4) == 5


def test_segment_increment_is_last_segment_dot_product():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p, k = int(rng.integers(1, 5)), int(rng.integers(2, 8))
        active = int(rng.integers(2, k + 1))
        eq = SegmentedLe(seg_len=p, max_segs=k, active=active,
                         alg=LmsState(rng.standard_normal(active * p), 0.0))
        for x in rng.standard_normal(k * p):
            eq.push(x)
        y = eq.partial_outputs()
        lo, hi = (active - 1) * p, active * p
        assert y[-1] - y[-2] == pytest.approx(eq.alg.weights[lo:hi] @ eq.line[lo:hi], abs=1e-12)


def test_rls_expand_scalar_and_restart_on_contract():
    s = RlsState(np.array([0.3]), np.array([[2.5]]), 1.0, 0.01)
    grown = rls_resize_le(s, 1, 2, 0.01)
    assert np.allclose(grown.P, [[2.5, 0.0], [0.0, 100.0]])
    assert rls_resize_le(grown, 2, 1, 0.01) is None


def test_rls_expand_known_2x2():
    phi = np.array([[2.0, 0.5], [0.5, 1.0]])
    s = RlsState(np.zeros(2), np.linalg.inv(phi), 1.0, 0.1)
    big = np.zeros((3, 3))
    big[:2, :2] = phi
    big[2, 2] = 0.1
    assert np.max(np.abs(rls_resize_le(s, 2, 3, 0.1).P - np.linalg.inv(big))) < 1e-9


def test_rls_truncate_4x4_with_zero_row():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((4, 4))
    phi = a @ a.T + np.eye(4)
    phi[3, :3] = phi[:3, 3] = 0.0
    s = RlsState(np.array([0.1, 0.2, 0.3, 0.0]), np.linalg.inv(phi), 1.0, 0.01)
    dropped = rls_resize_dfe_fbf(s, -1)
    assert np.max(np.abs(dropped.P - np.linalg.inv(phi[:3, :3]))) < 1e-9


def test_dfe_zero_weights_and_ideal_channel():
    eq = DfeState(n_ff=3, nb=2, delay=0, nb_min=0, alg=LmsState(np.zeros(5), 0.0))
    assert dfe_step(eq, 0.7, 1.0)[0] == 0.0
    rng = np.random.default_rng(0)
    w = np.zeros(5)
    w[0] = 1.0
    eq = DfeState(n_ff=3, nb=2, delay=0, nb_min=0, alg=LmsState(w, 0.0))
    for _ in range(20):
        s, v = float(np.sign(rng.standard_normal())), 0.05 * rng.standard_normal()
        _, _, e = dfe_step(eq, s + v, s)
        assert e == pytest.approx(-v, abs=1e-15)


def test_training_and_error_free_decisions_match():
    rng = np.random.default_rng(8)
    c = np.array([1.0, 0.4, -0.2])
    s = np.sign(rng.standard_normal(3000))
    r = np.convolve(s, c)[: s.size] + 0.01 * rng.standard_normal(s.size)
    eq = DfeState(n_ff=3, nb=2, delay=0, nb_min=0, alg=LmsState(np.zeros(5), 0.02))
    for n in range(2000):
        dfe_step(eq, r[n], s[n])
    import copy
    dd = copy.deepcopy(eq)
    for n in range(2000, 3000):
        _, d_hat, _ = dfe_step(dd, r[n], None)
        assert d_hat == s[n]
        dfe_step(eq, r[n], s[n])
        assert np.array_equal(dd.alg.weights, eq.alg.weights)


def test_optimal_delay_minimum_phase():
    for nf in (1, 4, 9):
        assert optimal_dfe_delay(np.array([1.0, 0.5, 0.2]), nf) == nf - 1
