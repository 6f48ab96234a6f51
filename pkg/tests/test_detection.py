import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import t_tail_quadrature
from tfqkd_spam.detection import (
    CONSISTENT,
    DETECTED,
    P_FLOOR,
    TrialEnsemble,
    betainc_regularized,
    detection_report,
    ensemble_M,
    t_cutoff,
    t_tail_probability,
)
from tfqkd_spam.states import PhasePlan, build_prep_matrix

A1 = ["+X", "-X", "+Y", "-Z"]
A2 = ["+X", "-X", "-Y", "-Z"]


def test_tail_examples():
    assert t_tail_probability(0, 9) == 1.0
    assert t_tail_probability(math.inf, 9) == 0.0
    assert t_tail_probability(2.262, 9) == pytest.approx(0.05, abs=1e-3)
    ref = t_tail_quadrature(10, 9)
    assert abs(t_tail_probability(10, 9) - ref) <= 1e-8 * ref


def test_tail_closed_forms():
    # dof 1 is Cauchy, dof 2 has an algebraic form
    for t in (0.3, 1.0, 7.0):
        assert t_tail_probability(t, 1) == pytest.approx(1 - 2 * math.atan(t) / math.pi,
                                                         rel=1e-13)
        assert t_tail_probability(t, 2) == pytest.approx(1 - t / math.sqrt(2 + t * t),
                                                         rel=1e-13)


def test_betainc_edges():
    assert betainc_regularized(2, 3, 0) == 0
    assert betainc_regularized(2, 3, 1) == 1
    assert betainc_regularized(1, 1, 0.3) == pytest.approx(0.3, rel=1e-14)


def test_cutoff_inverts_tail():
    t = t_cutoff(0.05, 9)
    assert t == pytest.approx(2.262157, abs=1e-6)
    assert t_tail_probability(t, 9) >= 0.05
    assert t_tail_probability(math.nextafter(t, math.inf), 9) < 0.05
    with pytest.raises(ValueError):
        t_cutoff(1.5, 9)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 50), st.floats(1e-6, 10), st.integers(1, 200))
def test_tail_strictly_decreasing(t, step, dof):
    hi = t + step
    p_lo, p_hi = t_tail_probability(t, dof), t_tail_probability(hi, dof)
    if p_lo > 1e-250:
        assert p_hi < p_lo


def test_report_all_zero():
    r = detection_report(np.zeros((4, 4)), np.zeros((4, 4)), 10)
    assert np.all(r.p_value == 1) and r.verdict == CONSISTENT and r.min_p == 1


def test_report_single_element():
    M = np.zeros((4, 4))
    sigma = np.full((4, 4), 1.0)
    M[2, 1] = 3.5 / math.sqrt(10)
    r = detection_report(M, sigma, 10)
    assert r.t_stat[2, 1] == pytest.approx(3.5)
    assert r.min_p == pytest.approx(t_tail_quadrature(3.5, 9), rel=1e-9)
    assert r.verdict == DETECTED and r.detected


def test_report_sentinels():
    M = np.zeros((4, 4))
    M[0, 0] = 1e-3
    r = detection_report(M, np.zeros((4, 4)), 5)
    assert math.isinf(r.t_stat[0, 0]) and r.p_value[0, 0] == P_FLOOR
    assert r.to_dict()["t_stat"][0][0] == "inf"
    # round-off sized entries count as exact zeros
    r = detection_report(np.full((4, 4), 1e-17), np.full((4, 4), 1e-18), 5)
    assert r.verdict == CONSISTENT


def test_report_bonferroni():
    M = np.zeros((4, 4))
    M[0, 0] = 3.0 / math.sqrt(10)
    sigma = np.ones((4, 4))
    assert detection_report(M, sigma, 10).detected
    r = detection_report(M, sigma, 10, bonferroni=True)
    assert r.effective_alpha == 0.05 / 16 and not r.detected


def test_report_rejects_bad_input():
    with pytest.raises(ValueError):
        detection_report(np.zeros((4, 4)), np.zeros((4, 4)), 1)
    with pytest.raises(ValueError):
        detection_report(np.zeros((4, 4)), -np.ones((4, 4)), 4)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_report_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    M, sigma = rng.normal(size=(4, 4)), rng.uniform(0.1, 2, size=(4, 4))
    a, b = detection_report(M, sigma, 10), detection_report(c * M, c * sigma, 10)
    np.testing.assert_allclose(a.t_stat, b.t_stat, rtol=1e-12)
    np.testing.assert_allclose(a.p_value, b.p_value, rtol=1e-9)
    assert a.verdict == b.verdict


def test_ensemble_validation():
    with pytest.raises(ValueError):
        TrialEnsemble(np.zeros((1, 4, 4)), np.zeros((1, 4, 4)))
    with pytest.raises(ValueError):
        TrialEnsemble(np.full((2, 4, 4), np.nan), np.zeros((2, 4, 4)))


def _shared_x_ensemble(n, rng):
    plan = PhasePlan()
    a1, a2 = build_prep_matrix(A1, plan), build_prep_matrix(A2, plan)
    S1, S2 = [], []
    for _ in range(n):
        x, b = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        S1.append(a1.T @ x @ b)
        S2.append(a2.T @ x @ b)
    return TrialEnsemble(np.array(S1), np.array(S2))


def test_ensemble_m_zero_for_consistent_data():
    ens = _shared_x_ensemble(10, np.random.default_rng(0))
    est = ensemble_M(ens, A1, A2, PhasePlan(phase_jitter_sigma=0), 100,
                     np.random.default_rng(1))
    assert np.abs(est.per_trial).max() < 1e-10
    assert np.all(est.sigma_phase == 0)


def test_ensemble_m_sigma_is_quadrature_sum():
    rng = np.random.default_rng(3)
    ens = TrialEnsemble(rng.uniform(-1, 1, (6, 4, 4)), rng.uniform(-1, 1, (6, 4, 4)))
    est = ensemble_M(ens, A1, A2, PhasePlan(jitter_mode="independent"), 200,
                     np.random.default_rng(2))
    assert np.all(est.sigma_phase > 0)
    np.testing.assert_allclose(est.sigma, np.hypot(est.sigma_trial, est.sigma_phase))
    np.testing.assert_allclose(est.sigma_trial, est.per_trial.std(axis=0, ddof=1))
