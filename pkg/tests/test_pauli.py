import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    coefficients,
    det_cofactor,
    ideal_x,
    operator,
    prep_operator,
    rho,
    trace_expectation,
)
from tfqkd_spam.errors import SingularMatrix
from tfqkd_spam.pauli import (
    deviation_matrix,
    invert_transpose,
    pair_expectation,
    predict_expectations,
)

IDEAL_A1 = np.column_stack([(1, 1, 0, 0), (1, -1, 0, 0), (1, 0, 1, 0), (1, 0, 0, -1)]).astype(float)
GOLDEN = json.loads((Path(__file__).parent / "fixtures" / "golden_mth.json").read_text())

finite = st.floats(-3, 3, allow_nan=False)
vec4 = st.lists(finite, min_size=4, max_size=4).map(np.array)
mat4 = st.lists(finite, min_size=16, max_size=16).map(lambda v: np.array(v).reshape(4, 4))


def test_pair_expectation_matches_trace_for_aligned_x_states():
    a = np.array([1.0, 1.0, 0.0, 0.0])
    expected = trace_expectation(2 * rho(0.0), 2 * rho(0.0), ideal_x())
    assert expected == pytest.approx(1.0, abs=1e-14)
    assert pair_expectation(a, a, ideal_x()) == pytest.approx(expected, abs=1e-14)


def test_minus_z_vector_annihilates_ideal_measurement():
    rng = np.random.default_rng(3)
    for _ in range(5):
        b = rng.normal(size=4)
        assert pair_expectation([1, 0, 0, -1], b, ideal_x()) == 0.0


def test_phase_states_give_cosine_of_difference():
    rng = np.random.default_rng(11)
    for ta, tb in rng.uniform(0, 2 * math.pi, size=(20, 2)):
        a = [1, math.cos(ta), math.sin(ta), 0]
        b = [1, math.cos(tb), math.sin(tb), 0]
        oracle = trace_expectation(2 * rho(ta), 2 * rho(tb), ideal_x())
        assert oracle == pytest.approx(math.cos(ta - tb), abs=1e-12)
        assert pair_expectation(a, b, ideal_x()) == pytest.approx(oracle, abs=1e-12)


def test_brute_force_equivalence_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        a, b = rng.normal(size=4), rng.normal(size=4)
        x = rng.normal(size=(4, 4))
        np.fill_diagonal(x, 0.0)
        ref = trace_expectation(operator(a), operator(b), x)
        assert abs(pair_expectation(a, b, x) - ref) <= 1e-12


def test_predict_ideal_a_matrix():
    S = predict_expectations(IDEAL_A1, ideal_x(), IDEAL_A1)
    labels = ["+X", "-X", "+Y", "-Z"]
    for i, la in enumerate(labels):
        for j, lb in enumerate(labels):
            ref = trace_expectation(prep_operator(la), prep_operator(lb), ideal_x())
            assert S[i, j] == pytest.approx(ref, abs=1e-12)
    assert S[0, 0] == 1 and S[0, 1] == -1 and S[1, 0] == -1 and S[1, 1] == 1
    assert S[2, 2] == 1 and S[0, 2] == 0 and S[2, 0] == 0
    assert np.all(S[3] == 0) and np.all(S[:, 3] == 0)


def test_predict_zero_measurement():
    assert np.all(predict_expectations(IDEAL_A1, np.zeros((4, 4)), IDEAL_A1) == 0)


def test_predict_scales_rows_with_column_scaling():
    D = np.diag([2.0, -1.0, 0.5, 3.0])
    x = np.random.default_rng(1).normal(size=(4, 4))
    S = predict_expectations(IDEAL_A1, x, IDEAL_A1)
    np.testing.assert_allclose(predict_expectations(IDEAL_A1 @ D, x, IDEAL_A1), D @ S,
                               atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(mat4, mat4, mat4)
def test_predict_is_matrix_product_and_consistent(A, x, B):
    S = predict_expectations(A, x, B)
    np.testing.assert_allclose(S, A.T @ x @ B, atol=1e-12 * max(1.0, np.abs(A).max()) ** 2 * 64)
    for i in range(4):
        for j in range(4):
            assert S[i, j] == pair_expectation(A[:, i], B[:, j], x)


@settings(max_examples=200, deadline=None)
@given(vec4, vec4, vec4, mat4, finite, finite)
def test_bilinearity(a1, a2, b, x, s, t):
    lhs = pair_expectation(s * a1 + t * a2, b, x)
    rhs = s * pair_expectation(a1, b, x) + t * pair_expectation(a2, b, x)
    assert lhs == pytest.approx(rhs, abs=1e-9)
    lhs = pair_expectation(b, s * a1 + t * a2, x)
    rhs = s * pair_expectation(b, a1, x) + t * pair_expectation(b, a2, x)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_invert_identity():
    inv, cond = invert_transpose(np.eye(4))
    assert np.array_equal(inv, np.eye(4))
    assert cond == 1.0


def test_invert_rejects_equal_columns():
    A = IDEAL_A1.copy()
    A[:, 2] = A[:, 0]
    with pytest.raises(SingularMatrix):
        invert_transpose(A)


def test_invert_ideal_a1():
    assert det_cofactor(IDEAL_A1) == 2
    inv, cond = invert_transpose(IDEAL_A1)
    np.testing.assert_allclose(inv @ IDEAL_A1.T, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(inv, np.linalg.inv(IDEAL_A1.T), atol=1e-14)
    assert cond == pytest.approx(4.0)


def test_invert_respects_condition_limit():
    A = np.diag([1.0, 1.0, 1.0, 1e-5])
    invert_transpose(A)
    with pytest.raises(SingularMatrix) as err:
        invert_transpose(A, cond_limit=1e4)
    assert err.value.condition == pytest.approx(1e5)


def test_invert_stack_matches_loop():
    rng = np.random.default_rng(5)
    As = rng.normal(size=(3, 7, 4, 4))
    inv, cond = invert_transpose(As)
    assert inv.shape == (3, 7, 4, 4) and cond.shape == (3, 7)
    for idx in np.ndindex(3, 7):
        np.testing.assert_allclose(inv[idx], invert_transpose(As[idx]).inverse, atol=0)


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.floats(0.1, 6.2), min_size=3, max_size=3))
def test_round_trip(phases):
    A = np.column_stack([(1, math.cos(p), math.sin(p), 0) for p in phases] + [(1, 0, 0, -1)])
    try:
        inv, _ = invert_transpose(A)
    except SingularMatrix:
        return
    np.testing.assert_allclose(inv @ A.T, np.eye(4), atol=1e-10)


def test_deviation_zero_for_shared_measurement():
    rng = np.random.default_rng(9)
    A2 = IDEAL_A1.copy()
    A2[:, 2] = (1, 0, -1, 0)
    for _ in range(10):
        x, B = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        M = deviation_matrix(IDEAL_A1, IDEAL_A1.T @ x @ B, A2, A2.T @ x @ B)
        assert np.abs(M).max() <= 1e-10


def test_deviation_zero_inputs():
    A2 = IDEAL_A1.copy()
    A2[:, 2] = (1, 0, -1, 0)
    assert np.all(deviation_matrix(IDEAL_A1, np.zeros((4, 4)), A2, np.zeros((4, 4))) == 0)


def test_deviation_propagates_singular():
    bad = np.column_stack([(1, 1, 0, 0), (1, -1, 0, 0), (1, 0, 1, 0), (1, 0, -1, 0)]).astype(float)
    with pytest.raises(SingularMatrix):
        deviation_matrix(bad, np.zeros((4, 4)), IDEAL_A1, np.zeros((4, 4)))


def test_deviation_golden_minus_x_offset():
    v = GOLDEN["visibility"]
    delta = GOLDEN["offset_rad"]
    bob = np.column_stack([coefficients(prep_operator(b)) for b in GOLDEN["bob"]])
    x = ideal_x(v)

    def true_cols(labels):
        return np.column_stack([(1, math.cos(math.pi + delta), math.sin(math.pi + delta), 0)
                                if lab == "-X" else coefficients(prep_operator(lab))
                                for lab in labels])

    def nominal(labels):
        return np.column_stack([coefficients(prep_operator(lab)) for lab in labels])

    S1 = predict_expectations(true_cols(GOLDEN["A1"]), x, bob)
    S2 = predict_expectations(true_cols(GOLDEN["A2"]), x, bob)
    M = deviation_matrix(nominal(GOLDEN["A1"]), S1, nominal(GOLDEN["A2"]), S2)
    np.testing.assert_allclose(M, GOLDEN["M_th"]["-X"], atol=1e-12)
    assert np.abs(M).max() > 0.1


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=4, max_size=4),
       st.lists(st.sampled_from([-1.0, 1.0]), min_size=4, max_size=4),
       st.integers(0, 2**32 - 1))
def test_column_scaling_invariance(scales, signs, seed):
    rng = np.random.default_rng(seed)
    D = np.diag(np.array(scales) * np.array(signs))
    S = rng.normal(size=(4, 4))
    base = invert_transpose(IDEAL_A1).inverse @ S
    scaled = invert_transpose(IDEAL_A1 @ D).inverse @ (D.T @ S)
    np.testing.assert_allclose(scaled, base, atol=1e-10)
