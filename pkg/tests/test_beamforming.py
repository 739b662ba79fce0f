import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psc_alloc import beamforming as bf
from instances import random_channel


def test_mmse_scalar():
    W = bf.mmse_matrix(np.array([[1.0]]), np.array([2.0]), 1.0)
    assert W[0, 0] == pytest.approx(2 / 3)


def test_mmse_zero_power():
    H = random_channel(np.random.default_rng(0), 4, 2)
    assert not np.any(bf.mmse_matrix(H, np.zeros(2), 1e-4))


def test_mmse_singular_without_noise():
    H = random_channel(np.random.default_rng(0), 4, 2)
    with pytest.raises(bf.SingularMatrixError):
        bf.mmse_matrix(H, np.ones(2), 0.0)


def test_mmse_residual_random():
    rng = np.random.default_rng(1)
    H = random_channel(rng, 16, 8, 1e-9)
    p = rng.uniform(0, 1, 8)
    W = bf.mmse_matrix(H, p, 1e-4)
    PHh = p[:, None] * H.conj().T
    assert bf.mmse_orthogonality_residual(W, H, p, 1e-4) <= 1e-10 * np.linalg.norm(PHh)


def test_mmse_columns_are_scaled_inverse_times_channel():
    rng = np.random.default_rng(2)
    H = random_channel(rng, 6, 3)
    p = rng.uniform(0.1, 2, 3)
    W = bf.mmse_matrix(H, p, 0.5)
    Rinv = np.linalg.inv(H @ np.diag(p) @ H.conj().T + 0.5 * np.eye(6))
    for n in range(3):
        np.testing.assert_allclose(W[:, n], p[n] * Rinv @ H[:, n], rtol=1e-10)


def test_zf_identity_and_scalar():
    np.testing.assert_allclose(bf.zf_matrix(np.eye(3)), np.eye(3), atol=1e-15)
    assert bf.zf_matrix(np.array([[2.0]]))[0, 0] == pytest.approx(0.5)


def test_zf_inverts_channel():
    H = random_channel(np.random.default_rng(3), 16, 8, 1e-9)
    W = bf.zf_matrix(H)
    assert np.linalg.norm(W.conj().T @ H - np.eye(8)) <= 1e-10


def test_zf_rank_deficient():
    H = np.ones((4, 2), dtype=complex)
    with pytest.raises(bf.SingularMatrixError):
        bf.zf_matrix(H)


def test_sinr_scalar():
    gamma = bf.sinr(np.array([[2 / 3]]), np.array([[1.0]]), np.array([2.0]), 1.0)
    assert gamma[0] == pytest.approx(2.0)


def test_sinr_zero_power():
    H = random_channel(np.random.default_rng(4), 4, 2)
    W = bf.zf_matrix(H)
    np.testing.assert_array_equal(bf.sinr(W, H, np.zeros(2), 1.0), 0.0)


def test_sinr_zero_combiner_with_power_is_undefined():
    with pytest.raises(bf.UndefinedSINRError):
        bf.sinr(np.zeros((1, 1)), np.ones((1, 1)), np.ones(1), 1.0)


def test_sinr_zf_has_no_interference():
    rng = np.random.default_rng(5)
    H = random_channel(rng, 4, 2)
    p = np.array([0.7, 1.3])
    W = bf.zf_matrix(H)
    expected = p / (np.sum(np.abs(W) ** 2, axis=0) * 0.3)
    np.testing.assert_allclose(bf.sinr(W, H, p, 0.3), expected, rtol=1e-12)


def test_effective_gains_scalar():
    g = bf.effective_gains(np.array([[2 / 3]]), np.array([[1.0]]), 1.0)
    assert g.U[0, 0] == pytest.approx(4 / 9) and g.v[0] == pytest.approx(4 / 9)


def test_effective_gains_zf_diagonal():
    H = random_channel(np.random.default_rng(6), 8, 4)
    U = bf.effective_gains(bf.zf_matrix(H), H, 1.0).U
    assert np.all(U[~np.eye(4, dtype=bool)] <= 1e-20)


def test_effective_gains_match_direct_sinr():
    # direct evaluation with explicit sums
    rng = np.random.default_rng(7)
    H = random_channel(rng, 5, 3)
    W = random_channel(rng, 5, 3)
    p = rng.uniform(0.1, 1, 3)
    direct = []
    for n in range(3):
        sig = abs(np.vdot(W[:, n], H[:, n])) ** 2 * p[n]
        intf = sum(abs(np.vdot(W[:, n], H[:, k])) ** 2 * p[k] for k in range(3) if k != n)
        direct.append(sig / (intf + np.linalg.norm(W[:, n]) ** 2 * 0.2))
    gains = bf.effective_gains(W, H, 0.2)
    np.testing.assert_allclose(gains.sinr(p), direct, rtol=1e-12)


@pytest.mark.parametrize("gamma, rate", [(0, 0), (1, 1), (3, 2)])
def test_achievable_rate(gamma, rate):
    assert bf.achievable_rate(np.array([gamma]))[0] == pytest.approx(rate)


def test_equivalent_rate():
    assert bf.equivalent_rate([1.5], [1.0])[0] == 1.5
    assert bf.equivalent_rate([2.0], [0.5])[0] == 4.0
    assert bf.equivalent_rate([math.log2(3)], [0.25])[0] == pytest.approx(6.33985, abs=1e-5)
    with pytest.raises(ValueError):
        bf.equivalent_rate([1.0], [0.0])


def test_orthogonality_residual_cases():
    rng = np.random.default_rng(8)
    H = random_channel(rng, 6, 3)
    assert bf.mmse_orthogonality_residual(np.zeros((6, 3)), H, np.zeros(3), 1.0) == 0.0
    p = rng.uniform(0.5, 1, 3)
    assert bf.mmse_orthogonality_residual(bf.zf_matrix(H), H, p, 1e-4) > 0


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1), re=st.floats(-10, 10), im=st.floats(-10, 10))
def test_sinr_scale_invariance(seed, re, im):
    c = complex(re, im)
    if abs(c) < 1e-3:
        return
    rng = np.random.default_rng(seed)
    H = random_channel(rng, 4, 3)
    W = random_channel(rng, 4, 3)
    p = rng.uniform(0.1, 1, 3)
    n = int(rng.integers(3))
    W2 = W.copy()
    W2[:, n] *= c
    a, b = bf.sinr(W, H, p, 0.5), bf.sinr(W2, H, p, 0.5)
    assert b[n] == pytest.approx(a[n], rel=1e-10)


def test_sinr_monotone_in_own_power():
    rng = np.random.default_rng(9)
    H = random_channel(rng, 4, 3)
    W = random_channel(rng, 4, 3)
    p = rng.uniform(0.1, 1, 3)
    prev = -1.0
    for pn in np.linspace(0, 3, 31):
        p[0] = pn
        g = bf.sinr(W, H, p, 0.5)[0]
        assert g >= prev
        prev = g


def test_equivalent_rate_strictly_decreasing_in_ratio():
    r = bf.equivalent_rate(np.full(50, 1.2), np.linspace(0.05, 1, 50))
    assert np.all(np.diff(r) < 0)
