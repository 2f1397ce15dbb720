import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_commuting_real, random_density, random_hermitian
from ubitlab.errors import InvalidState, NotCommuting, NotHermitian, NotUnitary
from ubitlab.linalg import I2, J2, X2, Z2, antisym_exp
from ubitlab.transcription import (
    commutant_split, complex_to_real_op, complex_to_real_state, hamiltonian_to_stueckelbergian,
    j_operator, real_basis_split, real_to_complex_op, real_to_complex_state,
)

PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]])
PZ = np.diag([1.0, -1.0]).astype(complex)


def block_product_oracle(M1, M2):
    """Complex image of ``M1 M2`` computed from the blocks directly."""
    d = M1.shape[0] // 2
    a1, b1 = M1[:d, :d], M1[d:, :d]
    a2, b2 = M2[:d, :d], M2[d:, :d]
    return (a1 @ a2 - b1 @ b2) + 1j * (a1 @ b2 + b1 @ a2)


# --- operators ------------------------------------------------------------------

def test_j_maps_to_i():
    np.testing.assert_allclose(real_to_complex_op(np.kron(J2, np.eye(3))), 1j * np.eye(3))


def test_generator_roundtrip(rng):
    H = random_hermitian(rng, 3)
    S = np.kron(I2, (-1j * H).real) + np.kron(J2, (-1j * H).imag)
    np.testing.assert_allclose(real_to_complex_op(S), -1j * H, atol=1e-14)


def test_homomorphism_100_pairs(rng):
    for _ in range(100):
        d = int(rng.integers(1, 5))
        M1, M2 = random_commuting_real(rng, d), random_commuting_real(rng, d)
        lhs = real_to_complex_op(M1 @ M2)
        np.testing.assert_allclose(lhs, real_to_complex_op(M1) @ real_to_complex_op(M2), atol=1e-11)
        np.testing.assert_allclose(lhs, block_product_oracle(M1, M2), atol=1e-11)


def test_not_commuting_reports_norm(rng):
    M = np.kron(X2, np.eye(2))
    with pytest.raises(NotCommuting) as exc:
        real_to_complex_op(M)
    assert exc.value.commutator_norm > 1


def test_complex_to_real_op_inverse(rng):
    Mc = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_allclose(real_to_complex_op(complex_to_real_op(Mc)), Mc, atol=1e-15)


# --- states ---------------------------------------------------------------------

def test_spin_x_state():
    sigma = (np.eye(2) + PX) / 2
    np.testing.assert_allclose(complex_to_real_state(sigma), 0.25 * np.kron(I2, np.eye(2) + X2), atol=1e-15)


def test_maximally_mixed_fixed_point():
    for d in (1, 2, 5):
        np.testing.assert_allclose(complex_to_real_state(np.eye(d) / d), np.eye(2 * d) / (2 * d))
        np.testing.assert_allclose(real_to_complex_state(np.eye(2 * d) / (2 * d)), np.eye(d) / d)


def test_spin_y_state():
    sigma = (np.eye(2) + PY) / 2
    expect = 0.25 * (np.kron(I2, np.eye(2)) + np.kron(J2, J2))
    np.testing.assert_allclose(complex_to_real_state(sigma), expect, atol=1e-15)


def test_state_roundtrip_100(rng):
    for _ in range(100):
        d = int(rng.integers(1, 5))
        sigma = random_density(rng, d, rank=int(rng.integers(1, d + 1)))
        np.testing.assert_allclose(real_to_complex_state(complex_to_real_state(sigma)), sigma, atol=1e-12)


def test_probability_preserved_both_ways(rng):
    for _ in range(100):
        d = int(rng.integers(2, 5))
        sigma = random_density(rng, d)
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        v /= np.linalg.norm(v)
        Ups = np.outer(v, v.conj())
        Pi = complex_to_real_op(Ups)
        rho = complex_to_real_state(sigma)
        p = np.trace(Ups @ sigma).real
        assert np.trace(Pi @ rho) == pytest.approx(p, abs=1e-11)
        # and back: a real state commuting with J gives the same probability
        assert np.trace(Ups @ real_to_complex_state(rho)).real == pytest.approx(np.trace(Pi @ rho), abs=1e-11)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 5))
def test_purity_half(seed, d):
    rng = np.random.default_rng(seed)
    sigma = random_density(rng, d, rank=int(rng.integers(1, d + 1)))
    rho = complex_to_real_state(sigma)
    assert np.trace(rho @ rho) == pytest.approx(0.5 * np.trace(sigma @ sigma).real, abs=1e-12)
    assert np.trace(rho @ rho) <= 0.5 + 1e-10
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
    Jh = j_operator(d)
    assert np.linalg.norm(rho @ Jh - Jh @ rho) < 1e-14


def test_invalid_states_rejected():
    with pytest.raises(InvalidState):
        complex_to_real_state(np.diag([1.5, -0.5]))
    with pytest.raises(InvalidState):
        complex_to_real_state(np.array([[0.5, 1], [0, 0.5]]))
    with pytest.raises(NotCommuting):
        real_to_complex_state(0.25 * (np.eye(4) + np.kron(X2, I2) * 0.5))


def test_anticommuting_part_invisible(rng):
    d = 2
    for _ in range(20):
        A = rng.normal(size=(2 * d, 2 * d))
        rho_a = commutant_split(A + A.T)[1]
        O = random_commuting_real(rng, d)
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        Pi = complex_to_real_op(np.outer(v, v.conj()) / np.vdot(v, v))
        assert abs(np.trace(Pi @ O @ rho_a @ O.T)) < 1e-11


@pytest.mark.parametrize("d", [2, 3])
def test_evolution_compatibility(rng, d):
    H = random_hermitian(rng, d)
    sigma = random_density(rng, d)
    t = 0.83
    S = hamiltonian_to_stueckelbergian(H)
    Q = antisym_exp(S, t)
    U = scipy.linalg.expm(-1j * H * t)
    rho_t = Q @ complex_to_real_state(sigma) @ Q.T
    np.testing.assert_allclose(real_to_complex_state(rho_t), U @ sigma @ U.conj().T, atol=1e-11)


# --- Stueckelbergians -----------------------------------------------------------

def test_z_field():
    W = 1.7
    S = hamiltonian_to_stueckelbergian(0.5 * W * PZ)
    np.testing.assert_allclose(S, -0.5 * W * np.kron(J2, Z2), atol=1e-15)


def test_y_field_has_no_ubit_factor():
    W = 1.7
    S = hamiltonian_to_stueckelbergian(0.5 * W * PY)
    np.testing.assert_allclose(S, 0.5 * W * np.kron(I2, J2), atol=1e-15)


def test_zero_hamiltonian():
    np.testing.assert_array_equal(hamiltonian_to_stueckelbergian(np.zeros((3, 3))), np.zeros((6, 6)))


def test_real_basis_split_gives_pure_j_form(rng):
    H = random_hermitian(rng, 3)
    U = real_basis_split(H)
    S = hamiltonian_to_stueckelbergian(H, U)
    d = 3
    L, K = S[:d, :d], -S[d:, :d]
    np.testing.assert_allclose(L, 0, atol=1e-12)
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    np.testing.assert_allclose(S, -np.kron(J2, K), atol=1e-12)


def test_split_errors(rng):
    with pytest.raises(NotHermitian):
        hamiltonian_to_stueckelbergian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(NotUnitary):
        hamiltonian_to_stueckelbergian(np.eye(2), 2 * np.eye(2))


# --- commutant split ------------------------------------------------------------

def test_commutant_of_j_term(rng):
    M = np.kron(J2, rng.normal(size=(2, 2)))
    Mc, Ma = commutant_split(M)
    np.testing.assert_allclose(Mc, M, atol=1e-15)
    np.testing.assert_allclose(Ma, 0, atol=1e-15)


def test_anticommutant_of_x_term(rng):
    M = np.kron(X2, rng.normal(size=(2, 2)))
    Mc, Ma = commutant_split(M)
    np.testing.assert_allclose(Mc, 0, atol=1e-15)
    np.testing.assert_allclose(Ma, M, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4))
def test_commutant_split_random(seed, d):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(2 * d, 2 * d))
    Mc, Ma = commutant_split(M)
    Jh = j_operator(d)
    np.testing.assert_allclose(Mc + Ma, M, atol=1e-13)
    assert abs(np.trace(Mc.T @ Ma)) < 1e-11
    assert np.linalg.norm(Mc @ Jh - Jh @ Mc) < 1e-11
    assert np.linalg.norm(Ma @ Jh + Jh @ Ma) < 1e-11
