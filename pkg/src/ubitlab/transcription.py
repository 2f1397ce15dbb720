"""Maps between complex quantum theory and the real theory with a ubit.

Real operators live on ``U (x) A`` with the ubit as the first (slow) factor,
so a ``2d x 2d`` matrix splits into ``d x d`` ubit blocks ``M_jk``.
Operators commuting with ``J_U (x) I_A`` have the block form
``[[M00, -M10], [M10, M00]]`` and correspond to ``M00 + i M10``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimMismatch, InvalidState, NotCommuting, NotHermitian, NotUnitary
from .linalg import I2, J2, TensorSpace, _dims, embed, hermitian_eigh, permute_factors

TOL_COMM = 1e-9
STATE_TOL_HERM = 1e-12
STATE_TOL_EIG = 1e-10
STATE_TOL_TRACE = 1e-12


def _ubit_first(M: np.ndarray, space, ubit_axis: int) -> tuple[np.ndarray, tuple[int, ...]]:
    M = np.asarray(M)
    if space is None:
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
            raise DimMismatch(f"expected a square matrix of even size, got {M.shape}")
        return M, (2, M.shape[0] // 2)
    dims = _dims(space)
    if dims[ubit_axis] != 2:
        raise DimMismatch(f"factor {ubit_axis} has dimension {dims[ubit_axis]}, not 2")
    order = [ubit_axis] + [k for k in range(len(dims)) if k != ubit_axis]
    M = permute_factors(M, dims, order)
    return M, (2, M.shape[0] // 2)


def j_operator(d: int) -> np.ndarray:
    """``J_U (x) I_A`` on a ``2d``-dimensional ``U (x) A`` space."""
    return np.kron(J2, np.eye(d))


def commutator_norm(M: np.ndarray) -> float:
    d = M.shape[0] // 2
    Jh = j_operator(d)
    return float(np.linalg.norm(M @ Jh - Jh @ M))


def _require_commuting(M: np.ndarray, tol: float) -> None:
    c = commutator_norm(M)
    if c > tol * max(np.linalg.norm(M), 1e-300):
        raise NotCommuting(f"||[M, J (x) I]|| = {c:.3e} is not negligible", c)


def real_to_complex_op(M: np.ndarray, space: TensorSpace | Sequence[int] | None = None,
                       ubit_axis: int = 0, *, tol: float = TOL_COMM) -> np.ndarray:
    """Map a real operator commuting with ``J (x) I`` to the complex ``M00 + i M10``.

    ``space``/``ubit_axis`` allow the ubit to sit at any factor; the complex
    operator then acts on the remaining factors in their original order.
    """
    M, (_, d) = _ubit_first(M, space, ubit_axis)
    _require_commuting(M, tol)
    return M[:d, :d] + 1j * M[d:, :d]


def complex_to_real_op(Mc: np.ndarray) -> np.ndarray:
    """Inverse of :func:`real_to_complex_op`: ``I (x) Re M + J (x) Im M``."""
    Mc = np.asarray(Mc, dtype=complex)
    return np.kron(I2, Mc.real) + np.kron(J2, Mc.imag)


def validate_complex_state(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InvalidState(f"density matrix must be square, got {sigma.shape}")
    if np.linalg.norm(sigma - sigma.conj().T) > STATE_TOL_HERM * max(1.0, np.linalg.norm(sigma)):
        raise InvalidState("density matrix is not Hermitian")
    if abs(np.trace(sigma) - 1.0) > STATE_TOL_TRACE * 10:
        raise InvalidState(f"trace {np.trace(sigma).real:.12g} != 1")
    if np.linalg.eigvalsh(sigma).min() < -STATE_TOL_EIG:
        raise InvalidState("density matrix has a negative eigenvalue")
    return sigma


def validate_real_state(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if np.iscomplexobj(rho):
        if np.abs(rho.imag).max(initial=0.0) > STATE_TOL_HERM:
            raise InvalidState("real state has an imaginary part")
        rho = rho.real
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidState(f"density matrix must be square, got {rho.shape}")
    if np.linalg.norm(rho - rho.T) > STATE_TOL_HERM * max(1.0, np.linalg.norm(rho)):
        raise InvalidState("real density matrix is not symmetric")
    if abs(np.trace(rho) - 1.0) > STATE_TOL_TRACE * 10:
        raise InvalidState(f"trace {np.trace(rho):.12g} != 1")
    if np.linalg.eigvalsh(rho).min() < -STATE_TOL_EIG:
        raise InvalidState("real density matrix has a negative eigenvalue")
    return rho


def complex_to_real_state(sigma: np.ndarray) -> np.ndarray:
    """``rho = 1/2 (I_U (x) Re sigma + J_U (x) Im sigma)``; purity is half of ``Tr sigma^2``."""
    sigma = validate_complex_state(sigma)
    return 0.5 * (np.kron(I2, sigma.real) + np.kron(J2, sigma.imag))


def real_to_complex_state(rho: np.ndarray, *, tol: float = TOL_COMM) -> np.ndarray:
    """``sigma = 2 (rho00 + i rho10)`` for a real state commuting with ``J (x) I``."""
    rho = validate_real_state(rho)
    if rho.shape[0] % 2:
        raise DimMismatch("real state needs an even dimension")
    _require_commuting(rho, tol)
    d = rho.shape[0] // 2
    sigma = 2.0 * (rho[:d, :d] + 1j * rho[d:, :d])
    return validate_complex_state(sigma)


def _require_hermitian(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitian(f"Hamiltonian must be square, got {H.shape}")
    if np.linalg.norm(H - H.conj().T) > 1e-12 * max(1.0, np.linalg.norm(H)):
        raise NotHermitian("Hamiltonian is not Hermitian")
    return H


def real_basis_split(H: np.ndarray) -> np.ndarray:
    """Unitary ``U`` such that ``U H U^dagger`` is real (diagonal).

    This is the "Hamiltonian is real in the split basis" choice; the resulting
    Stueckelbergian is always ``-J_U (x) K_A``.
    """
    H = _require_hermitian(H)
    if np.abs(H.imag).max(initial=0.0) == 0.0:
        return np.eye(H.shape[0], dtype=complex)
    _, V = hermitian_eigh(H)
    return V.conj().T


def hamiltonian_to_stueckelbergian(H: np.ndarray, U_split: np.ndarray | None = None,
                                   hbar: float = 1.0) -> np.ndarray:
    """Real antisymmetric generator of the same dynamics as Hamiltonian ``H``.

    ``S = I_U (x) Re(-i H'/hbar) + J_U (x) Im(-i H'/hbar)`` with
    ``H' = U_split H U_split^dagger``.
    """
    H = _require_hermitian(H)
    d = H.shape[0]
    if U_split is None:
        Hs = H
    else:
        U = np.asarray(U_split, dtype=complex)
        if U.shape != (d, d) or np.linalg.norm(U.conj().T @ U - np.eye(d)) > 1e-10:
            raise NotUnitary("real-imaginary split basis change is not unitary")
        Hs = U @ H @ U.conj().T
    G = -1j * Hs / hbar
    return np.kron(I2, G.real) + np.kron(J2, G.imag)


def commutant_split(M: np.ndarray, space: TensorSpace | Sequence[int] | None = None,
                    ubit_axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split ``M`` into parts commuting / anticommuting with ``J`` on the ubit factor.

    ``M_c = (M - J M J)/2`` and ``M_a = (M + J M J)/2``; the two parts are
    Frobenius-orthogonal.
    """
    M = np.asarray(M)
    if space is None:
        if M.shape[0] % 2:
            raise DimMismatch("ubit factor needs an even total dimension")
        space = (2, M.shape[0] // 2)
        ubit_axis = 0
    dims = _dims(space)
    if dims[ubit_axis] != 2:
        raise DimMismatch(f"factor {ubit_axis} has dimension {dims[ubit_axis]}, not 2")
    Jh = embed(J2, dims, ubit_axis)
    JMJ = Jh @ M @ Jh
    return 0.5 * (M - JMJ), 0.5 * (M + JMJ)
