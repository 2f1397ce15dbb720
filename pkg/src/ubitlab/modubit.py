"""Modified-ubit frame: an orthogonal map on ``E (x) U`` that makes the EU factor a product.

``O = O2 O1`` with ``O1 = sum_n |Phi_n+><Psi_n+| + c.c.`` (real, orthogonal) and
``O2 = Re U (x) I + Im U (x) J`` for ``U = sum_n |n><phi_n+|``. Then
``O |Psi_n+><Psi_n+| O^T = 1/2 |n><n| (x) (I - iJ)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, NotOrthogonal
from .linalg import I2, J2, partial_trace
from .projected import PLUS, ProjectedEvolution, ProjectedState, SpectralData

TOL_REAL = 1e-10
TOL_ORTH = 1e-9


@dataclass
class ModifiedUbitFrame:
    """Frame data.

    Attributes
    ----------
    O : ndarray
        Real orthogonal ``2N x 2N`` matrix.
    env_basis : ndarray
        Real orthonormal columns ``|n>``.
    c : ndarray
        Environment weights defining ``Gamma+-`` and ``rho_E``.
    """

    O: np.ndarray = field(repr=False)
    env_basis: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    spec: SpectralData = field(repr=False)

    @property
    def Gamma_plus(self) -> np.ndarray:
        P = self.spec.Psi_plus
        return (P * self.c) @ P.conj().T

    @property
    def Gamma_minus(self) -> np.ndarray:
        return self.Gamma_plus.conj()

    @property
    def I_cal(self) -> np.ndarray:
        return np.real(self.Gamma_plus + self.Gamma_minus)

    @property
    def J_cal(self) -> np.ndarray:
        return np.real(1j * (self.Gamma_plus - self.Gamma_minus))

    @property
    def rho_E(self) -> np.ndarray:
        return (self.env_basis * self.c) @ self.env_basis.T

    def orthogonality_residual(self) -> float:
        return float(np.linalg.norm(self.O.T @ self.O - np.eye(self.O.shape[0])))

    def defining_residuals(self) -> np.ndarray:
        """``|| O|Psi_n+><Psi_n+|O^T - 1/2 |n><n| (x) (I - iJ) ||`` for every n."""
        OP = self.O @ self.spec.Psi_plus
        target = np.kron(self.env_basis, PLUS[:, None])
        # both sides are rank one; compare the projectors directly
        res = np.empty(self.spec.N)
        for n in range(self.spec.N):
            a, b = OP[:, n], target[:, n]
            res[n] = np.linalg.norm(np.outer(a, a.conj()) - np.outer(b, b.conj()))
        return res


def build_O(spec: SpectralData, env_basis: np.ndarray | None = None,
            c: np.ndarray | None = None) -> ModifiedUbitFrame:
    """Construct the modified-ubit transformation for ``spec``.

    ``env_basis`` defaults to the standard basis and ``c`` to uniform weights ``1/N``.
    """
    N = spec.N
    E = np.eye(N) if env_basis is None else np.asarray(env_basis, dtype=float)
    if E.shape != (N, N) or np.linalg.norm(E.T @ E - np.eye(N)) > TOL_ORTH:
        raise DimMismatch("environment basis must be a real orthonormal N x N matrix")
    c = np.full(N, 1.0 / N) if c is None else np.asarray(c, dtype=float)
    O1c = spec.Phi_plus @ spec.Psi_plus.conj().T + spec.Phi_minus @ spec.Psi_minus.conj().T
    U = E @ spec.phi.conj().T          # sum_n |n><phi_n+|
    O2 = np.kron(U.real, I2) + np.kron(U.imag, J2)
    O1 = O1c.real
    if np.abs(O1c.imag).max() > TOL_REAL * 10:
        # the sum over a conjugate pair is real; a residue means a pairing error
        raise NotOrthogonal("O1 has a non-negligible imaginary part")
    O = O2 @ O1
    frame = ModifiedUbitFrame(O, E, c, spec)
    err = frame.orthogonality_residual()
    if err > TOL_ORTH:
        raise NotOrthogonal(f"O^T O deviates from I by {err:.2e}")
    return frame


def _apply_frame_dense(O: np.ndarray, rho: np.ndarray, d: int) -> np.ndarray:
    D = O.shape[0]
    T = rho.reshape(D, d, D, d)
    T = np.einsum("ij,jakb,lk->ialb", O, T, O, optimize=True)
    return T.reshape(D * d, D * d)


def rho_modified(state, frame: ModifiedUbitFrame, d_A: int | None = None) -> np.ndarray:
    """``rho_U'A = Tr_E (O (x) I_A) rho (O (x) I_A)^T``.

    ``state`` is either a :class:`ProjectedState` (structured path) or a dense
    real state on ``E (x) U (x) A`` (pass ``d_A``).
    """
    N = frame.spec.N
    if isinstance(state, ProjectedState):
        # O Psi_n+ = |n> (x) |+>, so the environment trace leaves
        # 1/2 sum_n c_n (|+><+| (x) sigma_n + c.c.)
        pp = np.outer(PLUS, PLUS.conj())
        d = state.d_A
        sig = np.einsum("n,nab->ab", state.c, state.sigma)
        return np.real(np.kron(pp, sig)).reshape(2 * d, 2 * d)
    rho = np.asarray(state)
    if d_A is None:
        raise ValueError("d_A is required for a dense state")
    if rho.shape != (2 * N * d_A, 2 * N * d_A):
        raise DimMismatch(f"state has shape {rho.shape}, expected {2 * N * d_A}")
    return partial_trace(_apply_frame_dense(frame.O, rho, d_A), (N, 2, d_A), [1, 2])


def rho_modified_series(ev: ProjectedEvolution) -> np.ndarray:
    """Structured ``rho_U'A(t)`` for every time of a projected evolution."""
    pp = np.outer(PLUS, PLUS.conj())
    sig = np.einsum("n,tnab->tab", ev.c, ev.sigma)
    d = sig.shape[-1]
    return np.real(np.einsum("uv,tab->tuavb", pp, sig)).reshape(len(ev.times), 2 * d, 2 * d)
