"""Continual-projection effective dynamics.

The global state is kept in the commutant of ``S_EU (x) I_A``:

    rho_par = 1/2 sum_n c_n (|Psi_n+><Psi_n+| (x) sigma_n + |Psi_n-><Psi_n-| (x) conj(sigma_n)),

where ``|Psi_n-> = conj|Psi_n+>`` are the eigenvectors of ``S_EU`` and each ``sigma_n``
is a unit-trace complex matrix on A. Under a local generator each ``sigma_n`` evolves
with its own Hamiltonian ``H_n = i <Psi_n+| I_E (x) S_UA |Psi_n+>``.

The outer projection in the projected equation of motion is the identity on
states of this form, so evolving the ``sigma_n`` directly is exact for the ansatz.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .analytic import nu_third_order_simple, perturbation_expansion, xi_factor
from .dynamics import evolve_exact
from .errors import BadLocalGenerator, DegenerateSpectrum, DimMismatch
from .linalg import I2, J2, hermitian_eigh, partial_trace, require_antisymmetric, ubit_expand
from .model import (
    EnvironmentCoupling, ModelParams, assemble_full_stueckelbergian, eu_stueckelbergian,
    generate_coupling, initial_state,
)
from .transcription import complex_to_real_state

GAP_TOL_REL = 1e-8
PLUS = np.array([1.0, -1.0j]) / math.sqrt(2.0)   # J|+> = i|+>


@dataclass
class SpectralData:
    """Eigen-structure of ``G = i S_EU / omega = G0 + lam V``.

    Columns of ``Psi_plus`` are the exact eigenvectors with eigenvalues ``g > 0``;
    ``Psi_minus = conj(Psi_plus)`` carry ``-g``. ``Phi_plus = phi (x) |+>`` diagonalise
    ``V`` in the ``G0 = +1`` subspace with eigenvalues ``v`` (ascending). Index ``n``
    is shared: ``Psi_plus[:, n]`` is the exact continuation of ``Phi_plus[:, n]``,
    with phase fixed so that ``<Phi_n+|Psi_n+>`` is real and positive.
    """

    N: int
    omega: float
    lam: float
    g: np.ndarray
    Psi_plus: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)

    @property
    def Psi_minus(self) -> np.ndarray:
        return self.Psi_plus.conj()

    @property
    def Psi(self) -> np.ndarray:
        """All ``2N`` eigenvectors, plus block first."""
        return np.concatenate([self.Psi_plus, self.Psi_minus], axis=1)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``G`` in the order of :attr:`Psi`."""
        return np.concatenate([self.g, -self.g])

    @property
    def Phi_plus(self) -> np.ndarray:
        return np.kron(self.phi, PLUS[:, None])

    @property
    def Phi_minus(self) -> np.ndarray:
        return self.Phi_plus.conj()

    @property
    def G0(self) -> np.ndarray:
        return -1j * np.kron(np.eye(self.N), J2)

    @property
    def P_plus(self) -> np.ndarray:
        """``1/2 I_E (x) (I - iJ)``, projector onto ``G0 = +1``."""
        return 0.5 * np.kron(np.eye(self.N), I2 - 1j * J2)

    @property
    def P_minus(self) -> np.ndarray:
        return 0.5 * np.kron(np.eye(self.N), I2 + 1j * J2)

    @property
    def G(self) -> np.ndarray:
        return self.G0 + self.lam * self.V

    def env_marginals(self) -> np.ndarray:
        """``Tr_E |Psi_n+><Psi_n+|`` as an ``(N, 2, 2)`` array."""
        P = self.Psi_plus.reshape(self.N, 2, self.N)
        return np.einsum("eun,evn->nuv", P, P.conj())


def half_space_coupling(V: np.ndarray) -> np.ndarray:
    """``(I_E (x) <+|) V (I_E (x) |+>)``, an ``N x N`` Hermitian matrix."""
    N = V.shape[0] // 2
    E = np.kron(np.eye(N), PLUS[:, None])
    return E.conj().T @ V @ E


def spectral_decompose(S_EU: np.ndarray, omega: float, V: np.ndarray | None = None,
                       s: float | None = None, gap_tol: float | None = None) -> SpectralData:
    """Exact and unperturbed eigen-structure of an EU generator.

    Parameters
    ----------
    S_EU : ndarray
        ``-omega I_E (x) J_U + s B_EU``.
    omega : float
        Ubit rotation rate.
    V : ndarray, optional
        Perturbation ``i B_EU``; inferred from ``S_EU`` when ``s > 0`` is given,
        required to define ``Phi`` when ``s = 0``.
    s : float, optional
        Coupling scale; inferred from ``V`` when omitted.
    gap_tol : float, optional
        Minimum allowed spacing of the eigenvalues of ``iS_EU`` (default ``1e-8 omega``).
    """
    S_EU = require_antisymmetric(S_EU)
    D = S_EU.shape[0]
    if D % 2:
        raise DimMismatch("S_EU must act on E (x) U")
    N = D // 2
    G0 = -1j * np.kron(np.eye(N), J2)
    G = 1j * S_EU / omega
    if s is None:
        if V is None:
            raise ValueError("either s or V is needed to separate the perturbation")
        dV = G - G0
        nV = np.linalg.norm(V)
        s = omega * (float(np.real(np.vdot(V, dV))) / nV**2 if nV > 0 else 0.0)
    lam = s / omega
    if V is None:
        if lam == 0:
            V = np.zeros((D, D), dtype=complex)
        else:
            V = (G - G0) / lam
    Vp = half_space_coupling(V)
    v, phi = hermitian_eigh(Vp)
    Phi_plus = np.kron(phi, PLUS[:, None])

    if lam == 0:
        return SpectralData(N, omega, 0.0, np.ones(N), Phi_plus.copy(), v, phi, V)

    mu, W = hermitian_eigh(G)
    tol = GAP_TOL_REL if gap_tol is None else gap_tol / omega
    gaps = np.diff(mu)
    if gaps.min() < tol:
        k = int(np.argmin(gaps))
        raise DegenerateSpectrum(
            f"eigenvalue gap {gaps[k] * omega:.3e} below tolerance near g = {mu[k]:.6f}; "
            "the spectrum is (nearly) degenerate, try another seed")
    pos = mu > 0
    if pos.sum() != N:
        raise DegenerateSpectrum(f"expected {N} positive eigenvalues of G, found {int(pos.sum())}")
    g = mu[pos]
    Wp = W[:, pos]
    # match exact eigenvectors to the unperturbed ones by overlap
    ov = Phi_plus.conj().T @ Wp
    rows, cols = linear_sum_assignment(-np.abs(ov) ** 2)
    order = cols[np.argsort(rows)]
    Wp = Wp[:, order]
    g = g[order]
    d = np.einsum("in,in->n", Phi_plus.conj(), Wp)
    Wp = Wp * (np.abs(d) / np.where(d == 0, 1, d))[None, :]
    return SpectralData(N, omega, lam, g, Wp, v, phi, V)


def spectral_data(params: ModelParams, coupling: EnvironmentCoupling | None = None,
                  gap_tol: float | None = None) -> SpectralData:
    if coupling is None:
        coupling = generate_coupling(params.N, params.seed)
    return spectral_decompose(eu_stueckelbergian(params, coupling), params.omega,
                              V=1j * coupling.B, s=params.s, gap_tol=gap_tol)


# --- nu --------------------------------------------------------------------------

@dataclass
class NuSpectrum:
    """``nu_n+ = -i <Psi_n+|I_E (x) J_U|Psi_n+>`` and its perturbative approximants.

    ``nu_n- = -nu_n+`` for every mode.
    """

    exact: np.ndarray
    second: np.ndarray
    third: np.ndarray
    third_full: np.ndarray
    v: np.ndarray

    def plus(self, mode: str) -> np.ndarray:
        try:
            return {"exact": self.exact, "second": self.second, "third": self.third,
                    "third_full": self.third_full}[mode]
        except KeyError:
            raise ValueError(f"unknown nu mode {mode!r}") from None

    def all(self, mode: str = "exact") -> np.ndarray:
        p = self.plus(mode)
        return np.concatenate([p, -p])


def compute_nu(spec: SpectralData) -> NuSpectrum:
    P = spec.Psi_plus.reshape(spec.N, 2, spec.N)
    JP = np.einsum("uv,evn->eun", J2, P)
    nu = np.real(-1j * np.einsum("eun,eun->n", P.conj(), JP))
    lam = spec.lam
    second = np.full(spec.N, xi_factor(lam))
    third = nu_third_order_simple(lam, spec.v)
    if lam == 0:
        full = np.ones(spec.N)
    else:
        full = perturbation_expansion(spec.V, spec.Phi_plus, spec.P_minus, lam).nu3
    return NuSpectrum(nu, second, third, full, spec.v)


# --- projection ---------------------------------------------------------------------

def projection(M: np.ndarray, spec: SpectralData, d_A: int) -> np.ndarray:
    """``P(M) = sum_j |Psi_j><Psi_j| (x) Tr_EU[(|Psi_j><Psi_j| (x) I_A) M]``."""
    D = 2 * spec.N
    M = np.asarray(M)
    if M.shape != (D * d_A, D * d_A):
        raise DimMismatch(f"operator has shape {M.shape}, expected {D * d_A}")
    Psi = spec.Psi
    T = M.reshape(D, d_A, D, d_A)
    blocks = np.einsum("in,iajb,jn->nab", Psi.conj(), T, Psi, optimize=True)
    out = np.einsum("in,nab,jn->iajb", Psi, blocks, Psi.conj(), optimize=True).reshape(D * d_A, D * d_A)
    return out.real if np.isrealobj(M) else out


def partial_expectations(spec: SpectralData, op_UA: np.ndarray, d_A: int) -> np.ndarray:
    """``<Psi_n+| I_E (x) op |Psi_n+>`` as ``(N, d_A, d_A)`` for an operator on ``U (x) A``."""
    T = spec.env_marginals()   # (N, 2, 2), T[n, u, v] = sum_e Psi[e,u,n] conj(Psi[e,v,n])
    O = np.asarray(op_UA).reshape(2, d_A, 2, d_A)
    # <Psi|I (x) O|Psi> = sum_{u,v} conj(Psi_u) O_{u a, v b} Psi_v = sum T[n, v, u] O[u, a, v, b]
    return np.einsum("nvu,uavb->nab", T, O)


@dataclass
class ProjectedState:
    """State of the projected form, weights ``c_n`` and unit-trace ``sigma_n`` on A."""

    spec: SpectralData
    c: np.ndarray
    sigma: np.ndarray

    @property
    def d_A(self) -> int:
        return self.sigma.shape[-1]

    def dense(self) -> np.ndarray:
        Pp = self.spec.Psi_plus
        D, d = 2 * self.spec.N, self.d_A
        half = np.einsum("n,in,jn,nab->iajb", self.c, Pp, Pp.conj(), self.sigma, optimize=True)
        return half.real.reshape(D * d, D * d)

    def reduced_UA(self) -> np.ndarray:
        return reduce_UA(self.spec, self.c, self.sigma[None])[0]

    def eu_marginal(self) -> np.ndarray:
        Pp = self.spec.Psi_plus
        tr = np.real(np.trace(self.sigma, axis1=1, axis2=2))
        return np.real((Pp * (self.c * tr)) @ Pp.conj().T)

    @classmethod
    def from_state(cls, spec: SpectralData, rho0: np.ndarray, d_A: int) -> "ProjectedState":
        """Parallel part of a global real state.

        ``tau_n = <Psi_n+|rho0|Psi_n+>`` (partial), ``c_n = 2 Tr tau_n``, ``sigma_n = tau_n / Tr tau_n``.
        """
        D = 2 * spec.N
        rho0 = np.asarray(rho0)
        if rho0.shape != (D * d_A, D * d_A):
            raise DimMismatch(f"state has shape {rho0.shape}, expected {D * d_A}")
        Pp = spec.Psi_plus
        T = rho0.reshape(D, d_A, D, d_A)
        tau = np.einsum("in,iajb,jn->nab", Pp.conj(), T, Pp, optimize=True)
        w = np.real(np.trace(tau, axis1=1, axis2=2))
        safe = np.where(w > 1e-300, w, 1.0)
        sigma = tau / safe[:, None, None]
        sigma[w <= 1e-300] = np.eye(d_A) / d_A
        return cls(spec, 2.0 * w, sigma)

    @classmethod
    def from_product(cls, spec: SpectralData, rho_UA: np.ndarray, env: str = "maximally_mixed",
                     seed: int = 0) -> "ProjectedState":
        d_A = rho_UA.shape[0] // 2
        return cls.from_state(spec, initial_state(spec.N, rho_UA, env, seed), d_A)


def reduce_UA(spec: SpectralData, c: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """``rho_UA = Re sum_n c_n Tr_E|Psi_n+><Psi_n+| (x) sigma_n`` for a series ``sigma[t, n]``."""
    T = spec.env_marginals()
    d = sigma.shape[-1]
    out = np.einsum("n,nuv,tnab->tuavb", c, T, sigma, optimize=True)
    return out.real.reshape(sigma.shape[0], 2 * d, 2 * d)


def split_local_generator(S_UA: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``S_UA = I (x) L - J (x) K + X (x) Px + Z (x) Pz``; returns ``(L, K, Px, Pz)``."""
    S_UA = np.asarray(S_UA, dtype=float)
    if S_UA.ndim != 2 or S_UA.shape[0] != S_UA.shape[1] or S_UA.shape[0] % 2:
        raise DimMismatch(f"S_UA must be square of even size, got {S_UA.shape}")
    d = S_UA.shape[0] // 2
    c = ubit_expand(S_UA, (2, d))
    L, K = c["I"], -c["J"]
    if np.linalg.norm(L + L.T) > 1e-10 * max(1.0, np.linalg.norm(L)):
        raise BadLocalGenerator("the I_U part of S_UA is not antisymmetric")
    if np.linalg.norm(K - K.T) > 1e-10 * max(1.0, np.linalg.norm(K)):
        raise BadLocalGenerator("the J_U part of S_UA is not symmetric")
    require_antisymmetric(S_UA)
    return L, K, c["X"], c["Z"]


@dataclass
class ProjectedEvolution:
    times: np.ndarray
    spec: SpectralData
    c: np.ndarray
    sigma: np.ndarray          # (T, N, d, d), the + member of each pair
    rho_UA: np.ndarray         # (T, 2d, 2d)
    nu_mode: str

    def state_at(self, k: int) -> ProjectedState:
        return ProjectedState(self.spec, self.c, self.sigma[k])


def evolve_projected(state0: ProjectedState, S_UA: np.ndarray, times: Sequence[float],
                     nu_mode: str = "exact", keep_xz: bool = False,
                     nu: NuSpectrum | None = None) -> ProjectedEvolution:
    """Evolve each ``sigma_n`` with ``H_n = nu_n K + i L`` (or the full partial expectation).

    ``X_U`` and ``Z_U`` parts of ``S_UA`` are dropped with a warning unless
    ``keep_xz`` is set, in which case ``H_n = i <Psi_n+|I_E (x) S_UA|Psi_n+>`` is
    used unchanged (exact ``nu`` only).
    """
    spec = state0.spec
    d = state0.d_A
    times = np.asarray(times, dtype=float)
    S_UA = np.asarray(S_UA, dtype=float)
    if S_UA.shape != (2 * d, 2 * d):
        raise DimMismatch(f"S_UA has shape {S_UA.shape}, expected {2 * d}")
    L, K, Px, Pz = split_local_generator(S_UA)
    has_xz = max(np.abs(Px).max(initial=0.0), np.abs(Pz).max(initial=0.0)) > 1e-14
    if keep_xz:
        if nu_mode != "exact":
            raise ValueError("keep_xz needs the exact nu mode")
        M = partial_expectations(spec, S_UA, d)
        H = 1j * M
    else:
        if has_xz:
            warnings.warn("dropping X_U and Z_U parts of the local generator", stacklevel=2)
        if nu is None:
            nu = compute_nu(spec) if nu_mode != "second" else None
        nup = np.full(spec.N, xi_factor(spec.lam)) if nu_mode == "second" else nu.plus(nu_mode)
        H = nup[:, None, None] * K[None] + 1j * L[None]
    H = 0.5 * (H + H.conj().transpose(0, 2, 1))
    h, Q = np.linalg.eigh(H)
    s0 = np.einsum("nai,nab,nbj->nij", Q.conj(), state0.sigma, Q)
    ph = np.exp(-1j * np.einsum("t,na->tna", times, h))
    st = s0[None] * ph[:, :, :, None] * ph.conj()[:, :, None, :]
    sigma_t = np.einsum("nai,tnij,nbj->tnab", Q, st, Q.conj(), optimize=True)
    rho = reduce_UA(spec, state0.c, sigma_t)
    return ProjectedEvolution(times, spec, state0.c, sigma_t, rho, nu_mode)


# --- no-signalling harness -------------------------------------------------------

def local_pair_generator(K_A, L_A, K_B, L_B) -> np.ndarray:
    """``(I L_A - J K_A) (x) I_B + I_A (x) (I L_B - J K_B)`` on ``U (x) A (x) B``."""
    K_A, L_A, K_B, L_B = (np.asarray(x, dtype=float) for x in (K_A, L_A, K_B, L_B))
    dA, dB = K_A.shape[0], K_B.shape[0]
    K = np.kron(K_A, np.eye(dB)) + np.kron(np.eye(dA), K_B)
    L = np.kron(L_A, np.eye(dB)) + np.kron(np.eye(dA), L_B)
    return np.kron(I2, L) - np.kron(J2, K)


@dataclass
class SignalingReport:
    mode: str
    observer: str
    divergences: list
    max_divergence: float
    reduced: list = field(repr=False, default_factory=list)


def no_signaling_experiment(params: ModelParams, alice: tuple, bobs: Sequence[tuple],
                            times: Sequence[float], sigma0: np.ndarray,
                            mode: str = "projected", observer: str = "A",
                            coupling: EnvironmentCoupling | None = None,
                            spec: SpectralData | None = None, varied: str = "B") -> SignalingReport:
    """Compare the observer's reduced state across a list of partner generators.

    Parameters
    ----------
    alice : (K_A, L_A)
        Fixed local generator of system A.
    bobs : list of (K_B, L_B)
        Alternative generators for system B; divergences are measured against the first.
    sigma0 : ndarray
        Initial complex state of AB (``d_A d_B`` square).
    mode : {"projected", "exact"}
    observer : {"A", "B"}
        Which system's reduced ``U`` state is compared.
    varied : {"B", "A"}
        Which system the list of generators is applied to; the fixed ``alice``
        generator then belongs to the other one.
    """
    if varied not in ("A", "B") or observer not in ("A", "B"):
        raise ValueError("observer and varied must be 'A' or 'B'")
    fixed = tuple(np.asarray(x, dtype=float) for x in alice)
    others = [tuple(np.asarray(x, dtype=float) for x in g) for g in bobs]
    pairs = [(fixed, g) if varied == "B" else (g, fixed) for g in others]
    dA, dB = pairs[0][0][0].shape[0], pairs[0][1][0].shape[0]
    if coupling is None:
        coupling = generate_coupling(params.N, params.seed)
    rho_UAB = complex_to_real_state(sigma0)
    keep = [0, 1] if observer == "A" else [0, 2]
    times = np.asarray(times, dtype=float)
    pm = ModelParams(params.N, params.s, params.omega, params.seed, dA * dB)
    generators = [local_pair_generator(a[0], a[1], b[0], b[1]) for a, b in pairs]
    reduced = []
    if mode == "projected":
        if spec is None:
            spec = spectral_data(pm, coupling)
        state0 = ProjectedState.from_product(spec, rho_UAB)
        nu = compute_nu(spec)
        for S in generators:
            ev = evolve_projected(state0, S, times, "exact", nu=nu)
            reduced.append(np.stack([partial_trace(r, (2, dA, dB), keep) for r in ev.rho_UA]))
    elif mode == "exact":
        rho0 = initial_state(pm.N, rho_UAB)
        for S in generators:
            series = evolve_exact(rho0, assemble_full_stueckelbergian(pm, coupling, S), times, pm.N)
            reduced.append(np.stack([partial_trace(r, (2, dA, dB), keep) for r in series]))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    div = [float(np.max(np.linalg.norm(r - reduced[0], axis=(1, 2)))) for r in reduced]
    return SignalingReport(mode, observer, div, max(div), reduced)
