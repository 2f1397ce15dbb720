"""Exact evolution of the global state and the named numerical experiments.

Everything is computed from one Hermitian eigendecomposition ``iS = W diag(mu) W^dagger``
per generator. The reduced state after tracing out the environment is

    out[q, p](t) = sum_ab e^{-i mu_a t} X'_ab e^{i mu_b t} (W_p^dagger W_q)_ba,

where ``X' = W^dagger X0 W`` and ``W_p`` is the block of rows of ``W`` whose
local index is ``p``. This costs ``O(T D^2)`` per output entry instead of
``O(T D^3)`` for dense conjugation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import DimMismatch, InvalidState
from .linalg import (
    I2, J2, X2, Z2, AntisymmetricSpectrum, partial_trace, ubit_expand,
)
from .model import (
    EnvironmentCoupling, ModelParams, assemble_full_stueckelbergian, bloch_to_complex,
    eu_stueckelbergian, generate_coupling, initial_state,
)
from .transcription import complex_to_real_state, hamiltonian_to_stueckelbergian

PSD_TOL = 1e-9
TRACE_TOL = 1e-10
_TIME_CHUNK = 256

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ReducedEvolver:
    """Evolves operators under ``exp(St) . exp(-St)`` and traces out the first factor.

    Parameters
    ----------
    S : ndarray
        Real antisymmetric generator on ``E (x) R`` with ``dim E = n_env``.
    n_env : int
        Dimension of the leading factor to trace out.
    """

    def __init__(self, S: np.ndarray, n_env: int, spectrum: AntisymmetricSpectrum | None = None):
        self.spec = spectrum if spectrum is not None else AntisymmetricSpectrum(S)
        D = self.spec.dim
        if D % n_env:
            raise DimMismatch(f"dimension {D} is not divisible by n_env={n_env}")
        self.n_env = n_env
        self.m = D // n_env
        self._W3 = self.spec.W.reshape(n_env, self.m, D)

    def gram(self, p: int, q: int) -> np.ndarray:
        """``W_p^dagger W_q``."""
        return self._W3[:, p, :].conj().T @ self._W3[:, q, :]

    def evolve(self, X0: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Reduced series ``Tr_E[exp(St) X0 exp(-St)]`` with shape ``(T, m, m)``."""
        times = np.asarray(times, dtype=float)
        X0 = np.asarray(X0)
        D = self.spec.dim
        if X0.shape != (D, D):
            raise DimMismatch(f"initial operator has shape {X0.shape}, expected ({D}, {D})")
        Xp = self.spec.to_eigenbasis(X0)
        real_in = np.isrealobj(X0)
        if np.allclose(X0, X0.T, rtol=0, atol=1e-14 * max(1.0, np.abs(X0).max())):
            sym = 1
        elif np.allclose(X0, -X0.T, rtol=0, atol=1e-14 * max(1.0, np.abs(X0).max())):
            sym = -1
        else:
            sym = 0
        out = np.zeros((times.size, self.m, self.m), dtype=complex)
        for q in range(self.m):
            for p in range(self.m):
                if sym and real_in and p > q:
                    continue
                C = Xp * self.gram(p, q).T
                for lo in range(0, times.size, _TIME_CHUNK):
                    P = self.spec.phases(times[lo:lo + _TIME_CHUNK])
                    out[lo:lo + _TIME_CHUNK, q, p] = np.einsum("ta,ta->t", P @ C, P.conj())
                if sym and real_in and p < q:
                    out[:, p, q] = sym * out[:, q, p].conj()
        return out.real if real_in else out

    def evolve_full(self, X0: np.ndarray, t: float) -> np.ndarray:
        return self.spec.conjugate(X0, t)


def _check_reduced_states(series: np.ndarray) -> None:
    tr = np.trace(series, axis1=1, axis2=2)
    if np.abs(tr - 1).max(initial=0.0) > TRACE_TOL * 10:
        raise InvalidState(f"reduced trace drifted by {np.abs(tr - 1).max():.2e}")
    if series.size and np.linalg.eigvalsh(0.5 * (series + series.transpose(0, 2, 1))).min() < -PSD_TOL:
        raise InvalidState("reduced state has a negative eigenvalue beyond tolerance")


def evolve_exact(rho0: np.ndarray, S: np.ndarray, times: Sequence[float], n_env: int,
                 *, evolver: ReducedEvolver | None = None) -> np.ndarray:
    """``rho_UA(t) = Tr_E(exp(St) rho0 exp(-St))`` for every time in ``times``."""
    ev = evolver if evolver is not None else ReducedEvolver(S, n_env)
    series = ev.evolve(rho0, times)
    _check_reduced_states(series)
    return series


def evolve_exact_full(rho0: np.ndarray, S: np.ndarray, t: float) -> np.ndarray:
    """Global state ``exp(St) rho0 exp(-St)``."""
    return AntisymmetricSpectrum(S).conjugate(rho0, t)


# --- Bloch trajectories ---------------------------------------------------------

_IX = np.kron(I2, X2)
_JJ = np.kron(J2, J2)
_IZ = np.kron(I2, Z2)


def bloch_components(rho_UA: np.ndarray) -> np.ndarray:
    """``(b_x, b_y, b_z) = Tr rho (I X, J J, I Z)`` for one state or a series."""
    R = np.asarray(rho_UA)
    if R.shape[-2:] != (4, 4):
        raise DimMismatch("Bloch components need a two-dimensional local system")
    return np.stack([np.einsum("...ij,ji->...", R, O) for O in (_IX, _JJ, _IZ)], axis=-1).real


def ubit_residuals(rho_UA: np.ndarray, d_A: int) -> tuple[np.ndarray, np.ndarray]:
    """Bloch-normalised Frobenius norms of the ``X_U`` and ``Z_U`` coefficient blocks."""
    R = np.asarray(rho_UA)
    single = R.ndim == 2
    R = R[None] if single else R
    rx, rz = np.empty(len(R)), np.empty(len(R))
    scale = 2.0 * math.sqrt(d_A)
    for k, r in enumerate(R):
        c = ubit_expand(r, (2, d_A))
        rx[k] = scale * np.linalg.norm(c["X"])
        rz[k] = scale * np.linalg.norm(c["Z"])
    return (rx[0], rz[0]) if single else (rx, rz)


@dataclass
class BlochTrajectory:
    times: np.ndarray
    b: np.ndarray
    residual_X: np.ndarray
    residual_Z: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_states(cls, times, rho_series: np.ndarray, **meta) -> "BlochTrajectory":
        rx, rz = ubit_residuals(rho_series, 2)
        return cls(np.asarray(times, dtype=float), bloch_components(rho_series), rx, rz, dict(meta))

    @property
    def b_x(self) -> np.ndarray:
        return self.b[:, 0]

    @property
    def b_y(self) -> np.ndarray:
        return self.b[:, 1]

    @property
    def b_z(self) -> np.ndarray:
        return self.b[:, 2]

    @property
    def length(self) -> np.ndarray:
        return np.linalg.norm(self.b, axis=1)

    def rows(self):
        for k in range(len(self.times)):
            yield (self.times[k], *self.b[k], self.length[k], self.residual_X[k], self.residual_Z[k])


# --- fitting --------------------------------------------------------------------

def _zero_crossing_rate(t: np.ndarray, y: np.ndarray) -> float:
    """Angular frequency estimated from sign changes of ``y - mean(y)``."""
    yc = y - y.mean()
    idx = np.nonzero(np.signbit(yc[:-1]) != np.signbit(yc[1:]))[0]
    if len(idx) < 2:
        raise ValueError("too few zero crossings to estimate a frequency")
    # linear interpolation of each crossing time
    tc = t[idx] - yc[idx] * (t[idx + 1] - t[idx]) / (yc[idx + 1] - yc[idx])
    return math.pi * (len(tc) - 1) / (tc[-1] - tc[0])


def fit_cosine(t: np.ndarray, y: np.ndarray, w0: float | None = None) -> dict:
    """Least-squares fit of ``c + A cos(w t + phi)``; ``w0`` defaults to a zero-crossing estimate."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if w0 is None:
        w0 = _zero_crossing_rate(t, y)
    c0 = float(y.mean())
    amp0 = float(np.ptp(y) / 2) or 1.0
    # linear least squares for the phase at fixed w0
    M = np.column_stack([np.ones_like(t), np.cos(w0 * t), np.sin(w0 * t)])
    coef = np.linalg.lstsq(M, y, rcond=None)[0]
    amp0 = float(np.hypot(coef[1], coef[2])) or amp0
    phi0 = float(np.arctan2(-coef[2], coef[1]))
    f = lambda tt, c, A, w, phi: c + A * np.cos(w * tt + phi)
    p, _ = curve_fit(f, t, y, p0=[coef[0], amp0, w0, phi0], maxfev=20000)
    c, A, w, phi = p
    if A < 0:
        A, phi = -A, phi + math.pi
    return {"c": float(c), "A": float(A), "w": float(abs(w)), "phi": float(phi),
            "rms": float(np.sqrt(np.mean((f(t, *p) - y) ** 2)))}


def fit_precession_frequency(traj: BlochTrajectory, Omega: float, n_periods: float = 10.0) -> float:
    """Fitted angular frequency of ``b_x`` over the first ``n_periods`` nominal periods."""
    sel = traj.times <= n_periods * 2 * math.pi / Omega + 1e-12
    return fit_cosine(traj.times[sel], traj.b_x[sel])["w"]


def fit_length_frequency(traj: BlochTrajectory, w_prec: float, Omega: float,
                         n_periods: float = 10.0) -> dict:
    """Fit of the Bloch-length oscillation, seeded at twice the precession frequency."""
    sel = traj.times <= n_periods * 2 * math.pi / Omega + 1e-12
    return fit_cosine(traj.times[sel], traj.length[sel], w0=2.0 * w_prec)


def per_cycle_minima(traj: BlochTrajectory, w_prec: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices and values of the minimum length in each half-cycle of the precession."""
    half = math.pi / w_prec
    k = np.floor((traj.times - traj.times[0] + half / 2) / half).astype(int)
    idx = []
    for c in np.unique(k):
        sel = np.nonzero(k == c)[0]
        # drop partial bins at the ends
        if traj.times[sel[-1]] - traj.times[sel[0]] < 0.8 * half:
            continue
        idx.append(sel[np.argmin(traj.length[sel])])
    idx = np.asarray(idx, dtype=int)
    return idx, traj.length[idx]


def default_time_grid(Omega: float, n_periods: float, per_period: int = 40) -> np.ndarray:
    n = int(round(n_periods * per_period)) + 1
    return np.linspace(0.0, n_periods * 2 * math.pi / Omega, n)


# --- experiments ----------------------------------------------------------------

@dataclass
class UbitCoefficients:
    """Reduced ubit operator ``u(t)`` started from ``I_E (x) sigma_k / N``.

    ``coeffs[name]`` holds ``1/2 Tr(sigma_name^T u(t))`` for name in I, J, X, Z.
    """

    times: np.ndarray
    initial: str
    u: np.ndarray
    coeffs: dict

    @property
    def gamma(self) -> np.ndarray:
        return self.coeffs["J"]

    @property
    def beta_X(self) -> np.ndarray:
        return self.coeffs["X"]

    @property
    def beta_Z(self) -> np.ndarray:
        return self.coeffs["Z"]


_UBIT_OPS = {"I": I2, "J": J2, "X": X2, "Z": Z2}


def relaxation_experiment(params: ModelParams, initial: str, times: Sequence[float],
                          coupling: EnvironmentCoupling | None = None,
                          evolver: ReducedEvolver | None = None) -> UbitCoefficients:
    """``u(t) = (1/N) Tr_E[exp(S_EU t) (I_E (x) sigma) exp(-S_EU t)]`` with no local generator."""
    if initial not in ("J", "X", "Z"):
        raise ValueError(f"initial ubit operator must be J, X or Z, got {initial!r}")
    if coupling is None:
        coupling = generate_coupling(params.N, params.seed)
    if evolver is None:
        evolver = ReducedEvolver(eu_stueckelbergian(params, coupling), params.N)
    X0 = np.kron(np.eye(params.N), _UBIT_OPS[initial]) / params.N
    u = evolver.evolve(X0, times)
    coeffs = {k: 0.5 * np.einsum("ab,tab->t", s, u) for k, s in _UBIT_OPS.items()}
    return UbitCoefficients(np.asarray(times, dtype=float), initial, u, coeffs)


def local_stueckelbergian(Omega: float, axis=(0.0, 0.0, 1.0), U_split: np.ndarray | None = None) -> np.ndarray:
    """Real generator of ``H = (Omega/2) n . sigma`` for a spin in a field along ``axis``."""
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValueError("precession axis must be nonzero")
    if abs(norm - 1) > 1e-9:
        raise ValueError(f"precession axis must be normalised, |n| = {norm}")
    H = 0.5 * Omega * (n[0] * PAULI["x"] + n[1] * PAULI["y"] + n[2] * PAULI["z"])
    return hamiltonian_to_stueckelbergian(H, U_split)


def bloch_initial_state(b0, U_split: np.ndarray | None = None) -> np.ndarray:
    """Real state of a spin with Bloch vector ``b0``, written in the basis fixed by ``U_split``."""
    sigma = bloch_to_complex(b0)
    if U_split is not None:
        sigma = U_split @ sigma @ U_split.conj().T
    return complex_to_real_state(sigma)


def bloch_rotation(U_split: np.ndarray) -> np.ndarray:
    """``R_ij = 1/2 Tr(P_i U P_j U^dagger)``, so ``b' = R b`` for ``sigma' = U sigma U^dagger``."""
    P = [PAULI[k] for k in "xyz"]
    return np.array([[0.5 * np.trace(P[i] @ U_split @ P[j] @ U_split.conj().T).real
                      for j in range(3)] for i in range(3)])


@dataclass
class PrecessionSetup:
    """Assembled generator and initial state for a precessing spin."""

    params: ModelParams
    coupling: EnvironmentCoupling
    S_UA: np.ndarray
    S: np.ndarray
    rho0: np.ndarray
    rho_UA0: np.ndarray


def precession_setup(params: ModelParams, Omega: float, axis=(0, 0, 1), b0=(1, 0, 0),
                     env: str = "maximally_mixed", U_split: np.ndarray | None = None,
                     coupling: EnvironmentCoupling | None = None) -> PrecessionSetup:
    if params.d_A != 2:
        raise DimMismatch("the precessing spin needs d_A = 2")
    if coupling is None:
        coupling = generate_coupling(params.N, params.seed)
    S_UA = local_stueckelbergian(Omega, axis, U_split)
    S = assemble_full_stueckelbergian(params, coupling, S_UA)
    rho_UA0 = bloch_initial_state(b0, U_split)
    rho0 = initial_state(params.N, rho_UA0, env, params.seed)
    return PrecessionSetup(params, coupling, S_UA, S, rho0, rho_UA0)


def precession_experiment(params: ModelParams, Omega: float, times: Sequence[float],
                          axis=(0, 0, 1), b0=(1, 0, 0), env: str = "maximally_mixed",
                          U_split: np.ndarray | None = None,
                          coupling: EnvironmentCoupling | None = None) -> BlochTrajectory:
    """Exact Bloch trajectory of a spin precessing about ``axis`` while the ubit couples to E.

    With a nontrivial ``U_split`` the Bloch vector is reported in the original
    (unrotated) spin basis.
    """
    setup = precession_setup(params, Omega, axis, b0, env, U_split, coupling)
    series = evolve_exact(setup.rho0, setup.S, times, params.N)
    traj = BlochTrajectory.from_states(times, series, experiment="precess", Omega=Omega,
                                       axis=list(map(float, axis)), b0=list(map(float, b0)))
    if U_split is not None:
        traj.b = traj.b @ bloch_rotation(U_split)
    return traj


def frozen_spin_experiment(params: ModelParams, Omega: float, t_freeze: float,
                           samples_per_segment: int = 40, freeze_samples: int = 200,
                           coupling: EnvironmentCoupling | None = None,
                           axis=(0, 0, 1), restart_axis=None) -> BlochTrajectory:
    """Quarter-cycle precession, a freeze with ``S_UA = 0``, then another quarter cycle.

    Segments are composed exactly: the full global state is carried across each
    switch of the generator. ``restart_axis`` optionally changes the precession
    axis for the final segment.
    """
    if t_freeze < 0:
        raise ValueError("t_freeze must be >= 0")
    setup = precession_setup(params, Omega, axis, (1, 0, 0), coupling=coupling)
    quarter = 0.5 * math.pi / Omega
    N = params.N
    ev_on = ReducedEvolver(setup.S, N)
    S_off = assemble_full_stueckelbergian(params, setup.coupling, None)
    if restart_axis is None:
        ev_last = ev_on
    else:
        ev_last = ReducedEvolver(assemble_full_stueckelbergian(
            params, setup.coupling, local_stueckelbergian(Omega, restart_axis)), N)

    t1 = np.linspace(0.0, quarter, samples_per_segment + 1)
    seg1 = ev_on.evolve(setup.rho0, t1)
    rho1 = ev_on.evolve_full(setup.rho0, quarter)
    times, series = [t1], [seg1]
    rho2 = rho1
    if t_freeze > 0:
        ev_off = ReducedEvolver(S_off, N)
        t2 = np.linspace(0.0, t_freeze, freeze_samples + 1)[1:]
        times.append(quarter + t2)
        series.append(ev_off.evolve(rho1, t2))
        rho2 = ev_off.evolve_full(rho1, t_freeze)
    t3 = np.linspace(0.0, quarter, samples_per_segment + 1)[1:]
    times.append(quarter + t_freeze + t3)
    series.append(ev_last.evolve(rho2, t3))
    all_t = np.concatenate(times)
    all_s = np.concatenate(series)
    _check_reduced_states(all_s)
    return BlochTrajectory.from_states(all_t, all_s, experiment="frozen", Omega=Omega,
                                       t_freeze=t_freeze, segment_ends=[quarter, quarter + t_freeze,
                                                                        2 * quarter + t_freeze])


def axis_scan(params: ModelParams, Omega: float, angles: Sequence[float], times: Sequence[float],
              coupling: EnvironmentCoupling | None = None) -> list[dict]:
    """Precession about axes tilted by ``angle`` from z towards y, started along x.

    Reports the minimum Bloch length and the final transverse length for each axis.
    """
    if coupling is None:
        coupling = generate_coupling(params.N, params.seed)
    out = []
    for a in angles:
        axis = (0.0, math.sin(a), math.cos(a))
        traj = precession_experiment(params, Omega, times, axis=axis, b0=(1, 0, 0), coupling=coupling)
        n = np.asarray(axis)
        along = traj.b @ n
        perp = np.linalg.norm(traj.b - np.outer(along, n), axis=1)
        out.append({"angle": float(a), "b_min": float(traj.length.min()),
                    "length_dip": float(1.0 - traj.length.min()),
                    "final_perp": float(perp[-1]), "trajectory": traj})
    return out
