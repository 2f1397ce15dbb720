"""Closed-form perturbative predictions used as overlays and oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NearDegenerateDenominator
from .linalg import bessel_j1, jinc

DENOM_TOL_REL = 1e-6


def _bessel_ratio(x: np.ndarray) -> np.ndarray:
    """``J1(x)/x`` with the removable singularity at 0 filled in."""
    return 0.5 * jinc(x)


def predict_gamma(s: float, omega: float, t) -> np.ndarray:
    """``gamma(t) = 1 - lam^2 + [J1(2st)/(omega t)]^2 cos(2 omega t)``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    t = np.asarray(t, dtype=float)
    lam = s / omega
    # J1(2st)/(omega t) = 2 lam * J1(x)/x with x = 2st
    r = 2.0 * lam * _bessel_ratio(2.0 * s * t)
    return 1.0 - lam**2 + r**2 * np.cos(2.0 * omega * t)


def beta_envelope(s: float, t) -> np.ndarray:
    """``[J1(2st)/(st)]^2``; identically 1 when ``s = 0``."""
    t = np.asarray(t, dtype=float)
    return (2.0 * _bessel_ratio(2.0 * s * t)) ** 2


def predict_beta(s: float, omega: float, t) -> tuple[np.ndarray, np.ndarray]:
    """``(beta_X, beta_Z) = [J1(2st)/(st)]^2 (cos 2 omega t, sin 2 omega t)``."""
    t = np.asarray(t, dtype=float)
    env = beta_envelope(s, t)
    return env * np.cos(2 * omega * t), env * np.sin(2 * omega * t)


def xi_factor(lam: float) -> float:
    """Precession frequency reduction ``1 - lam^2/2``."""
    return 1.0 - 0.5 * lam**2


def decoherence_envelope(lam: float, Omega: float, t) -> np.ndarray:
    """``f(t) = |2 J1(x)/x|`` with ``x = lam^3 Omega t / 2`` (approximate model)."""
    t = np.asarray(t, dtype=float)
    return np.abs(jinc(0.5 * lam**3 * Omega * t))


def coherence_time(lam: float, Omega: float) -> float:
    """First time at which the envelope ``f`` drops to ``1/e``; ``inf`` when ``lam = 0``."""
    if lam == 0:
        return math.inf
    # jinc(x) = 1/e first happens below its first zero at x ~ 3.8317
    x = brentq(lambda x: float(jinc(x)) - math.exp(-1.0), 1e-6, 3.8317)
    return 2.0 * x / (lam**3 * Omega)


@dataclass(frozen=True)
class PrecessionPrediction:
    lam: float
    Omega: float
    xi: float
    tau: float
    t_star: float

    def envelope(self, t) -> np.ndarray:
        return decoherence_envelope(self.lam, self.Omega, t)

    def bloch(self, t) -> np.ndarray:
        """Model Bloch vector ``(f cos, xi f sin, 0)(xi Omega t)`` for a spin started along x."""
        t = np.asarray(t, dtype=float)
        f = self.envelope(t)
        ph = self.xi * self.Omega * t
        return np.stack([f * np.cos(ph), self.xi * f * np.sin(ph), np.zeros_like(t)], axis=-1)


def predict_precession(lam: float, Omega: float) -> PrecessionPrediction:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    tau = math.inf if lam == 0 else 1.0 / (lam**3 * Omega)
    return PrecessionPrediction(lam, Omega, xi_factor(lam), tau, coherence_time(lam, Omega))


# --- perturbation expansion --------------------------------------------------------

@dataclass
class PerturbationResult:
    """Approximants for the positive-subspace eigenpairs of ``G0 + lam V``.

    ``g[order]`` holds eigenvalue approximants through ``order``; ``psi[order]``
    the eigenvector approximants (columns, in the ``Phi+`` ordering) through ``order``.
    ``nu3`` is the third-order approximant of ``-i <Psi|I (x) J|Psi>``.
    """

    lam: float
    g: dict
    psi: dict
    nu2: np.ndarray
    nu3: np.ndarray
    flagged: list


def perturbation_expansion(V: np.ndarray, Phi_plus: np.ndarray, P_minus: np.ndarray, lam: float,
                           denom_tol: float | None = None, strict: bool = False) -> PerturbationResult:
    """Eigenvalue (to ``lam^3``) and eigenvector (to ``lam^2``) expansions for ``G0 + lam V``.

    Parameters
    ----------
    V : ndarray
        Hermitian perturbation.
    Phi_plus : ndarray
        Columns ``|Phi_n^+>`` spanning the ``G0 = +1`` subspace and diagonalising ``V`` there.
    P_minus : ndarray
        Projector onto the ``G0 = -1`` subspace.
    lam : float
        Expansion parameter.
    denom_tol : float, optional
        Pairs with ``|V_nn - V_kk|`` below this are excluded symmetrically from the
        sums (and reported in ``flagged``). Defaults to ``1e-6`` times the spread of ``V_nn``.
    strict : bool
        Raise :class:`NearDegenerateDenominator` instead of excluding.
    """
    Phi = np.asarray(Phi_plus)
    A = V @ Phi                       # V|Phi_n>
    PA = P_minus @ A                  # P- V|Phi_n>
    v = np.real(np.einsum("in,in->n", Phi.conj(), A))
    W2 = A.conj().T @ PA              # (V P- V)_{nk}
    PPA = P_minus @ (V @ PA)          # P- V P- V|Phi_n>
    W3 = A.conj().T @ PPA             # (V P- V P- V)_{nk}
    n = len(v)
    spread = float(np.ptp(v)) if n > 1 else 1.0
    tol = DENOM_TOL_REL * max(spread, 1e-300) if denom_tol is None else denom_tol

    D = v[:, None] - v[None, :]       # D[n, k] = V_nn - V_kk
    mask = np.abs(D) >= tol
    np.fill_diagonal(mask, False)
    offdiag = ~np.eye(n, dtype=bool)
    flagged = [(int(a), int(b)) for a, b in zip(*np.nonzero(offdiag & ~mask)) if a < b]
    if flagged and strict:
        raise NearDegenerateDenominator(f"{len(flagged)} near-degenerate pairs, first {flagged[0]}")
    inv = np.zeros_like(D)
    inv[mask] = 1.0 / D[mask]

    w2 = np.real(np.diag(W2))
    w3 = np.real(np.diag(W3))
    absW2sq = np.abs(W2) ** 2
    third = w3 - v * w2 + np.sum(absW2sq * inv, axis=1)
    g = {0: np.ones(n), 1: 1 + lam * v}
    g[2] = g[1] + 0.5 * lam**2 * w2
    g[3] = g[2] + 0.25 * lam**3 * third

    # eigenvector expansion; coefficient matrices indexed [k, n]
    C1 = W2 * inv.T                                         # (VP-V)_kn/(V_nn - V_kk)
    psi1 = 0.5 * (PA + Phi @ C1)
    inv2 = inv.T**2                                         # 1/(V_nn - V_kk)^2 at [k, n]
    term = (PPA - PA * v[None, :] - 0.5 * Phi * w2[None, :]
            + PA @ C1
            - Phi @ (W2 * inv2 * w2[None, :])
            - 0.5 * Phi * np.sum(absW2sq * inv2, axis=0)[None, :]
            + Phi @ (W3 * inv.T)
            - Phi @ (W2 * inv.T * v[None, :])
            + Phi @ (inv.T * (W2 @ C1)))
    psi = {0: Phi.copy(), 1: Phi + lam * psi1}
    psi[2] = psi[1] + 0.25 * lam**2 * term

    xi = 1 - 0.5 * lam**2 * w2
    nu3 = xi - 0.5 * lam**3 * third
    return PerturbationResult(lam, g, psi, xi, nu3, flagged)


def nu_third_order_simple(lam: float, v: np.ndarray) -> np.ndarray:
    """``xi + lam^3 v_n / 4`` from the semicircle principal-value estimate."""
    return xi_factor(lam) + 0.25 * lam**3 * np.asarray(v)


# --- semicircle law ---------------------------------------------------------------

def semicircle_density(v, N: int = 1) -> np.ndarray:
    """``eta(v) = (N/pi) sqrt(1 - (v/2)^2)`` on ``[-2, 2]``, zero outside."""
    v = np.asarray(v, dtype=float)
    return (N / math.pi) * np.sqrt(np.clip(1.0 - (v / 2.0) ** 2, 0.0, None))


def semicircle_cdf(v) -> np.ndarray:
    """Normalised cumulative distribution of the semicircle on ``[-2, 2]``."""
    x = np.clip(np.asarray(v, dtype=float) / 2.0, -1.0, 1.0)
    return 0.5 + (x * np.sqrt(1 - x**2) + np.arcsin(x)) / math.pi


@dataclass
class SemicircleReport:
    N: int
    mean_v2: float
    v_min: float
    v_max: float
    ks_distance: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    hist_expected: np.ndarray


def semicircle_checks(v: np.ndarray, bins: int = 20) -> SemicircleReport:
    """Compare the half-space coupling eigenvalues ``v_n`` with the semicircle law."""
    v = np.sort(np.asarray(v, dtype=float))
    n = len(v)
    F = semicircle_cdf(v)
    ks = max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))
    edges = np.linspace(-2.2, 2.2, bins + 1)
    counts, _ = np.histogram(v, edges)
    expected = n * np.diff(semicircle_cdf(edges))
    return SemicircleReport(n, float(np.mean(v**2)), float(v[0]), float(v[-1]), float(ks),
                            edges, counts, expected)


def bessel_j1_scalar(x: float) -> float:
    return float(bessel_j1(x))
