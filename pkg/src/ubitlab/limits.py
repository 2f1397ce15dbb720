"""Closed-form ``exp(St)`` via sin/cos of ``sqrt(S^T S)`` and the large-omega factorisation.

For ``S^ = -omega J^ + D^`` the evolution approaches ``exp(-J^ omega t) exp(D^_c t)``
as ``omega`` grows, where ``D^_c`` is the part of ``D^`` commuting with ``J^``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import J2, antisym_exp, embed, require_antisymmetric
from .transcription import commutant_split, real_to_complex_op

SINC_SERIES_CUTOFF = 1e-4


def sinc(x: np.ndarray) -> np.ndarray:
    """``sin(x)/x`` with the series ``1 - x^2/6 + x^4/120`` for ``|x| < 1e-4``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SINC_SERIES_CUTOFF
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(xs) / xs)


def sincos_exponential(S: np.ndarray, t: float) -> np.ndarray:
    """``exp(St) = S sin(R t)/R + cos(R t)`` with ``R = sqrt(S^T S)``."""
    S = require_antisymmetric(S)
    StS = S.T @ S
    ev, Q = np.linalg.eigh(0.5 * (StS + StS.T))
    r = np.sqrt(np.clip(ev, 0.0, None))
    sin_over_r = t * sinc(r * t)
    Sinc = (Q * sin_over_r) @ Q.T
    Cos = (Q * np.cos(r * t)) @ Q.T
    return S @ Sinc + Cos


@dataclass
class LimitReport:
    omegas: np.ndarray
    deltas: np.ndarray
    envelope: np.ndarray
    slope: float
    split_residual: float
    commutes_residual: float
    window: dict = field(default_factory=dict, repr=False)


def envelope_slope(omegas: Sequence[float], envelope: Sequence[float]) -> float:
    """Least-squares slope of ``log(envelope)`` against ``log(omega)``."""
    return float(np.polyfit(np.log(omegas), np.log(envelope), 1)[0])


def factorisation_gap(S_full: np.ndarray, Jh: np.ndarray, D_c: np.ndarray, omega: float, t: float) -> float:
    """Spectral norm of ``exp(S t) - exp(-J omega t) exp(D_c t)``."""
    E1 = antisym_exp(S_full, t)
    rot = math.cos(omega * t) * np.eye(Jh.shape[0]) - math.sin(omega * t) * Jh
    E2 = rot @ antisym_exp(D_c, t)
    return float(np.linalg.norm(E1 - E2, 2))


def complex_split_residual(D_c: np.ndarray, B: np.ndarray, S_UA: np.ndarray, s: float,
                           N: int, d_A: int) -> float:
    """Check that the complex image of ``D^_c`` is ``H_E (x) I + I (x) H_A``."""
    H = real_to_complex_op(D_c, (N, 2, d_A), ubit_axis=1)
    B_c, _ = commutant_split(B, (N, 2), ubit_axis=1)
    S_c, _ = commutant_split(S_UA, (2, d_A), ubit_axis=0)
    H_E = s * real_to_complex_op(B_c, (N, 2), ubit_axis=1)
    H_A = real_to_complex_op(S_c, (2, d_A), ubit_axis=0)
    expect = np.kron(H_E, np.eye(d_A)) + np.kron(np.eye(N), H_A)
    return float(np.linalg.norm(H - expect))


def large_omega_scan(B: np.ndarray, S_UA: np.ndarray, s: float, omegas: Sequence[float],
                     t: float, window_points: int = 8) -> LimitReport:
    """Deviation ``Delta(omega)`` from the factorised evolution over a list of ``omega``.

    Around each nominal ``omega`` the deviation is also sampled at
    ``window_points`` values spanning one period ``2 pi / t`` of the ubit phase,
    and the maximum gives the upper envelope used for the scaling fit.
    """
    B = require_antisymmetric(B)
    S_UA = require_antisymmetric(S_UA)
    N = B.shape[0] // 2
    d_A = S_UA.shape[0] // 2
    dims = (N, 2, d_A)
    Jh = embed(J2, dims, 1)
    D = s * np.kron(B, np.eye(d_A)) + np.kron(np.eye(N), S_UA)
    D_c, _ = commutant_split(D, dims, ubit_axis=1)
    omegas = np.asarray(omegas, dtype=float)
    deltas = np.empty(len(omegas))
    env = np.empty(len(omegas))
    window = {}
    for k, w in enumerate(omegas):
        deltas[k] = factorisation_gap(-w * Jh + D, Jh, D_c, w, t)
        ws = w + (2 * math.pi / t) * np.arange(window_points) / window_points
        vals = [deltas[k]] + [factorisation_gap(-x * Jh + D, Jh, D_c, x, t) for x in ws[1:]]
        window[float(w)] = (ws, np.asarray(vals))
        env[k] = max(vals)
    slope = envelope_slope(omegas, env) if len(omegas) > 1 else float("nan")
    split = complex_split_residual(D_c, B, S_UA, s, N, d_A)
    comm = float(np.linalg.norm(D_c @ Jh - Jh @ D_c))
    return LimitReport(omegas, deltas, env, slope, split, comm, window)
