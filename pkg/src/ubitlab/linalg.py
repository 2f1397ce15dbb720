"""Dense matrix kernel: antisymmetric exponentials, partial traces, ubit-basis
expansion and the order-1 Bessel function.

Every matrix here is a plain ``numpy.ndarray``. Tensor-factored spaces are
described by an ordered tuple of factor dimensions, row-major (the first
factor is the slowest-varying index), so ``E (x) U (x) A`` has dims
``(N, 2, d_A)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimMismatch, DomainError, EigFailure, NonAntisymmetric, NotOrthogonal

TOL_ANTISYM = 1e-10
TOL_ORTH = 1e-9

# Ubit operator basis. J squares to -I and plays the role of i.
I2 = np.eye(2)
J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
X2 = np.array([[0.0, 1.0], [1.0, 0.0]])
Z2 = np.array([[1.0, 0.0], [0.0, -1.0]])
UBIT_BASIS: dict[str, np.ndarray] = {"I": I2, "J": J2, "X": X2, "Z": Z2}


@dataclass(frozen=True)
class TensorSpace:
    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise DimMismatch(f"factor dimensions must be positive, got {self.factor_dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.factor_dims)

    def flat_index(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.factor_dims))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.factor_dims))


def _dims(space: TensorSpace | Sequence[int]) -> tuple[int, ...]:
    if isinstance(space, TensorSpace):
        return space.factor_dims
    return TensorSpace(tuple(space)).factor_dims


def _check_square(M: np.ndarray, n: int, what: str = "matrix") -> None:
    if M.ndim != 2 or M.shape != (n, n):
        raise DimMismatch(f"{what} has shape {M.shape}, expected ({n}, {n})")


def is_antisymmetric(S: np.ndarray, tol: float = TOL_ANTISYM) -> bool:
    scale = np.linalg.norm(S)
    return bool(np.linalg.norm(S + S.T) <= tol * max(scale, 1e-300))


def require_antisymmetric(S: np.ndarray, tol: float = TOL_ANTISYM) -> np.ndarray:
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimMismatch(f"generator must be square, got shape {S.shape}")
    if np.iscomplexobj(S):
        if np.abs(S.imag).max(initial=0.0) > tol * max(np.abs(S).max(initial=0.0), 1.0):
            raise NonAntisymmetric("generator has a non-negligible imaginary part")
        S = S.real
    if not np.all(np.isfinite(S)):
        raise NonAntisymmetric("generator contains NaN or Inf")
    if not is_antisymmetric(S, tol):
        rel = np.linalg.norm(S + S.T) / max(np.linalg.norm(S), 1e-300)
        raise NonAntisymmetric(f"||S + S^T|| / ||S|| = {rel:.3e} exceeds {tol:.1e}")
    return S


def hermitian_eigh(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``numpy.linalg.eigh`` with solver failures mapped to :class:`EigFailure`."""
    try:
        return np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigFailure(str(exc)) from exc


class AntisymmetricSpectrum:
    """Spectral form of a real antisymmetric generator.

    ``iS`` is Hermitian, so ``iS = W diag(mu) W^dagger`` with real ``mu`` and
    ``exp(S t) = W diag(exp(-i mu t)) W^dagger``. The decomposition is done once
    and reused for every time.
    """

    def __init__(self, S: np.ndarray, tol: float = TOL_ANTISYM):
        self.S = require_antisymmetric(S, tol)
        self.mu, self.W = hermitian_eigh(1j * self.S)

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    def phases(self, t: float | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(-1j * np.multiply.outer(t, self.mu))

    def exp(self, t: float) -> np.ndarray:
        Q = (self.W * self.phases(t)) @ self.W.conj().T
        return Q.real

    def to_eigenbasis(self, M: np.ndarray) -> np.ndarray:
        return self.W.conj().T @ M @ self.W

    def from_eigenbasis(self, M: np.ndarray) -> np.ndarray:
        return self.W @ M @ self.W.conj().T

    def conjugate(self, M: np.ndarray, t: float) -> np.ndarray:
        """``exp(St) M exp(-St)``."""
        u = self.phases(t)
        Mp = self.to_eigenbasis(M) * np.outer(u, u.conj())
        out = self.from_eigenbasis(Mp)
        return out.real if np.isrealobj(M) else out


def antisym_exp(S: np.ndarray, t: float, *, tol: float = TOL_ANTISYM) -> np.ndarray:
    """Orthogonal matrix ``exp(S t)`` for real antisymmetric ``S``.

    Raises
    ------
    NonAntisymmetric
        If ``||S + S^T||_F > tol * ||S||_F``.
    EigFailure
        If the Hermitian eigensolver does not converge.
    """
    Q = AntisymmetricSpectrum(S, tol).exp(t)
    err = np.linalg.norm(Q.T @ Q - np.eye(Q.shape[0]))
    if err > TOL_ORTH:
        raise NotOrthogonal(f"exp(St) orthogonality residual {err:.2e}")
    return Q


def partial_trace(M: np.ndarray, space: TensorSpace | Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor of ``space`` not listed in ``keep``.

    The kept factors stay in their original order.
    """
    dims = _dims(space)
    n = len(dims)
    total = math.prod(dims)
    M = np.asarray(M)
    _check_square(M, total)
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise DimMismatch(f"keep={keep} is not a nonempty subset of factors 0..{n - 1}")
    T = M.reshape(dims + dims)
    rows = list(range(n))
    cols = [k + n if k in keep else k for k in range(n)]
    out = [k for k in keep] + [k + n for k in keep]
    kept_dim = math.prod(dims[k] for k in keep)
    return np.einsum(T, rows + cols, out).reshape(kept_dim, kept_dim)


def permute_factors(M: np.ndarray, space: TensorSpace | Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator: new factor ``i`` is old factor ``order[i]``."""
    dims = _dims(space)
    n = len(dims)
    order = list(order)
    if sorted(order) != list(range(n)):
        raise DimMismatch(f"{order} is not a permutation of {n} factors")
    total = math.prod(dims)
    T = np.asarray(M).reshape(dims + dims)
    T = T.transpose(order + [k + n for k in order])
    return T.reshape(total, total)


def embed(op: np.ndarray, space: TensorSpace | Sequence[int], axis: int) -> np.ndarray:
    """``I (x) ... (x) op (x) ... (x) I`` with ``op`` on factor ``axis``."""
    dims = _dims(space)
    _check_square(np.asarray(op), dims[axis], "embedded operator")
    out = np.ones((1, 1))
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == axis else np.eye(d))
    return out


def kron_at(ubit_op: np.ndarray, rest_op: np.ndarray, space: TensorSpace | Sequence[int], axis: int) -> np.ndarray:
    """Place ``ubit_op`` on factor ``axis`` and ``rest_op`` on the remaining factors (in order)."""
    dims = _dims(space)
    n = len(dims)
    rest_dims = [d for k, d in enumerate(dims) if k != axis]
    _check_square(np.asarray(rest_op), math.prod(rest_dims), "rest operator")
    M = np.kron(ubit_op, rest_op)
    first = (dims[axis], *rest_dims)
    # factor positions in ``first``: 0 -> axis, then the others in order
    inv = [0] * n
    others = [k for k in range(n) if k != axis]
    for pos, k in enumerate(others, start=1):
        inv[k] = pos
    return permute_factors(M, first, inv)


def ubit_expand(M: np.ndarray, space: TensorSpace | Sequence[int] = None, ubit_axis: int = 0) -> dict[str, np.ndarray]:
    """Expand ``M`` as ``sum_k sigma_k (x) a^(k)`` over the ubit basis {I, J, X, Z}.

    ``a^(k) = 1/2 Tr_U[(sigma_k^T (x) I) M]``; the transpose makes the pairing
    exact for the antisymmetric ``J``. The coefficient matrices act on the
    remaining factors in their original order.
    """
    M = np.asarray(M)
    if space is None:
        if M.shape[0] % 2:
            raise DimMismatch("ubit factor needs an even total dimension")
        space = (2, M.shape[0] // 2)
    dims = _dims(space)
    if dims[ubit_axis] != 2:
        raise DimMismatch(f"factor {ubit_axis} has dimension {dims[ubit_axis]}, not 2")
    n = len(dims)
    _check_square(M, math.prod(dims))
    rest = math.prod(d for k, d in enumerate(dims) if k != ubit_axis)
    T = M.reshape(dims + dims)
    # move ubit row/col axes to the front
    others = [k for k in range(n) if k != ubit_axis]
    T = T.transpose([ubit_axis, ubit_axis + n] + others + [k + n for k in others])
    T = T.reshape(2, 2, rest, rest)
    return {name: 0.5 * np.einsum("ab,abij->ij", sig, T) for name, sig in UBIT_BASIS.items()}


def ubit_reconstruct(coeffs: Mapping[str, np.ndarray], space: TensorSpace | Sequence[int] = None, ubit_axis: int = 0) -> np.ndarray:
    first = next(iter(coeffs.values()))
    if space is None:
        space = (2, first.shape[0])
    return sum(kron_at(UBIT_BASIS[k], np.asarray(a), space, ubit_axis) for k, a in coeffs.items())


# --- Bessel J1 ---------------------------------------------------------------

_SERIES_CUTOFF = 12.0
_MILLER_CUTOFF = 50.0
_MAX_ARG = 1e6


def _series_jn(n: int, x: np.ndarray, terms: int = 60) -> np.ndarray:
    """Ascending power series of J_n; accurate for moderate |x|."""
    x = np.asarray(x, dtype=float)
    h = 0.5 * x
    term = h**n / math.factorial(n)
    total = term.copy()
    q = -h * h
    for k in range(1, terms):
        term = term * q / (k * (k + n))
        total = total + term
    return total


def _miller_j1(x: np.ndarray, start: int = 160) -> np.ndarray:
    """Backward recurrence normalised by J0 + 2 sum J_2k = 1."""
    jp1 = np.zeros_like(x)
    jk = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    j1 = np.zeros_like(x)
    for k in range(start, 0, -1):
        jm1 = (2.0 * k / x) * jk - jp1
        # jm1 is J_{k-1}
        if (k - 1) == 1:
            j1 = jm1.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * jm1
        jp1, jk = jk, jm1
        big = np.abs(jk) > 1e250
        if big.any():
            s = np.where(big, 1e-250, 1.0)
            jp1, jk, norm, j1 = jp1 * s, jk * s, norm * s, j1 * s
    norm += jk  # J0
    return j1 / norm


def _asymptotic_j1(x: np.ndarray, terms: int = 30) -> np.ndarray:
    mu = 4.0
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    a = 1.0
    for k in range(1, terms):
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        contrib = a / x**k
        if k % 2 == 0:
            P += (-1) ** (k // 2) * contrib
        else:
            Q += (-1) ** ((k - 1) // 2) * contrib
    chi = x - 0.75 * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j1(x):
    """Bessel function of the first kind, order 1.

    Power series for ``|x| <= 12``, Miller backward recurrence up to 50 and the
    Hankel asymptotic expansion beyond. Odd in ``x``.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("bessel_j1 requires finite input")
    if np.any(np.abs(arr) >= _MAX_ARG):
        raise DomainError(f"bessel_j1 supports |x| < {_MAX_ARG:g}")
    ax = np.abs(np.atleast_1d(arr))
    out = np.empty_like(ax)
    small = ax <= _SERIES_CUTOFF
    mid = (ax > _SERIES_CUTOFF) & (ax <= _MILLER_CUTOFF)
    large = ax > _MILLER_CUTOFF
    if small.any():
        out[small] = _series_jn(1, ax[small])
    if mid.any():
        out[mid] = _miller_j1(ax[mid])
    if large.any():
        out[large] = _asymptotic_j1(ax[large])
    out = np.sign(np.atleast_1d(arr)) * out
    if np.ndim(arr) == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def jinc(x):
    """``2 J1(x) / x`` with the removable singularity at 0 filled in (value 1)."""
    arr = np.asarray(x, dtype=float)
    ax = np.atleast_1d(np.abs(arr))
    out = np.ones_like(ax)
    tiny = ax < 1e-4
    out[tiny] = 1.0 - ax[tiny] ** 2 / 8.0
    big = ~tiny
    if big.any():
        out[big] = 2.0 * bessel_j1(ax[big]) / ax[big]
    if np.ndim(arr) == 0:
        return float(out[0])
    return out.reshape(arr.shape)
