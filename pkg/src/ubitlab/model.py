"""The ubit-environment-system model: random coupling, full generator, initial states.

Factor order of the global space is ``E (x) U (x) A`` with dims ``(N, 2, d_A)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, InvalidState
from .linalg import I2, J2, require_antisymmetric
from .transcription import validate_real_state

# Stream-splitting rule: SeedSequence(seed).spawn(2) -> [coupling R, random pure environment].
STREAM_COUPLING = 0
STREAM_ENVIRONMENT = 1


def seed_streams(seed: int) -> list[np.random.Generator]:
    """Independent PCG64 generators derived from one 64-bit seed."""
    children = np.random.SeedSequence(int(seed)).spawn(2)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the model.

    Parameters
    ----------
    N : int
        Environment dimension.
    s : float
        Ubit-environment coupling scale (inverse time).
    omega : float
        Ubit rotation rate (inverse time).
    seed : int
        Seed for all randomness of one run.
    d_A : int
        Dimension of the local system.
    """

    N: int
    s: float
    omega: float
    seed: int = 0
    d_A: int = 2

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not self.s >= 0:
            raise ValueError(f"s must be >= 0, got {self.s}")
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if int(self.d_A) < 1:
            raise ValueError(f"d_A must be >= 1, got {self.d_A}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def lam(self) -> float:
        return self.s / self.omega

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.N, 2, self.d_A)


@dataclass(frozen=True)
class EnvironmentCoupling:
    B: np.ndarray = field(repr=False)
    N: int
    seed: int


def generate_coupling(N: int, seed: int) -> EnvironmentCoupling:
    """Random antisymmetric ``2N x 2N`` coupling ``sqrt(6/N) (R - R^T)/2``, ``R ~ U(-1, 1)``.

    The ``sqrt(6/N)`` factor keeps the typical eigenvalue size independent of ``N``.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = seed_streams(seed)[STREAM_COUPLING]
    R = rng.uniform(-1.0, 1.0, size=(2 * N, 2 * N))
    B = math.sqrt(6.0 / N) * (R - R.T) / 2.0
    return EnvironmentCoupling(B=B, N=N, seed=int(seed))


def eu_stueckelbergian(params: ModelParams, coupling: EnvironmentCoupling) -> np.ndarray:
    """``S_EU = -omega I_E (x) J_U + s B_EU``."""
    if coupling.B.shape != (2 * params.N, 2 * params.N):
        raise DimMismatch(f"coupling has shape {coupling.B.shape}, expected 2N = {2 * params.N}")
    return -params.omega * np.kron(np.eye(params.N), J2) + params.s * coupling.B


def assemble_full_stueckelbergian(params: ModelParams, coupling: EnvironmentCoupling,
                                  S_UA: np.ndarray | None = None) -> np.ndarray:
    """``S^ = -omega I_E J_U I_A + s B_EU I_A + I_E S_UA`` on ``E (x) U (x) A``."""
    dA = params.d_A
    S_EU = eu_stueckelbergian(params, coupling)
    S = np.kron(S_EU, np.eye(dA))
    if S_UA is not None:
        S_UA = require_antisymmetric(S_UA)
        if S_UA.shape != (2 * dA, 2 * dA):
            raise DimMismatch(f"S_UA has shape {S_UA.shape}, expected {2 * dA}")
        S = S + np.kron(np.eye(params.N), S_UA)
    return S


def bloch_to_complex(b) -> np.ndarray:
    """Qubit density matrix ``(I + b . sigma)/2``."""
    b = np.asarray(b, dtype=float)
    if b.shape != (3,) or np.linalg.norm(b) > 1 + 1e-12:
        raise InvalidState(f"Bloch vector {b} must have length <= 1")
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1.0 + 0j, -1.0])
    return 0.5 * (np.eye(2) + b[0] * X + b[1] * Y + b[2] * Z)


def random_pure_environment(N: int, seed: int) -> np.ndarray:
    """Real pure environment state ``|e><e|`` with a Gaussian random ``|e>``."""
    rng = seed_streams(seed)[STREAM_ENVIRONMENT]
    v = rng.standard_normal(N)
    v /= np.linalg.norm(v)
    return np.outer(v, v)


def environment_state(N: int, env: str = "maximally_mixed", seed: int = 0) -> np.ndarray:
    if env == "maximally_mixed":
        return np.eye(N) / N
    if env == "random_pure":
        return random_pure_environment(N, seed)
    raise ValueError(f"unknown environment initialisation {env!r}")


def initial_state(N: int, rho_UA: np.ndarray, env: str = "maximally_mixed",
                  seed: int = 0) -> np.ndarray:
    """Product state ``rho_E (x) rho_UA`` on ``E (x) U (x) A``."""
    rho_UA = validate_real_state(rho_UA)
    return np.kron(environment_state(N, env, seed), rho_UA)


def ubit_identity(d_A: int) -> np.ndarray:
    return np.kron(I2, np.eye(d_A))
