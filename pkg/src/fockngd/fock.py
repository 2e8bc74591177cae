"""Truncated Fock-space primitives: number states, ladder operators, inner
products.

Every value carries its cutoff so that mixing objects built at different
truncations fails loudly instead of silently broadcasting. Amplitude index n
is the photon number n.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CutoffError, DimensionError

NORM_TOL = 1e-10


def _require_cutoff(cutoff: int) -> int:
    if not isinstance(cutoff, (int, np.integer)) or cutoff < 2:
        raise CutoffError(f"cutoff must be an integer >= 2, got {cutoff!r}")
    return int(cutoff)


@dataclass(frozen=True)
class FockVector:
    """Complex amplitude vector over number states |0>..|D-1|."""

    amplitudes: np.ndarray
    cutoff: int

    def __post_init__(self):
        _require_cutoff(self.cutoff)
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.cutoff,):
            raise DimensionError(
                f"amplitude vector has shape {amps.shape}, expected ({self.cutoff},)"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(np.sum(np.abs(self.amplitudes) ** 2) - 1.0) <= tol


@dataclass(frozen=True)
class FockOperator:
    """Square complex matrix acting on the truncated number basis."""

    matrix: np.ndarray
    cutoff: int

    def __post_init__(self):
        _require_cutoff(self.cutoff)
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.shape != (self.cutoff, self.cutoff):
            raise DimensionError(
                f"operator has shape {mat.shape}, expected ({self.cutoff}, {self.cutoff})"
            )
        object.__setattr__(self, "matrix", mat)

    def dagger(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T, self.cutoff)

    def apply(self, vec: FockVector) -> FockVector:
        if vec.cutoff != self.cutoff:
            raise DimensionError(
                f"operator cutoff {self.cutoff} != vector cutoff {vec.cutoff}"
            )
        return FockVector(self.matrix @ vec.amplitudes, self.cutoff)


def annihilation_matrix(cutoff: int) -> np.ndarray:
    """Raw ndarray of the annihilation operator, A[n-1, n] = sqrt(n)."""
    d = _require_cutoff(cutoff)
    a = np.zeros((d, d), dtype=np.complex128)
    ns = np.arange(1, d)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def annihilation(cutoff: int) -> FockOperator:
    """Annihilation operator a on the truncated basis: a|n> = sqrt(n)|n-1>."""
    return FockOperator(annihilation_matrix(cutoff), int(cutoff))


def creation(cutoff: int) -> FockOperator:
    """Creation operator, the conjugate transpose of annihilation."""
    return annihilation(cutoff).dagger()


def number_state(n: int, cutoff: int) -> FockVector:
    """Unit vector |n> at the given cutoff."""
    d = _require_cutoff(cutoff)
    if not 0 <= n < d:
        raise CutoffError(f"number state index {n} outside [0, {d})")
    amps = np.zeros(d, dtype=np.complex128)
    amps[n] = 1.0
    return FockVector(amps, d)


def vacuum(cutoff: int) -> FockVector:
    return number_state(0, cutoff)


def inner(u: FockVector, v: FockVector) -> complex:
    """Inner product <u, v>, conjugate-linear in the first slot."""
    if u.cutoff != v.cutoff:
        raise DimensionError(f"cutoff mismatch: {u.cutoff} != {v.cutoff}")
    return complex(np.vdot(u.amplitudes, v.amplitudes))
