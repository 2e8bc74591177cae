"""Single-mode gates on the truncated Fock basis, with Wirtinger derivatives.

The four gates are the displacement D(gamma), phase rotation R(phi), squeezer
S(zeta) and Kerr interaction K(kappa). Rotation and Kerr are diagonal in the
number basis. Displacement and squeezing are built by exponentiating the
TRUNCATED generator, which is exactly anti-Hermitian, so the resulting gate is
unitary on the truncated space to machine precision (this differs from
truncating the infinite-dimensional gate; the difference decays with cutoff).

Derivatives with respect to a complex parameter z come in two Wirtinger slots,
one for z and one for z*, obtained as Frechet derivatives of the matrix
exponential in the corresponding generator directions.

Exponentials of anti-Hermitian generators are evaluated in an eigenbasis of
the (Hermitian) generator times i. Both fixed generators

    a^dag - a           (displacement, amplitude direction)
    (a^2 - a^dag^2)/2   (squeezing, amplitude direction)

are diagonalized once per cutoff and cached; an arbitrary complex parameter
only rotates that eigenbasis by a number-basis phase, so no eigensolve happens
inside optimization loops.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import DimensionError, ParameterError
from .fock import FockOperator, annihilation_matrix, _require_cutoff

__all__ = [
    "GateWithDerivs",
    "rotation",
    "kerr",
    "displacement",
    "squeezer",
    "expm_with_frechet",
    "SLOT_GAMMA",
    "SLOT_GAMMA_CONJ",
    "SLOT_ZETA",
    "SLOT_ZETA_CONJ",
    "SLOT_PHI",
    "SLOT_KAPPA",
]

# Parameter-slot labels; a trailing '*' marks the conjugate slot.
SLOT_GAMMA = "gamma"
SLOT_GAMMA_CONJ = "gamma*"
SLOT_ZETA = "zeta"
SLOT_ZETA_CONJ = "zeta*"
SLOT_PHI = "phi"
SLOT_KAPPA = "kappa"


@dataclass(frozen=True)
class GateWithDerivs:
    """A gate matrix bundled with its entrywise parameter derivatives.

    ``derivs`` maps slot labels to the derivative of the gate matrix with
    respect to that slot: one slot for a real parameter, two (parameter and
    conjugate) for a complex one.
    """

    gate: FockOperator
    derivs: dict[str, FockOperator]
    cutoff: int


def _require_finite(value, name: str):
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ParameterError(f"{name} must be finite, got {value!r}")


def _sinch(x: np.ndarray) -> np.ndarray:
    """sinh(x)/x, series-evaluated near zero to avoid cancellation."""
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    direct = np.sinh(safe) / safe
    x2 = x * x
    series = 1.0 + x2 / 6.0 * (1.0 + x2 / 20.0)
    return np.where(small, series, direct)


def _exp_divided_difference(mu: np.ndarray) -> np.ndarray:
    """First divided-difference table of exp over the points mu.

    Entry (k, l) is (exp(mu_k) - exp(mu_l)) / (mu_k - mu_l), with the
    diagonal limit exp(mu_k). Evaluated as exp((mu_k+mu_l)/2) * sinch(d/2)
    with d = mu_k - mu_l, which is stable for coincident points.
    """
    mu = np.asarray(mu, dtype=np.complex128)
    avg = 0.5 * (mu[:, None] + mu[None, :])
    half_diff = 0.5 * (mu[:, None] - mu[None, :])
    return np.exp(avg) * _sinch(half_diff)


def _eig_expm_frechet(mu, Q, directions):
    """exp(A) and Frechet derivatives for A = Q diag(mu) Q^dag, Q unitary."""
    Qh = Q.conj().T
    expA = (Q * np.exp(mu)[None, :]) @ Qh
    phi = _exp_divided_difference(mu)
    out = []
    for E in directions:
        Et = Qh @ (E @ Q)
        out.append(Q @ (Et * phi) @ Qh)
    return expA, out


def _expm_frechet_arrays(A: np.ndarray, directions) -> tuple[np.ndarray, list]:
    """Dispatch on structure: eigenbasis route for (anti-)Hermitian A,
    Pade scaling-and-squaring otherwise."""
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    tol = 1e-12 * scale
    if np.max(np.abs(A + A.conj().T)) <= tol:
        # anti-Hermitian: iA is Hermitian
        w, V = np.linalg.eigh(1j * A)
        return _eig_expm_frechet(-1j * w, V, directions)
    if np.max(np.abs(A - A.conj().T)) <= tol:
        w, V = np.linalg.eigh(A)
        return _eig_expm_frechet(w.astype(np.complex128), V, directions)
    expA = scipy.linalg.expm(A)
    frechets = [
        scipy.linalg.expm_frechet(A, E, compute_expm=False) for E in directions
    ]
    return expA, frechets


def expm_with_frechet(
    A: FockOperator, directions: list[FockOperator]
) -> tuple[FockOperator, list[FockOperator]]:
    """Matrix exponential of A and its Frechet derivatives.

    Returns exp(A) together with the directional derivative of the
    exponential at A in each of the given directions.
    """
    for E in directions:
        if E.cutoff != A.cutoff:
            raise DimensionError(
                f"direction cutoff {E.cutoff} != operator cutoff {A.cutoff}"
            )
    expA, frechets = _expm_frechet_arrays(
        A.matrix, [E.matrix for E in directions]
    )
    return (
        FockOperator(expA, A.cutoff),
        [FockOperator(L, A.cutoff) for L in frechets],
    )


# -- diagonal gates ----------------------------------------------------------


def _number_range(cutoff: int) -> np.ndarray:
    return np.arange(cutoff, dtype=np.float64)


def rotation_diagonal(phi: float, cutoff: int) -> np.ndarray:
    """Diagonal of R(phi) = exp(i phi n), entries exp(i n phi)."""
    _require_cutoff(cutoff)
    _require_finite(phi, "phi")
    return np.exp(1j * phi * _number_range(cutoff))


def kerr_diagonal(kappa: float, cutoff: int) -> np.ndarray:
    """Diagonal of K(kappa) = exp(i kappa n^2), entries exp(i kappa n^2)."""
    _require_cutoff(cutoff)
    _require_finite(kappa, "kappa")
    return np.exp(1j * kappa * _number_range(cutoff) ** 2)


def rotation(phi: float, cutoff: int) -> GateWithDerivs:
    """Phase rotation gate exp(i phi a^dag a) with its phi-derivative."""
    diag = rotation_diagonal(phi, cutoff)
    ns = _number_range(cutoff)
    return GateWithDerivs(
        gate=FockOperator(np.diag(diag), cutoff),
        derivs={SLOT_PHI: FockOperator(np.diag(1j * ns * diag), cutoff)},
        cutoff=cutoff,
    )


def kerr(kappa: float, cutoff: int) -> GateWithDerivs:
    """Kerr gate exp(i kappa (a^dag a)^2) with its kappa-derivative."""
    diag = kerr_diagonal(kappa, cutoff)
    ns = _number_range(cutoff)
    return GateWithDerivs(
        gate=FockOperator(np.diag(diag), cutoff),
        derivs={SLOT_KAPPA: FockOperator(np.diag(1j * ns**2 * diag), cutoff)},
        cutoff=cutoff,
    )


# -- exponential gates -------------------------------------------------------


@dataclass(frozen=True)
class _ExpGateBasis:
    """Cached per-cutoff eigendata of a fixed anti-Hermitian generator T.

    T = V diag(-i w) V^dag, so the gate exp(r T) is diagonal in V for any
    real amplitude r; a complex parameter only conjugates V by number-basis
    phases. ``raise_dir``/``lower_dir`` hold V^dag E V for the two raising and
    lowering generator directions of the gate's parameter, which pick up only
    a scalar phase under that conjugation.
    """

    w: np.ndarray
    V: np.ndarray
    halfdiff: np.ndarray  # (w_k - w_l)/2 table, the sinc argument
    raise_dir: np.ndarray
    lower_dir: np.ndarray


def _frozen_basis(generator, raise_op, lower_op) -> _ExpGateBasis:
    w, V = np.linalg.eigh(1j * generator)
    Vh = V.conj().T
    basis = _ExpGateBasis(
        w=w,
        V=V,
        halfdiff=0.5 * (w[:, None] - w[None, :]),
        raise_dir=Vh @ raise_op @ V,
        lower_dir=Vh @ lower_op @ V,
    )
    for arr in (basis.w, basis.V, basis.halfdiff, basis.raise_dir, basis.lower_dir):
        arr.setflags(write=False)
    return basis


@lru_cache(maxsize=32)
def _displacement_eigensystem(cutoff: int) -> _ExpGateBasis:
    """Basis of i(a^dag - a); directions a^dag and a."""
    a = annihilation_matrix(cutoff)
    adag = a.conj().T
    return _frozen_basis(adag - a, adag, a)


@lru_cache(maxsize=32)
def _squeezer_eigensystem(cutoff: int) -> _ExpGateBasis:
    """Basis of i(a^2 - a^dag^2)/2; directions a^dag^2 and a^2."""
    a = annihilation_matrix(cutoff)
    adag = a.conj().T
    return _frozen_basis(0.5 * (a @ a - adag @ adag), adag @ adag, a @ a)


def _phase_divided_difference(r: float, w: np.ndarray, halfdiff: np.ndarray) -> np.ndarray:
    """Divided-difference table of exp at the points mu = -i r w.

    With purely imaginary points the table factors as an outer product of
    half-angle phases times a real sinc, cheaper than the general complex
    form in _exp_divided_difference.
    """
    p = np.exp(-0.5j * r * w)
    return np.outer(p, p) * np.sinc(r * halfdiff / np.pi)


@dataclass(frozen=True)
class FactoredExpGate:
    """An exponential gate kept in its eigenframe: gate = Q diag(exp_mu) Q^dag.

    ``deriv_cores`` maps slot labels to the frame-space core of the Frechet
    derivative: the derivative matrix is Q core Q^dag, so applying it to a
    vector costs three small products instead of materializing anything. Used
    by the circuit Jacobian; ``materialize`` produces the plain-matrix form.
    """

    Q: np.ndarray
    Qh: np.ndarray
    exp_mu: np.ndarray
    deriv_cores: dict[str, np.ndarray]
    cutoff: int

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.Q @ (self.exp_mu * (self.Qh @ v))

    def matrix(self) -> np.ndarray:
        return (self.Q * self.exp_mu[None, :]) @ self.Qh

    def materialize(self) -> GateWithDerivs:
        return GateWithDerivs(
            gate=FockOperator(self.matrix(), self.cutoff),
            derivs={
                label: FockOperator(self.Q @ core @ self.Qh, self.cutoff)
                for label, core in self.deriv_cores.items()
            },
            cutoff=self.cutoff,
        )


def _factored_exp_gate(
    r: float,
    theta: float,
    frame_angle: float,
    basis: _ExpGateBasis,
    raise_slot: str,
    raise_coeff: complex,
    lower_slot: str,
    lower_coeff: complex,
    cutoff: int,
) -> FactoredExpGate:
    """Gate exp(r * R T R^dag) with R = diag(exp(i n frame_angle)).

    Conjugating the cached raising/lowering directions by R only multiplies
    them by exp(-/+ i theta), so the derivative cores are cached tables times
    a scalar and the divided-difference factor.
    """
    phases = np.exp(1j * frame_angle * _number_range(cutoff))
    Q = phases[:, None] * basis.V
    phi = _phase_divided_difference(r, basis.w, basis.halfdiff)
    cores = {
        raise_slot: (raise_coeff * np.exp(-1j * theta)) * basis.raise_dir * phi,
        lower_slot: (lower_coeff * np.exp(1j * theta)) * basis.lower_dir * phi,
    }
    return FactoredExpGate(
        Q=Q,
        Qh=Q.conj().T,
        exp_mu=np.exp(-1j * r * basis.w),
        deriv_cores=cores,
        cutoff=cutoff,
    )


def displacement_factored(gamma: complex, cutoff: int) -> FactoredExpGate:
    """Displacement gate in factored eigenframe form."""
    _require_cutoff(cutoff)
    _require_finite(gamma, "gamma")
    r, theta = abs(gamma), float(np.angle(gamma))
    return _factored_exp_gate(
        r,
        theta,
        theta,
        _displacement_eigensystem(cutoff),
        SLOT_GAMMA,
        1.0,
        SLOT_GAMMA_CONJ,
        -1.0,
        cutoff,
    )


def squeezer_factored(zeta: complex, cutoff: int) -> FactoredExpGate:
    """Squeezing gate in factored eigenframe form."""
    _require_cutoff(cutoff)
    _require_finite(zeta, "zeta")
    r, theta = abs(zeta), float(np.angle(zeta))
    return _factored_exp_gate(
        r,
        theta,
        theta / 2.0,
        _squeezer_eigensystem(cutoff),
        SLOT_ZETA,
        -0.5,
        SLOT_ZETA_CONJ,
        0.5,
        cutoff,
    )


def displacement_matrix(gamma: complex, cutoff: int) -> np.ndarray:
    """exp(gamma a^dag - gamma* a) as a raw ndarray (no derivatives)."""
    return displacement_factored(gamma, cutoff).matrix()


def squeezer_matrix(zeta: complex, cutoff: int) -> np.ndarray:
    """exp((zeta*/2) a^2 - (zeta/2) a^dag^2) as a raw ndarray."""
    return squeezer_factored(zeta, cutoff).matrix()


def displacement(gamma: complex, cutoff: int) -> GateWithDerivs:
    """Displacement gate exp(gamma a^dag - gamma* a) with Wirtinger derivatives.

    The 'gamma' slot is the Frechet derivative of the exponential in the
    direction a^dag, the 'gamma*' slot in the direction -a. Keeping the state
    support well inside the cutoff for the given |gamma| is the caller's
    responsibility.
    """
    return displacement_factored(gamma, cutoff).materialize()


def squeezer(zeta: complex, cutoff: int) -> GateWithDerivs:
    """Squeezing gate exp((zeta*/2) a^2 - (zeta/2) a^dag^2) with derivatives.

    The 'zeta' slot is the Frechet derivative in the direction -a^dag^2/2,
    the 'zeta*' slot in the direction a^2/2.
    """
    return squeezer_factored(zeta, cutoff).materialize()
