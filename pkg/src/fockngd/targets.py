"""Loss functions, their Wirtinger gradients, and target-state constructors.

Targets are normalized Fock-amplitude vectors. Built-in constructors cover
number states and finite-energy hexagonal-lattice GKP states; arbitrary
amplitudes can be loaded from a plain-text file (one line per basis index:
``<n> <Re> <Im>``, missing indices zero, ``#`` starts a comment), which is the
escape hatch for running against externally generated reference amplitudes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .circuit import StateJacobian, conj_permutation
from .errors import (
    CutoffError,
    DimensionError,
    OperatorError,
    ParameterError,
    TargetParseError,
    TargetValidationError,
)
from .fock import FockOperator, FockVector, number_state, _require_cutoff

TARGET_NORM_TOL = 1e-10
FILE_NORM_TOL = 1e-6
GKP_CAPTURE_TOL = 1e-4


@dataclass(frozen=True)
class TargetState:
    """Normalized target with a label and a provenance note."""

    state: FockVector
    label: str
    provenance: str  # "builtin" or "file:<path>"

    def __post_init__(self):
        if not self.state.is_normalized(TARGET_NORM_TOL):
            raise TargetValidationError(
                f"target {self.label!r} is not normalized (norm={self.state.norm})"
            )


def number_target(n: int, cutoff: int) -> TargetState:
    """Number state |n> as a target."""
    return TargetState(number_state(n, cutoff), label=f"number_{n}", provenance="builtin")


# -- losses -------------------------------------------------------------------


def fidelity_loss(psi: FockVector, target: TargetState) -> float:
    """1 - |<target, psi>|^2, the infidelity to the target state."""
    t = target.state
    if psi.cutoff != t.cutoff:
        raise DimensionError(
            f"state cutoff {psi.cutoff} != target cutoff {t.cutoff}"
        )
    overlap = np.vdot(t.amplitudes, psi.amplitudes)
    return float(1.0 - (overlap * overlap.conjugate()).real)


def fidelity_loss_grad(jac: StateJacobian, target: TargetState) -> np.ndarray:
    """Conjugate-Wirtinger gradient dL/dxi* of the fidelity loss.

    With o = <t, psi> and u_m = <t, d_m psi>, entry m is
    -u_{c(m)} o* - o conj(u_m), where c(.) swaps a slot with its conjugate
    partner (identity on real slots). Entries on real slots come out exactly
    real.
    """
    t = target.state
    if jac.psi.cutoff != t.cutoff:
        raise DimensionError(
            f"state cutoff {jac.psi.cutoff} != target cutoff {t.cutoff}"
        )
    o = np.vdot(t.amplitudes, jac.psi.amplitudes)
    u = t.amplitudes.conj() @ jac.d_psi
    cidx = conj_permutation(jac.layout)
    return -u[cidx] * np.conj(o) - o * np.conj(u)


def energy_loss(psi: FockVector, hamiltonian: FockOperator) -> float:
    """Expectation value <psi, H psi> of a Hermitian operator."""
    H = hamiltonian.matrix
    if psi.cutoff != hamiltonian.cutoff:
        raise DimensionError(
            f"state cutoff {psi.cutoff} != operator cutoff {hamiltonian.cutoff}"
        )
    if np.max(np.abs(H - H.conj().T)) > 1e-10:
        raise OperatorError("energy expects a Hermitian operator")
    return float(np.vdot(psi.amplitudes, H @ psi.amplitudes).real)


# -- hexagonal GKP ------------------------------------------------------------


@dataclass(frozen=True)
class HexGkpSpec:
    """Finite-energy hexagonal-lattice GKP state parameters.

    ``d`` is the logical dimension, ``mu`` the logical index, ``delta`` the
    width of the Gaussian envelope that damps the ideal (infinite-energy)
    state, and ``cutoff`` the Fock truncation of the returned amplitudes.
    """

    d: int
    mu: int
    delta: float
    cutoff: int

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"logical dimension must be >= 1, got {self.d}")
        if not 0 <= self.mu < self.d:
            raise ParameterError(f"logical index {self.mu} outside [0, {self.d})")
        if not self.delta > 0:
            raise ParameterError(f"envelope parameter must be > 0, got {self.delta}")
        _require_cutoff(self.cutoff)


def _coherent_amplitudes(alpha: np.ndarray, cutoff: int) -> np.ndarray:
    """Rows of coherent-state amplitudes exp(-|a|^2/2) a^n / sqrt(n!).

    Built by cumulative products so large |alpha| cannot overflow a^n.
    """
    alpha = np.atleast_1d(alpha).astype(np.complex128)
    ratios = np.ones((alpha.size, cutoff), dtype=np.complex128)
    ns = np.arange(1, cutoff, dtype=np.float64)
    ratios[:, 1:] = alpha[:, None] / np.sqrt(ns)[None, :]
    out = np.cumprod(ratios, axis=1)
    out *= np.exp(-0.5 * np.abs(alpha) ** 2)[:, None]
    return out


def hex_gkp_amplitudes(spec: HexGkpSpec, nmax: int = 7) -> np.ndarray:
    """Unnormalized Fock amplitudes of the finite-energy hex-GKP state.

    The ideal state is a phased superposition of coherent states on the
    hexagonal lattice

        alpha0(n1, n2) = sqrt(pi / (2 sqrt(3) d))
                         * (sqrt(3) (d n1 + mu) - i (d n1 + mu - 2 n2))

    over integers n1, n2 in [-nmax, nmax]. The finite-energy state applies
    the Gaussian envelope operator exp(-2 delta^2 n_hat), which acts on each
    coherent component exactly: it shrinks alpha0 by exp(-2 delta^2) and
    multiplies its weight by exp(-|alpha0|^2 (1 - exp(-4 delta^2)) / 2).

    Envelope conventions in the GKP literature differ by factors of two in
    the exponent; this one keeps the (d=2, mu=1, delta=0.3) state comfortably
    inside a cutoff of 50. Externally generated amplitudes in another
    convention can always be fed in through the target-file format instead.
    """
    d, mu, delta = spec.d, spec.mu, spec.delta
    n1 = np.arange(-nmax, nmax + 1)[:, None]
    n2 = np.arange(-nmax, nmax + 1)[None, :]
    sqrt3 = math.sqrt(3.0)

    alpha0 = np.sqrt(math.pi / (2.0 * sqrt3 * d)) * (
        sqrt3 * (d * n1 + mu) - 1j * (d * n1 + mu - 2 * n2)
    )
    phase = -1j * math.pi * n2 * (d * n1 + mu) / d
    damping = -0.5 * (1.0 - math.exp(-4.0 * delta**2)) * np.abs(alpha0) ** 2
    weight = np.exp(phase + damping).ravel()
    alpha = alpha0.ravel() * math.exp(-2.0 * delta**2)

    table = _coherent_amplitudes(alpha, spec.cutoff)
    return weight @ table


def hex_gkp_target(spec: HexGkpSpec, nmax: int = 7) -> TargetState:
    """Normalized hex-GKP target, rejecting cutoffs that truncate the state.

    The truncation check builds the amplitudes on an extended cutoff and
    requires the requested window to capture at least 1 - 1e-4 of the norm.
    """
    extended = max(spec.cutoff + 20, int(1.3 * spec.cutoff))
    ext_spec = HexGkpSpec(spec.d, spec.mu, spec.delta, extended)
    amps = hex_gkp_amplitudes(ext_spec, nmax=nmax)
    total = float(np.sum(np.abs(amps) ** 2))
    captured = float(np.sum(np.abs(amps[: spec.cutoff]) ** 2))
    if captured < (1.0 - GKP_CAPTURE_TOL) * total:
        raise CutoffError(
            f"cutoff {spec.cutoff} holds only {captured / total:.6f} of the "
            f"hex-GKP norm; increase the cutoff"
        )
    window = amps[: spec.cutoff]
    window = window / np.linalg.norm(window)
    label = f"hexgkp_d{spec.d}_mu{spec.mu}_delta{spec.delta:g}"
    return TargetState(FockVector(window, spec.cutoff), label=label, provenance="builtin")


# -- file ingestion ------------------------------------------------------------


def save_target(target: TargetState, path) -> None:
    """Write amplitudes in the ``<n> <Re> <Im>`` text format (full precision)."""
    amps = target.state.amplitudes
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# target: {target.label}\n")
        fh.write(f"# cutoff: {target.state.cutoff}\n")
        for n, a in enumerate(amps):
            fh.write(f"{n} {float(a.real)!r} {float(a.imag)!r}\n")


def load_target(path) -> TargetState:
    """Parse and validate a target-state file.

    The cutoff is the highest index present plus one. The vector must be
    within 1e-6 of unit norm and is renormalized on load.
    """
    entries: dict[int, complex] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise TargetParseError(
                    path, lineno, f"expected '<n> <Re> <Im>', got {raw.strip()!r}"
                )
            try:
                n = int(parts[0])
                re, im = float(parts[1]), float(parts[2])
            except ValueError as exc:
                raise TargetParseError(path, lineno, str(exc)) from exc
            if n < 0:
                raise TargetParseError(path, lineno, f"negative basis index {n}")
            if n in entries:
                raise TargetParseError(path, lineno, f"duplicate basis index {n}")
            entries[n] = complex(re, im)

    if not entries:
        raise TargetValidationError(f"{path}: no amplitudes found")
    cutoff = max(entries) + 1
    if cutoff < 2:
        raise TargetValidationError(f"{path}: needs entries up to index >= 1")
    amps = np.zeros(cutoff, dtype=np.complex128)
    for n, a in entries.items():
        amps[n] = a
    if not np.all(np.isfinite(amps)):
        raise TargetValidationError(f"{path}: non-finite amplitude")
    norm = float(np.linalg.norm(amps))
    if abs(norm - 1.0) > FILE_NORM_TOL:
        raise TargetValidationError(
            f"{path}: norm {norm} deviates from 1 by more than {FILE_NORM_TOL}"
        )
    amps /= norm
    return TargetState(
        FockVector(amps, cutoff), label="file", provenance=f"file:{path}"
    )
