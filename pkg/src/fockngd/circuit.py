"""Layered single-mode circuit ansatz and its Wirtinger Jacobian.

One layer applies a squeezer, a rotation and a displacement (the general
Gaussian block) followed by a Kerr interaction; N layers act on the vacuum.
Parameters are packed into a single complex vector: per layer, in order,

    [gamma, gamma*, zeta, zeta*, phi, kappa]

so every complex parameter travels with its conjugate (conjugate slots are
kept bitwise consistent) and real parameters occupy a single slot. Slots of
the same layer are contiguous, which lets the block-diagonal metric slice the
Jacobian without copying.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import gates
from .errors import ParameterError
from .fock import FockVector, vacuum, _require_cutoff

SLOTS_PER_LAYER = 6

KIND_COMPLEX = "complex"
KIND_CONJUGATE = "conjugate"
KIND_REAL = "real"

# (name, kind) in packing order; partners are adjacent pairs.
_LAYER_SLOTS = (
    (gates.SLOT_GAMMA, KIND_COMPLEX),
    (gates.SLOT_GAMMA_CONJ, KIND_CONJUGATE),
    (gates.SLOT_ZETA, KIND_COMPLEX),
    (gates.SLOT_ZETA_CONJ, KIND_CONJUGATE),
    (gates.SLOT_PHI, KIND_REAL),
    (gates.SLOT_KAPPA, KIND_REAL),
)


@dataclass(frozen=True)
class LayerParams:
    """Parameters of one layer: displacement, rotation, squeezing, Kerr."""

    gamma: complex
    phi: float
    zeta: complex
    kappa: float

    def __post_init__(self):
        for name in ("gamma", "phi", "zeta", "kappa"):
            z = complex(getattr(self, name))
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ParameterError(f"layer parameter {name} must be finite")


@dataclass(frozen=True)
class SlotInfo:
    """Layout metadata for one packed parameter slot."""

    layer: int
    name: str
    kind: str  # "complex" | "conjugate" | "real"
    partner: Optional[int]  # index of the conjugate partner, None for real


Layout = tuple[SlotInfo, ...]


def layer_layout(n_layers: int) -> Layout:
    """Standard layout: SLOTS_PER_LAYER contiguous slots per layer."""
    if n_layers < 1:
        raise ParameterError("need at least one layer")
    slots = []
    for layer in range(n_layers):
        base = layer * SLOTS_PER_LAYER
        for offset, (name, kind) in enumerate(_LAYER_SLOTS):
            if kind == KIND_COMPLEX:
                partner = base + offset + 1
            elif kind == KIND_CONJUGATE:
                partner = base + offset - 1
            else:
                partner = None
            slots.append(SlotInfo(layer, name, kind, partner))
    return tuple(slots)


def real_layout(n_slots: int, layer: int = 0) -> Layout:
    """All-real layout of n_slots unnamed parameters (for toy models)."""
    return tuple(
        SlotInfo(layer, f"theta{i}", KIND_REAL, None) for i in range(n_slots)
    )


def conj_permutation(layout: Layout) -> np.ndarray:
    """Index map m -> conjugate slot of m (m itself for real slots)."""
    idx = np.empty(len(layout), dtype=np.intp)
    for m, slot in enumerate(layout):
        if slot.kind == KIND_REAL:
            idx[m] = m
        else:
            if slot.partner is None or not 0 <= slot.partner < len(layout):
                raise ParameterError(
                    f"slot {m} ({slot.name}) has no conjugate partner in layout"
                )
            idx[m] = slot.partner
    return idx


def layer_slices(layout: Layout) -> list[slice]:
    """Contiguous per-layer index ranges, in layer order."""
    slices = []
    start = 0
    for m in range(1, len(layout) + 1):
        if m == len(layout) or layout[m].layer != layout[start].layer:
            slices.append(slice(start, m))
            start = m
    return slices


@dataclass
class ParamVector:
    """Packed parameter vector with its layout descriptor."""

    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (len(self.layout),):
            raise ParameterError(
                f"value vector has shape {vals.shape}, layout has {len(self.layout)} slots"
            )
        self.values = vals

    @property
    def n_layers(self) -> int:
        return max(slot.layer for slot in self.layout) + 1

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)


def synchronize(values: np.ndarray, layout: Layout) -> np.ndarray:
    """Restore layout invariants: conjugate slots are bitwise conjugates of
    their partners and real slots carry zero imaginary part."""
    out = np.array(values, dtype=np.complex128)
    for m, slot in enumerate(layout):
        if slot.kind == KIND_COMPLEX:
            out[slot.partner] = np.conj(out[m])
        elif slot.kind == KIND_REAL:
            out[m] = out[m].real
    return out


def pack(layers: list[LayerParams]) -> ParamVector:
    """Pack per-layer parameters into the canonical slot order."""
    if not layers:
        raise ParameterError("need at least one layer")
    values = np.empty(len(layers) * SLOTS_PER_LAYER, dtype=np.complex128)
    for i, lp in enumerate(layers):
        base = i * SLOTS_PER_LAYER
        values[base + 0] = lp.gamma
        values[base + 1] = np.conj(lp.gamma)
        values[base + 2] = lp.zeta
        values[base + 3] = np.conj(lp.zeta)
        values[base + 4] = lp.phi
        values[base + 5] = lp.kappa
    return ParamVector(values, layer_layout(len(layers)))


def unpack(params: ParamVector) -> list[LayerParams]:
    """Inverse of pack."""
    layers = []
    for base in range(0, len(params.values), SLOTS_PER_LAYER):
        v = params.values
        layers.append(
            LayerParams(
                gamma=complex(v[base + 0]),
                zeta=complex(v[base + 2]),
                phi=float(v[base + 4].real),
                kappa=float(v[base + 5].real),
            )
        )
    return layers


def init_params(
    n_layers: int, seed: Optional[int] = None, scale: float = 0.01
) -> ParamVector:
    """Random near-identity initialization.

    Each real and imaginary component is drawn i.i.d. normal with standard
    deviation ``scale`` from a generator seeded with ``seed``; small values
    start the circuit near the identity, avoiding immediate cutoff leakage.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for _ in range(n_layers):
        x = rng.normal(0.0, scale, size=6)
        layers.append(
            LayerParams(
                gamma=complex(x[0], x[1]),
                zeta=complex(x[2], x[3]),
                phi=float(x[4]),
                kappa=float(x[5]),
            )
        )
    return pack(layers)


@dataclass
class StateJacobian:
    """Output state and its Wirtinger derivatives in packed-slot order.

    Column m of ``d_psi`` is the derivative of the state with respect to slot
    m; for a conjugate slot z* that means the Wirtinger derivative with
    respect to z* treated as an independent variable.
    """

    psi: FockVector
    d_psi: np.ndarray  # (cutoff, n_slots)
    layout: Layout


def _layer_gates(lp: LayerParams, cutoff: int):
    """Factored gates and diagonals for one layer, application order
    S -> R -> D -> K."""
    return {
        "S": gates.squeezer_factored(lp.zeta, cutoff),
        "R_diag": gates.rotation_diagonal(lp.phi, cutoff),
        "D": gates.displacement_factored(lp.gamma, cutoff),
        "K_diag": gates.kerr_diagonal(lp.kappa, cutoff),
    }


def forward(params: ParamVector, cutoff: int) -> FockVector:
    """Output state of the circuit applied to the vacuum."""
    _require_cutoff(cutoff)
    v = vacuum(cutoff).amplitudes
    for lp in unpack(params):
        g = _layer_gates(lp, cutoff)
        v = g["S"].apply(v)
        v = g["R_diag"] * v
        v = g["D"].apply(v)
        v = g["K_diag"] * v
    return FockVector(v, cutoff)


def _exp_gate_columns(M, fg, pre, d_psi, col_z, col_zc, slot_z, slot_zc):
    """Columns for both Wirtinger slots of a factored exponential gate and
    the suffix product M @ gate, via the shared frame product M @ Q."""
    MQ = M @ fg.Q
    w = fg.Qh @ pre
    d_psi[:, col_z] = MQ @ (fg.deriv_cores[slot_z] @ w)
    d_psi[:, col_zc] = MQ @ (fg.deriv_cores[slot_zc] @ w)
    return (MQ * fg.exp_mu[None, :]) @ fg.Qh


def jacobian(params: ParamVector, cutoff: int) -> StateJacobian:
    """Output state and all Wirtinger derivative columns.

    Uses one forward sweep storing the intermediate states and one backward
    sweep accumulating the suffix operator, so the cost is O(N) gate
    applications and O(N) operator products rather than one forward pass per
    parameter. Exponential gates stay in factored eigenframe form; their
    derivative columns are (suffix) Q (core) Q^dag (prefix state).
    """
    _require_cutoff(cutoff)
    layers = unpack(params)
    n_layers = len(layers)
    n_slots = len(params.layout)

    layer_ops = [_layer_gates(lp, cutoff) for lp in layers]
    ns = np.arange(cutoff)

    # forward sweep: states entering each gate
    pre_S, pre_R, pre_D, pre_K = [], [], [], []
    v = vacuum(cutoff).amplitudes
    for g in layer_ops:
        pre_S.append(v)
        v = g["S"].apply(v)
        pre_R.append(v)
        v = g["R_diag"] * v
        pre_D.append(v)
        v = g["D"].apply(v)
        pre_K.append(v)
        v = g["K_diag"] * v
    psi = v

    # backward sweep: M is the operator product of everything after the
    # current gate; rotation/Kerr factors are diagonal so those products
    # cost O(D^2)
    d_psi = np.empty((cutoff, n_slots), dtype=np.complex128)
    M = np.eye(cutoff, dtype=np.complex128)
    for i in range(n_layers - 1, -1, -1):
        g = layer_ops[i]
        base = i * SLOTS_PER_LAYER
        k_diag = g["K_diag"]
        d_psi[:, base + 5] = M @ ((1j * ns**2 * k_diag) * pre_K[i])
        M = M * k_diag[None, :]
        M = _exp_gate_columns(
            M, g["D"], pre_D[i], d_psi, base + 0, base + 1,
            gates.SLOT_GAMMA, gates.SLOT_GAMMA_CONJ,
        )
        r_diag = g["R_diag"]
        d_psi[:, base + 4] = M @ ((1j * ns * r_diag) * pre_R[i])
        M = M * r_diag[None, :]
        M = _exp_gate_columns(
            M, g["S"], pre_S[i], d_psi, base + 2, base + 3,
            gates.SLOT_ZETA, gates.SLOT_ZETA_CONJ,
        )

    return StateJacobian(FockVector(psi, cutoff), d_psi, params.layout)
