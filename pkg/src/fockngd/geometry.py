"""Metric machinery for natural-gradient steps on pure states.

The Geometric tensor of a parametrized normalized state is

    G_ij = <d_i psi, d_j psi> - <d_i psi, psi><psi, d_j psi>

and its symmetric part g = (G + G^T)/2 is the Fubini-Study metric, the
phase-insensitive Riemannian metric on physical state space. When the
parameter vector mixes real entries with complex/conjugate pairs, the same
geometry is expressed by the Hermitian tensor

    f_mn = (G'_mn + G'_{c(n) c(m)}) / 2

where G' is the Geometric tensor over the packed slots and c(.) maps a slot
to its conjugate partner (itself for real slots). f is Hermitian and positive
semidefinite by construction, reduces entrywise to g on all-real layouts, and
relates to the real/imaginary-split metric by the change of basis
f = (W^dag)^-1 g W^-1 with W the per-pair map (Re z, Im z) -> (z, z*).
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import (
    KIND_COMPLEX,
    KIND_CONJUGATE,
    KIND_REAL,
    Layout,
    StateJacobian,
    conj_permutation,
    layer_slices,
)
from .errors import DimensionError, MetricError, ParameterError

HERMITICITY_TOL = 1e-8
PINV_RELATIVE_CUTOFF = 1e-12


def geometric_tensor(psi: np.ndarray, d_psi: np.ndarray) -> np.ndarray:
    """Geometric tensor from a state and its derivative columns."""
    psi = np.asarray(psi, dtype=np.complex128)
    d_psi = np.asarray(d_psi, dtype=np.complex128)
    if d_psi.ndim != 2 or d_psi.shape[0] != psi.shape[0]:
        raise DimensionError(
            f"jacobian shape {d_psi.shape} incompatible with state of length {psi.shape[0]}"
        )
    jh = d_psi.conj().T
    overlap = jh @ psi  # entry i: <d_i psi, psi>
    return jh @ d_psi - np.outer(overlap, overlap.conj())


def fs_metric_real(G: np.ndarray) -> np.ndarray:
    """Fubini-Study metric g = (G + G^T)/2 for a real parametrization.

    The result is real up to roundoff; the real part is returned.
    """
    G = np.asarray(G, dtype=np.complex128)
    g = 0.5 * (G + G.T)
    if np.max(np.abs(g.imag), initial=0.0) > 1e-10:
        raise MetricError(
            "symmetric part of the Geometric tensor is not real; "
            "was the parametrization really all-real?"
        )
    return g.real


@dataclass(frozen=True)
class BasisTransforms:
    """Per-pair change of basis between (Re z, Im z) and (z, z*).

    W maps stacked real components to the (z, z*) pair; V maps real-component
    derivatives to Wirtinger derivatives. Both are block-diagonal with 2x2
    blocks on complex pairs and 1 on real slots, and satisfy V^-1 = W^T.
    """

    W: np.ndarray
    V: np.ndarray


def basis_transforms(layout: Layout) -> BasisTransforms:
    n = len(layout)
    W = np.zeros((n, n), dtype=np.complex128)
    V = np.zeros((n, n), dtype=np.complex128)
    for m, slot in enumerate(layout):
        if slot.kind == KIND_REAL:
            W[m, m] = 1.0
            V[m, m] = 1.0
        elif slot.kind == KIND_COMPLEX:
            p = slot.partner
            W[m, m], W[m, p] = 1.0, 1.0j
            W[p, m], W[p, p] = 1.0, -1.0j
            V[m, m], V[m, p] = 0.5, -0.5j
            V[p, m], V[p, p] = 0.5, 0.5j
    return BasisTransforms(W=W, V=V)


@dataclass
class HermitianMetric:
    """Hermitian metric tensor, stored as one block (full) or per-layer blocks.

    ``lam`` records the regularization constant that was added before a
    pseudo-inversion; it is 0.0 on a freshly assembled metric.
    """

    structure: str  # "full" | "block"
    blocks: list[np.ndarray]
    slices: list[slice]
    lam: float = 0.0

    @property
    def n(self) -> int:
        return self.slices[-1].stop if self.slices else 0

    def dense(self) -> np.ndarray:
        """Assemble the full matrix (zero between blocks)."""
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        for block, sl in zip(self.blocks, self.slices):
            out[sl, sl] = block
        return out

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Blockwise matrix-vector product."""
        vec = np.asarray(vec, dtype=np.complex128)
        if vec.shape != (self.n,):
            raise DimensionError(
                f"vector of shape {vec.shape} does not match metric size {self.n}"
            )
        out = np.empty_like(vec)
        for block, sl in zip(self.blocks, self.slices):
            out[sl] = block @ vec[sl]
        return out


def _metric_block(G: np.ndarray, cidx: np.ndarray) -> np.ndarray:
    """f = (G + permuted G^T)/2 for one block, cidx the local conjugate map."""
    return 0.5 * (G + G.T[np.ix_(cidx, cidx)])


def hermitian_metric(jac: StateJacobian, structure: str = "full") -> HermitianMetric:
    """Hermitian metric tensor from a packed-slot Jacobian.

    ``structure="block"`` keeps only entries between slots of the same layer.
    """
    if structure not in ("full", "block"):
        raise ParameterError(f"unknown metric structure {structure!r}")
    layout = jac.layout
    for m, slot in enumerate(layout):
        if slot.kind in (KIND_COMPLEX, KIND_CONJUGATE) and (
            slot.partner is None or not 0 <= slot.partner < len(layout)
        ):
            raise ParameterError(
                f"slot {m} ({slot.name}) is missing its conjugate partner"
            )
    psi = jac.psi.amplitudes
    cidx = conj_permutation(layout)

    if structure == "full":
        G = geometric_tensor(psi, jac.d_psi)
        return HermitianMetric(
            structure="full",
            blocks=[_metric_block(G, cidx)],
            slices=[slice(0, len(layout))],
        )

    blocks = []
    slices = layer_slices(layout)
    for sl in slices:
        local = cidx[sl] - sl.start
        if np.any(local < 0) or np.any(local >= sl.stop - sl.start):
            raise ParameterError(
                "conjugate partners cross layer boundaries; "
                "block-diagonal metric needs per-layer pairs"
            )
        G = geometric_tensor(psi, jac.d_psi[:, sl])
        blocks.append(_metric_block(G, local))
    return HermitianMetric(structure="block", blocks=blocks, slices=slices)


def _pinv_hermitian(block: np.ndarray, lam: float) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(block))) if block.size else 1.0)
    if np.max(np.abs(block - block.conj().T)) > HERMITICITY_TOL * scale:
        raise MetricError("metric block is not Hermitian within tolerance")
    shifted = block + lam * np.eye(block.shape[0])
    try:
        w, V = np.linalg.eigh(shifted)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise MetricError(f"eigendecomposition failed: {exc}") from exc
    threshold = PINV_RELATIVE_CUTOFF * np.max(w, initial=0.0)
    inv = np.zeros_like(w)
    keep = w > threshold
    inv[keep] = 1.0 / w[keep]
    return (V * inv[None, :]) @ V.conj().T


def regularized_pinv(metric: HermitianMetric, lam: float) -> HermitianMetric:
    """Moore-Penrose pseudo-inverse of (f + lam * identity), blockwise.

    Eigenvalues above a relative cutoff of the largest one are inverted, the
    rest are zeroed.
    """
    if lam < 0:
        raise ParameterError(f"regularization must be >= 0, got {lam}")
    return HermitianMetric(
        structure=metric.structure,
        blocks=[_pinv_hermitian(b, lam) for b in metric.blocks],
        slices=list(metric.slices),
        lam=lam,
    )


def natural_direction(f_pinv: HermitianMetric, grad: np.ndarray) -> np.ndarray:
    """Natural-gradient direction: the (pseudo-)inverted metric applied to
    the conjugate-Wirtinger gradient."""
    return f_pinv.apply(grad)


def real_split_metric_oracle(
    g_real: np.ndarray, layout: Layout
) -> np.ndarray:
    """Map a real/imaginary-split FS metric into the packed-slot basis.

    Computes (W^dag)^-1 g W^-1 = V* g V^T with the analytic transforms; used
    to cross-check the direct Hermitian-metric assembly.
    """
    V = basis_transforms(layout).V
    return V.conj() @ np.asarray(g_real, dtype=np.complex128) @ V.T
