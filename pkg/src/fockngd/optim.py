"""Gradient-descent, Adam and natural-gradient parameter updates.

All three optimizers consume the conjugate-Wirtinger gradient dL/dxi* in
packed-slot order and return a fresh parameter vector; conjugate pairs are
re-synchronized by conjugation after every step and real slots are kept
exactly real. "SGD" is deterministic full-batch gradient descent (there is no
data batching in a state-preparation loss).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circuit import ParamVector, StateJacobian, synchronize
from .errors import DivergenceError, ParameterError
from .geometry import hermitian_metric, natural_direction, regularized_pinv

OPTIMIZERS = ("sgd", "adam", "ngd")


@dataclass
class OptimizerState:
    """Mutable per-run optimizer state; owned by a single optimization run."""

    kind: str
    learning_rate: float
    t: int = 0
    # Adam moments, lazily sized to the parameter vector
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    ngd_lambda: float = 0.1
    ngd_structure: str = "block"

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ParameterError(f"unknown optimizer {self.kind!r}")
        if not self.learning_rate > 0:
            raise ParameterError("learning rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("adam betas must lie in [0, 1)")
        if not self.eps_adam > 0:
            raise ParameterError("adam epsilon must be > 0")
        if self.ngd_lambda < 0:
            raise ParameterError("ngd regularization must be >= 0")
        if self.ngd_structure not in ("full", "block"):
            raise ParameterError(f"unknown metric structure {self.ngd_structure!r}")


def _check_finite_grad(state: OptimizerState, grad: np.ndarray):
    if not np.all(np.isfinite(grad)):
        raise DivergenceError(state.t, "non-finite gradient")


def _updated(params: ParamVector, delta: np.ndarray) -> ParamVector:
    return ParamVector(synchronize(params.values - delta, params.layout), params.layout)


def sgd_step(state: OptimizerState, params: ParamVector, grad: np.ndarray) -> ParamVector:
    """Vanilla step: xi <- xi - eta * dL/dxi*."""
    grad = np.asarray(grad, dtype=np.complex128)
    _check_finite_grad(state, grad)
    new = _updated(params, state.learning_rate * grad)
    state.t += 1
    return new


def adam_step(state: OptimizerState, params: ParamVector, grad: np.ndarray) -> ParamVector:
    """Bias-corrected Adam applied slotwise; the second moment accumulates
    the squared modulus |g|^2 per slot."""
    grad = np.asarray(grad, dtype=np.complex128)
    _check_finite_grad(state, grad)
    if state.m is None:
        state.m = np.zeros_like(grad)
        state.v = np.zeros(grad.shape, dtype=np.float64)
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * np.abs(grad) ** 2
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return _updated(params, state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps_adam))


def ngd_step(
    state: OptimizerState,
    params: ParamVector,
    jac: StateJacobian,
    grad: np.ndarray,
) -> ParamVector:
    """Natural-gradient step: xi <- xi - eta * (f + lambda)^+ dL/dxi*.

    The Hermitian metric is assembled from the Jacobian at the current point
    (full or per-layer block-diagonal), regularized and pseudo-inverted.
    """
    grad = np.asarray(grad, dtype=np.complex128)
    _check_finite_grad(state, grad)
    f = hermitian_metric(jac, structure=state.ngd_structure)
    f_pinv = regularized_pinv(f, state.ngd_lambda)
    direction = natural_direction(f_pinv, grad)
    new = _updated(params, state.learning_rate * direction)
    state.t += 1
    return new


def step(
    state: OptimizerState,
    params: ParamVector,
    grad: np.ndarray,
    jac: Optional[StateJacobian] = None,
) -> ParamVector:
    """Dispatch one update; only NGD consumes the Jacobian (for its metric)."""
    if state.kind == "sgd":
        return sgd_step(state, params, grad)
    if state.kind == "adam":
        return adam_step(state, params, grad)
    if jac is None:
        raise ParameterError("ngd step needs the state Jacobian")
    return ngd_step(state, params, jac, grad)
