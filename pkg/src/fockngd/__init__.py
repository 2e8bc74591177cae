"""Natural-gradient optimization of layered single-mode optical circuits in a
truncated Fock basis.

The package simulates the layered ansatz squeezer -> rotation -> displacement
-> Kerr on a truncated number basis, differentiates it with Wirtinger
calculus, builds the Hermitian Fubini-Study metric over mixed real/complex
parameters, and compares natural-gradient descent against plain gradient
descent and Adam on state-preparation tasks.
"""

from .circuit import (
    LayerParams,
    ParamVector,
    StateJacobian,
    forward,
    init_params,
    jacobian,
    pack,
    unpack,
)
from .errors import FockngdError
from .fock import FockOperator, FockVector, annihilation, creation, inner, number_state, vacuum
from .gates import GateWithDerivs, displacement, expm_with_frechet, kerr, rotation, squeezer
from .geometry import (
    BasisTransforms,
    HermitianMetric,
    basis_transforms,
    fs_metric_real,
    geometric_tensor,
    hermitian_metric,
    natural_direction,
    regularized_pinv,
)
from .harness import ConvergenceRecord, ExperimentConfig, emit, gradient_check, run, sweep
from .optim import OptimizerState, adam_step, ngd_step, sgd_step
from .targets import (
    HexGkpSpec,
    TargetState,
    energy_loss,
    fidelity_loss,
    fidelity_loss_grad,
    hex_gkp_target,
    load_target,
    number_target,
    save_target,
)

__version__ = "0.1.0"

__all__ = [
    "FockVector",
    "FockOperator",
    "annihilation",
    "creation",
    "number_state",
    "vacuum",
    "inner",
    "GateWithDerivs",
    "rotation",
    "kerr",
    "displacement",
    "squeezer",
    "expm_with_frechet",
    "LayerParams",
    "ParamVector",
    "StateJacobian",
    "pack",
    "unpack",
    "init_params",
    "forward",
    "jacobian",
    "geometric_tensor",
    "fs_metric_real",
    "BasisTransforms",
    "basis_transforms",
    "HermitianMetric",
    "hermitian_metric",
    "regularized_pinv",
    "natural_direction",
    "OptimizerState",
    "sgd_step",
    "adam_step",
    "ngd_step",
    "TargetState",
    "HexGkpSpec",
    "number_target",
    "hex_gkp_target",
    "fidelity_loss",
    "fidelity_loss_grad",
    "energy_loss",
    "load_target",
    "save_target",
    "ExperimentConfig",
    "ConvergenceRecord",
    "run",
    "sweep",
    "emit",
    "gradient_check",
    "FockngdError",
    "__version__",
]
