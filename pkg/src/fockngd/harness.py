"""Experiment runner: configured optimization runs, learning-rate sweeps,
convergence traces, and machine-readable outputs.

Runs are deterministic: a config plus a seed fixes the initial parameters and
every optimizer step, so identical configs reproduce loss traces bitwise.
Seeds (and sweep grid cells) are embarrassingly parallel; set the environment
variable FOCKNGD_WORKERS to run them in a process pool, results are merged in
a fixed order regardless of completion.
"""

import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import circuit, geometry, optim, targets
from .errors import DimensionError, DivergenceError, ParameterError
from .targets import TargetState

logger = logging.getLogger(__name__)

CONVERGENCE_THRESHOLD = 0.01
LEAKAGE_TOP_FRACTION = 0.1
LEAKAGE_NORM_TOL = 1e-6
DEFAULT_RATE_GRID = (0.0001, 0.0005, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.5)
WORKERS_ENV_VAR = "FOCKNGD_WORKERS"

TASKS = ("single_photon", "hex_gkp", "custom")

# hex-GKP task parameters: logical dimension, logical index, envelope
HEX_GKP_D = 2
HEX_GKP_MU = 1
HEX_GKP_DELTA = 0.3


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one optimization experiment (possibly many seeds)."""

    task: str = "single_photon"
    layers: int = 8
    cutoff: int = 100
    optimizer: str = "ngd"
    learning_rate: float = 0.02
    ngd_lambda: float = 0.1
    ngd_structure: str = "block"
    steps: int = 500
    seeds: tuple[int, ...] = (0,)
    init_scale: float = 0.01
    target_path: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ParameterError(f"unknown task {self.task!r}")
        if self.task == "custom" and not self.target_path:
            raise ParameterError("custom task needs a target_path")
        if self.layers < 1:
            raise ParameterError("layers must be >= 1")
        if self.cutoff < 2:
            raise ParameterError("cutoff must be >= 2")
        if self.optimizer not in optim.OPTIMIZERS:
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be > 0")
        if self.ngd_lambda < 0:
            raise ParameterError("ngd_lambda must be >= 0")
        if self.ngd_structure not in ("full", "block"):
            raise ParameterError(f"unknown ngd_structure {self.ngd_structure!r}")
        if self.steps < 0:
            raise ParameterError("steps must be >= 0")
        if not self.seeds:
            raise ParameterError("need at least one seed")
        if not self.init_scale > 0:
            raise ParameterError("init_scale must be > 0")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def build_target(config: ExperimentConfig) -> TargetState:
    """Target state for a config's task, at the config's cutoff."""
    if config.task == "single_photon":
        return targets.number_target(1, config.cutoff)
    if config.task == "hex_gkp":
        spec = targets.HexGkpSpec(HEX_GKP_D, HEX_GKP_MU, HEX_GKP_DELTA, config.cutoff)
        return targets.hex_gkp_target(spec)
    target = targets.load_target(config.target_path)
    if target.state.cutoff != config.cutoff:
        raise DimensionError(
            f"target file cutoff {target.state.cutoff} != config cutoff {config.cutoff}"
        )
    return target


@dataclass
class StepRow:
    step: int
    loss: float
    elapsed_ms: float


@dataclass
class ConvergenceRecord:
    """Per-seed loss trace with terminal status and config provenance."""

    seed: int
    rows: list[StepRow]
    status: str  # "converged" | "step-budget" | "diverged"
    diverged_at: Optional[int]
    leakage_warning: bool
    config: dict

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.rows], dtype=np.float64)

    def final_loss(self) -> float:
        return self.rows[-1].loss

    def steps_to_threshold(self, threshold: float = CONVERGENCE_THRESHOLD) -> Optional[int]:
        """First step whose loss is <= threshold, None if never reached."""
        for row in self.rows:
            if row.loss <= threshold:
                return row.step
        return None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "status": self.status,
            "diverged_at": self.diverged_at,
            "leakage_warning": self.leakage_warning,
            "config": self.config,
            "rows": [
                {"step": r.step, "loss": r.loss, "elapsed_ms": r.elapsed_ms}
                for r in self.rows
            ],
        }


def tail_norm_fraction(psi, top_fraction: float = LEAKAGE_TOP_FRACTION) -> float:
    """Norm fraction carried by the highest ``top_fraction`` of Fock levels."""
    amps = psi.amplitudes
    count = max(1, int(len(amps) * top_fraction))
    return float(np.sum(np.abs(amps[-count:]) ** 2))


def _run_single_seed(config: ExperimentConfig, seed: int) -> ConvergenceRecord:
    target = build_target(config)
    params = circuit.init_params(config.layers, seed=seed, scale=config.init_scale)
    state = optim.OptimizerState(
        kind=config.optimizer,
        learning_rate=config.learning_rate,
        ngd_lambda=config.ngd_lambda,
        ngd_structure=config.ngd_structure,
    )

    rows: list[StepRow] = []
    status = "step-budget"
    diverged_at: Optional[int] = None

    if config.steps == 0:
        t0 = time.perf_counter()
        psi = circuit.forward(params, config.cutoff)
        loss = targets.fidelity_loss(psi, target)
        rows.append(StepRow(0, loss, (time.perf_counter() - t0) * 1e3))
        final_psi = psi
    else:
        final_psi = None
        for t in range(config.steps):
            t0 = time.perf_counter()
            jac = circuit.jacobian(params, config.cutoff)
            loss = targets.fidelity_loss(jac.psi, target)
            if not math.isfinite(loss):
                status = "diverged"
                diverged_at = t
                break
            grad = targets.fidelity_loss_grad(jac, target)
            try:
                params = optim.step(state, params, grad, jac=jac)
            except DivergenceError as exc:
                rows.append(StepRow(t, loss, (time.perf_counter() - t0) * 1e3))
                status = "diverged"
                diverged_at = exc.step
                break
            rows.append(StepRow(t, loss, (time.perf_counter() - t0) * 1e3))
            final_psi = jac.psi

    if status != "diverged":
        status = (
            "converged"
            if any(r.loss <= CONVERGENCE_THRESHOLD for r in rows)
            else "step-budget"
        )

    leakage = False
    if final_psi is None and status != "diverged":
        final_psi = circuit.forward(params, config.cutoff)
    if final_psi is not None:
        leakage = tail_norm_fraction(final_psi) > LEAKAGE_NORM_TOL
        if leakage:
            logger.warning(
                "seed %d: top %.0f%% of Fock levels carry more than %g of the "
                "norm; the cutoff %d may be truncating the state",
                seed,
                100 * LEAKAGE_TOP_FRACTION,
                LEAKAGE_NORM_TOL,
                config.cutoff,
            )

    return ConvergenceRecord(
        seed=seed,
        rows=rows,
        status=status,
        diverged_at=diverged_at,
        leakage_warning=leakage,
        config=config.as_dict(),
    )


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV_VAR, "1")))
    except ValueError:
        return 1


def run(config: ExperimentConfig) -> list[ConvergenceRecord]:
    """Execute one run per seed; per-seed divergence is recorded, not fatal.

    Loss is recorded at the start of every step (so step 0 carries the
    initial loss, shared by all optimizers for the same seed); ``steps=0``
    evaluates the initial loss only.
    """
    workers = _worker_count()
    if workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_single_seed, config, s) for s in config.seeds]
            return [f.result() for f in futures]
    return [_run_single_seed(config, s) for s in config.seeds]


# -- learning-rate sweep -------------------------------------------------------


@dataclass
class SweepCell:
    """Aggregate over seeds for one (optimizer, rate) grid point."""

    optimizer: str
    rate: float
    median_final_loss: float
    median_steps_to_threshold: float  # inf when at least half the seeds never reach it
    divergences: int
    n_seeds: int


@dataclass
class SweepSummary:
    cells: list[SweepCell]
    optimal: dict[str, float]  # optimizer -> selected rate
    threshold: float = CONVERGENCE_THRESHOLD

    def table(self) -> str:
        lines = [
            f"{'optimizer':>9}  {'rate':>8}  {'median final':>13}  "
            f"{'median steps<=%.3g' % self.threshold:>18}  {'diverged':>8}"
        ]
        for c in self.cells:
            steps = "-" if math.isinf(c.median_steps_to_threshold) else f"{c.median_steps_to_threshold:.1f}"
            mark = " *" if self.optimal.get(c.optimizer) == c.rate else ""
            lines.append(
                f"{c.optimizer:>9}  {c.rate:>8g}  {c.median_final_loss:>13.3e}  "
                f"{steps:>18}  {c.divergences:>8d}{mark}"
            )
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "optimal": dict(self.optimal),
            "cells": [dataclasses.asdict(c) for c in self.cells],
        }


def _summarize_cell(optimizer: str, rate: float, records: list[ConvergenceRecord]) -> SweepCell:
    finals = [r.final_loss() for r in records if r.rows]
    steps = [
        float(s) if (s := r.steps_to_threshold()) is not None else math.inf
        for r in records
    ]
    return SweepCell(
        optimizer=optimizer,
        rate=rate,
        median_final_loss=float(np.median(finals)) if finals else math.inf,
        median_steps_to_threshold=float(np.median(steps)) if steps else math.inf,
        divergences=sum(1 for r in records if r.status == "diverged"),
        n_seeds=len(records),
    )


def sweep(
    config: ExperimentConfig,
    rates: Sequence[float] = DEFAULT_RATE_GRID,
    optimizers: Sequence[str] = optim.OPTIMIZERS,
) -> SweepSummary:
    """Cross product (optimizer x rate x seed); flags per optimizer the rate
    that minimizes median steps-to-threshold among zero-divergence cells
    (ties broken by median final loss, then by the smaller rate).

    All grid jobs share one worker pool; results are grouped by
    (optimizer, rate, seed) key, so the summary does not depend on
    completion order.
    """
    if not rates or not optimizers:
        raise ParameterError("sweep needs non-empty rate and optimizer grids")
    grid = [
        (opt, float(rate), dataclasses.replace(config, optimizer=opt, learning_rate=float(rate)))
        for opt in optimizers
        for rate in rates
    ]
    jobs = [(opt, rate, cfg, seed) for opt, rate, cfg in grid for seed in config.seeds]

    workers = _worker_count()
    results: dict[tuple, ConvergenceRecord] = {}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                (opt, rate, seed): pool.submit(_run_single_seed, cfg, seed)
                for opt, rate, cfg, seed in jobs
            }
            results = {key: fut.result() for key, fut in futures.items()}
    else:
        results = {
            (opt, rate, seed): _run_single_seed(cfg, seed)
            for opt, rate, cfg, seed in jobs
        }

    cells = [
        _summarize_cell(opt, rate, [results[(opt, rate, s)] for s in config.seeds])
        for opt, rate, _ in grid
    ]

    optimal: dict[str, float] = {}
    for opt in optimizers:
        candidates = [c for c in cells if c.optimizer == opt and c.divergences == 0]
        if not candidates:
            continue
        best = min(
            candidates,
            key=lambda c: (c.median_steps_to_threshold, c.median_final_loss, c.rate),
        )
        optimal[opt] = best.rate
    return SweepSummary(cells=cells, optimal=optimal)


# -- output --------------------------------------------------------------------

CSV_HEADER = "seed,step,loss,elapsed_ms"


def emit(records: list[ConvergenceRecord], format: str, path) -> None:
    """Write records as CSV (columns seed,step,loss,elapsed_ms) or JSON
    (one object per record, config embedded). Loss values round-trip
    bit-exactly in both formats."""
    if format == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for rec in records:
                for row in rec.rows:
                    fh.write(f"{rec.seed},{row.step},{row.loss!r},{row.elapsed_ms:.3f}\n")
    elif format == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([rec.to_dict() for rec in records], fh, indent=2)
            fh.write("\n")
    else:
        raise ParameterError(f"unknown output format {format!r}")


def loss_roughness(losses: np.ndarray, skip: int = 50) -> float:
    """Standard deviation of successive loss differences after ``skip`` steps;
    small values mean a smooth descent."""
    tail = np.asarray(losses, dtype=np.float64)[skip:]
    if tail.size < 2:
        return 0.0
    return float(np.std(np.diff(tail)))


# -- gradient verification -----------------------------------------------------


def _perturbed_forward(layers, i, field, delta, cutoff):
    shifted = list(layers)
    shifted[i] = dataclasses.replace(layers[i], **{field: getattr(layers[i], field) + delta})
    return circuit.forward(circuit.pack(shifted), cutoff).amplitudes


def _richardson(fd_at_step, h: float):
    """One Richardson step on a central difference: kills the h^2 term.

    The Kerr diagonal's third parameter derivative grows like n^6, which puts
    the plain central-difference truncation above 1e-6 at cutoff 20; the
    extrapolated oracle stays independent of the analytic path.
    """
    return (4.0 * fd_at_step(h / 2) - fd_at_step(h)) / 3.0


def fd_state_jacobian(
    params: circuit.ParamVector,
    cutoff: int,
    step: float = 1e-5,
    richardson: bool = True,
) -> np.ndarray:
    """Central finite-difference Wirtinger Jacobian (independent oracle).

    Real and imaginary parts of every layer parameter are perturbed
    separately and mapped through d/dz = (d/dRe - i d/dIm)/2 and
    d/dz* = (d/dRe + i d/dIm)/2. ``richardson`` combines two central
    differences (base step and half step) to remove the leading truncation
    term.
    """
    if richardson:
        return _richardson(
            lambda h: fd_state_jacobian(params, cutoff, h, richardson=False), step
        )
    layers = circuit.unpack(params)
    cols = np.zeros((cutoff, len(params.values)), dtype=np.complex128)
    h = step
    for i in range(len(layers)):
        base = i * circuit.SLOTS_PER_LAYER
        for field, (slot_z, slot_zc) in (("gamma", (0, 1)), ("zeta", (2, 3))):
            d_re = (
                _perturbed_forward(layers, i, field, h, cutoff)
                - _perturbed_forward(layers, i, field, -h, cutoff)
            ) / (2 * h)
            d_im = (
                _perturbed_forward(layers, i, field, 1j * h, cutoff)
                - _perturbed_forward(layers, i, field, -1j * h, cutoff)
            ) / (2 * h)
            cols[:, base + slot_z] = 0.5 * (d_re - 1j * d_im)
            cols[:, base + slot_zc] = 0.5 * (d_re + 1j * d_im)
        for field, slot in (("phi", 4), ("kappa", 5)):
            cols[:, base + slot] = (
                _perturbed_forward(layers, i, field, h, cutoff)
                - _perturbed_forward(layers, i, field, -h, cutoff)
            ) / (2 * h)
    return cols


def fd_real_split_jacobian(
    params: circuit.ParamVector,
    cutoff: int,
    step: float = 1e-5,
    richardson: bool = True,
) -> np.ndarray:
    """Central finite-difference Jacobian of the real/imaginary-split
    parametrization: columns are d psi/d(Re z), d psi/d(Im z) at the complex
    slot positions and plain derivatives at real slots."""
    if richardson:
        return _richardson(
            lambda h: fd_real_split_jacobian(params, cutoff, h, richardson=False), step
        )
    layers = circuit.unpack(params)
    cols = np.zeros((cutoff, len(params.values)), dtype=np.complex128)
    h = step
    for i in range(len(layers)):
        base = i * circuit.SLOTS_PER_LAYER
        for field, (slot_re, slot_im) in (("gamma", (0, 1)), ("zeta", (2, 3))):
            cols[:, base + slot_re] = (
                _perturbed_forward(layers, i, field, h, cutoff)
                - _perturbed_forward(layers, i, field, -h, cutoff)
            ) / (2 * h)
            cols[:, base + slot_im] = (
                _perturbed_forward(layers, i, field, 1j * h, cutoff)
                - _perturbed_forward(layers, i, field, -1j * h, cutoff)
            ) / (2 * h)
        for field, slot in (("phi", 4), ("kappa", 5)):
            cols[:, base + slot] = (
                _perturbed_forward(layers, i, field, h, cutoff)
                - _perturbed_forward(layers, i, field, -h, cutoff)
            ) / (2 * h)
    return cols


def fd_loss_gradient(
    params: circuit.ParamVector,
    cutoff: int,
    target: TargetState,
    step: float = 1e-5,
    richardson: bool = True,
) -> np.ndarray:
    """Central finite-difference dL/dxi* of the fidelity loss."""
    if richardson:
        return _richardson(
            lambda h: fd_loss_gradient(params, cutoff, target, h, richardson=False),
            step,
        )
    layers = circuit.unpack(params)
    grad = np.zeros(len(params.values), dtype=np.complex128)
    h = step

    def loss_at(i, field, delta):
        shifted = list(layers)
        shifted[i] = dataclasses.replace(
            layers[i], **{field: getattr(layers[i], field) + delta}
        )
        psi = circuit.forward(circuit.pack(shifted), cutoff)
        return targets.fidelity_loss(psi, target)

    for i in range(len(layers)):
        base = i * circuit.SLOTS_PER_LAYER
        for field, (slot_z, slot_zc) in (("gamma", (0, 1)), ("zeta", (2, 3))):
            d_re = (loss_at(i, field, h) - loss_at(i, field, -h)) / (2 * h)
            d_im = (loss_at(i, field, 1j * h) - loss_at(i, field, -1j * h)) / (2 * h)
            # dL/dz* at the z slot, dL/d(z*)* = dL/dz at the conjugate slot
            grad[base + slot_z] = 0.5 * (d_re + 1j * d_im)
            grad[base + slot_zc] = 0.5 * (d_re - 1j * d_im)
        for field, slot in (("phi", 4), ("kappa", 5)):
            grad[base + slot] = (loss_at(i, field, h) - loss_at(i, field, -h)) / (2 * h)
    return grad


# entries smaller than this fraction of the oracle's own noise scale are
# compared absolutely (relative error is ill-posed at exactly-stationary slots)
GRAD_ENTRY_FLOOR = 1e-4
JAC_COLUMN_FLOOR = 1e-6


def gradient_check(
    layers: int, cutoff: int, seed: int, step: float = 1e-5, param_scale: float = 0.3
) -> dict[str, float]:
    """Max relative errors of the analytic Jacobian and loss gradient against
    the finite-difference oracles, per slot kind and overall.

    Jacobian errors are per-column (2-norm ratio); gradient errors are per
    entry with a small absolute floor in the denominator.
    """
    params = circuit.init_params(layers, seed=seed, scale=param_scale)
    jac = circuit.jacobian(params, cutoff)
    fd_jac = fd_state_jacobian(params, cutoff, step=step)

    col_norm = np.linalg.norm(fd_jac, axis=0)
    col_err = np.linalg.norm(jac.d_psi - fd_jac, axis=0) / np.maximum(
        col_norm, JAC_COLUMN_FLOOR
    )

    target = targets.number_target(1, cutoff)
    grad = targets.fidelity_loss_grad(jac, target)
    fd_grad = fd_loss_gradient(params, cutoff, target, step=step)
    grad_err = np.abs(grad - fd_grad) / np.maximum(np.abs(fd_grad), GRAD_ENTRY_FLOOR)

    out: dict[str, float] = {}
    for name in ("gamma", "gamma*", "zeta", "zeta*", "phi", "kappa"):
        idx = [m for m, s in enumerate(params.layout) if s.name == name]
        out[f"jacobian[{name}]"] = float(col_err[idx].max())
        out[f"grad[{name}]"] = float(grad_err[idx].max())
    out["jacobian_max"] = float(col_err.max())
    out["grad_max"] = float(grad_err.max())
    return out


# -- config files ---------------------------------------------------------------

_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse the flat ``key = value`` config format into typed values."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{source}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_FIELDS:
            raise ParameterError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = coerce_config_value(key, val)
    return values


def coerce_config_value(key: str, val: str):
    if key in ("layers", "cutoff", "steps"):
        return int(val)
    if key in ("learning_rate", "ngd_lambda", "init_scale"):
        return float(val)
    if key == "seeds":
        return tuple(int(s) for s in val.replace(",", " ").split())
    return val


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Config from a file (optional) with override values applied on top."""
    values: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read(), source=str(path)))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def format_config(config: ExperimentConfig) -> str:
    """Render a config in the flat key-value format (round-trips through
    parse_config_text)."""
    lines = []
    for key, value in config.as_dict().items():
        if value is None:
            continue
        if key == "seeds":
            value = ",".join(str(s) for s in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
