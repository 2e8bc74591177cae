import numpy as np
import pytest

from fockngd import circuit, fock, harness, targets
from fockngd.errors import (
    CutoffError,
    DimensionError,
    OperatorError,
    ParameterError,
    TargetParseError,
    TargetValidationError,
)


# -- fidelity loss ---------------------------------------------------------------


def test_fidelity_loss_at_target_is_zero():
    t = targets.number_target(1, 8)
    assert targets.fidelity_loss(t.state, t) == pytest.approx(0.0, abs=1e-15)


def test_fidelity_loss_orthogonal_states():
    t = targets.number_target(1, 8)
    psi = fock.number_state(0, 8)
    assert targets.fidelity_loss(psi, t) == pytest.approx(1.0)


def test_fidelity_loss_global_phase_invariant():
    t = targets.number_target(2, 10)
    rng = np.random.default_rng(0)
    v = rng.normal(size=10) + 1j * rng.normal(size=10)
    v /= np.linalg.norm(v)
    base = targets.fidelity_loss(fock.FockVector(v, 10), t)
    for alpha in (0.1, 1.0, 3.0):
        rotated = fock.FockVector(np.exp(1j * alpha) * v, 10)
        assert targets.fidelity_loss(rotated, t) == pytest.approx(base, abs=1e-12)


def test_fidelity_loss_range():
    t = targets.number_target(1, 12)
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.normal(size=12) + 1j * rng.normal(size=12)
        v /= np.linalg.norm(v)
        loss = targets.fidelity_loss(fock.FockVector(v, 12), t)
        assert -1e-10 <= loss <= 1.0 + 1e-10


def test_fidelity_loss_cutoff_mismatch():
    t = targets.number_target(1, 8)
    with pytest.raises(DimensionError):
        targets.fidelity_loss(fock.number_state(0, 9), t)


# -- fidelity gradient -------------------------------------------------------------


def test_gradient_vanishes_at_global_minimum():
    """Drive a 1-layer circuit so psi = |difference from target| ~ 0, then
    check the analytic gradient at an exactly-reached target."""
    cutoff = 12
    params = circuit.pack([circuit.LayerParams(0, 0, 0, 0)])
    jac = circuit.jacobian(params, cutoff)
    t = targets.TargetState(jac.psi, label="self", provenance="builtin")
    grad = targets.fidelity_loss_grad(jac, t)
    assert np.max(np.abs(grad)) <= 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_fd(seed):
    cutoff = 20
    params = circuit.init_params(3, seed=seed, scale=0.3)
    jac = circuit.jacobian(params, cutoff)
    t = targets.number_target(1, cutoff)
    grad = targets.fidelity_loss_grad(jac, t)
    fd = harness.fd_loss_gradient(params, cutoff, t)
    # absolute floor: the final layer's phase parameters are exactly
    # stationary for a number-state target, where a ratio is ill-posed
    rel = np.abs(grad - fd) / np.maximum(np.abs(fd), harness.GRAD_ENTRY_FLOOR)
    assert rel.max() <= 1e-6


def test_gradient_real_on_real_slots():
    cutoff = 16
    params = circuit.init_params(2, seed=1, scale=0.3)
    jac = circuit.jacobian(params, cutoff)
    grad = targets.fidelity_loss_grad(jac, targets.number_target(1, cutoff))
    for m, slot in enumerate(params.layout):
        if slot.kind == circuit.KIND_REAL:
            assert abs(grad[m].imag) <= 1e-12


def test_gradient_global_phase_invariant():
    cutoff = 16
    params = circuit.init_params(2, seed=2, scale=0.2)
    jac = circuit.jacobian(params, cutoff)
    t = targets.number_target(1, cutoff)
    grad = targets.fidelity_loss_grad(jac, t)
    phase = np.exp(1j * 1.3)
    jac2 = circuit.StateJacobian(
        psi=fock.FockVector(phase * jac.psi.amplitudes, cutoff),
        d_psi=phase * jac.d_psi,
        layout=jac.layout,
    )
    grad2 = targets.fidelity_loss_grad(jac2, t)
    assert np.max(np.abs(grad - grad2)) <= 1e-10


# -- energy loss ---------------------------------------------------------------------


def test_energy_number_operator():
    d = 8
    a = fock.annihilation(d).matrix
    H = fock.FockOperator(a.conj().T @ a, d)
    assert targets.energy_loss(fock.number_state(2, d), H) == pytest.approx(2.0)


def test_energy_projector_equals_shifted_fidelity():
    d = 10
    t = targets.number_target(3, d)
    H = fock.FockOperator(-np.outer(t.state.amplitudes, t.state.amplitudes.conj()), d)
    rng = np.random.default_rng(1)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    psi = fock.FockVector(v, d)
    assert targets.energy_loss(psi, H) == pytest.approx(
        targets.fidelity_loss(psi, t) - 1.0, abs=1e-12
    )


def test_energy_identity_operator():
    d = 6
    H = fock.FockOperator(np.eye(d), d)
    rng = np.random.default_rng(2)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    assert targets.energy_loss(fock.FockVector(v, d), H) == pytest.approx(1.0)


def test_energy_rejects_non_hermitian():
    d = 4
    H = fock.FockOperator(np.triu(np.ones((d, d))), d)
    with pytest.raises(OperatorError):
        targets.energy_loss(fock.number_state(0, d), H)


# -- hex-GKP --------------------------------------------------------------------------


def test_hex_gkp_normalized():
    t = targets.hex_gkp_target(targets.HexGkpSpec(d=2, mu=1, delta=0.3, cutoff=50))
    assert abs(np.linalg.norm(t.state.amplitudes) - 1.0) <= 1e-10


def test_hex_gkp_stable_under_cutoff_increase():
    t50 = targets.hex_gkp_target(targets.HexGkpSpec(2, 1, 0.3, 50))
    t80 = targets.hex_gkp_target(targets.HexGkpSpec(2, 1, 0.3, 80))
    overlap = abs(np.vdot(t80.state.amplitudes[:50], t50.state.amplitudes))
    assert overlap >= 1.0 - 1e-6


def test_hex_gkp_mean_photon_decreases_with_delta():
    nbars = []
    for delta in (0.3, 0.6, 1.0):
        t = targets.hex_gkp_target(targets.HexGkpSpec(2, 1, delta, 50))
        nbars.append(float(np.sum(np.arange(50) * np.abs(t.state.amplitudes) ** 2)))
    assert nbars[0] > nbars[1] > nbars[2]


def test_hex_gkp_insufficient_cutoff():
    with pytest.raises(CutoffError):
        targets.hex_gkp_target(targets.HexGkpSpec(2, 1, 0.3, 10))


def test_hex_gkp_spec_validation():
    with pytest.raises(ParameterError):
        targets.HexGkpSpec(d=0, mu=0, delta=0.3, cutoff=50)
    with pytest.raises(ParameterError):
        targets.HexGkpSpec(d=2, mu=2, delta=0.3, cutoff=50)
    with pytest.raises(ParameterError):
        targets.HexGkpSpec(d=2, mu=1, delta=0.0, cutoff=50)


# -- target files -----------------------------------------------------------------------


def test_load_simple_target(tmp_path):
    path = tmp_path / "e0.txt"
    path.write_text("0 1.0 0.0\n1 0.0 0.0\n")
    t = targets.load_target(path)
    assert t.state.cutoff == 2
    np.testing.assert_array_equal(t.state.amplitudes, [1.0, 0.0])
    assert t.provenance.startswith("file:")


def test_load_target_missing_indices_are_zero(tmp_path):
    path = tmp_path / "sparse.txt"
    path.write_text("# sparse target\n3 1.0 0.0\n")
    t = targets.load_target(path)
    assert t.state.cutoff == 4
    np.testing.assert_array_equal(t.state.amplitudes, [0, 0, 0, 1.0])


def test_load_target_bad_norm(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 0.5 0.0\n1 0.5 0.0\n")
    with pytest.raises(TargetValidationError):
        targets.load_target(path)


def test_load_target_malformed_line_number(tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("0 1.0 0.0\nnot a line\n")
    with pytest.raises(TargetParseError) as info:
        targets.load_target(path)
    assert info.value.lineno == 2


def test_load_target_duplicate_index(tmp_path):
    path = tmp_path / "dup.txt"
    path.write_text("0 1.0 0.0\n0 0.0 0.0\n1 0.0 0.0\n")
    with pytest.raises(TargetParseError):
        targets.load_target(path)


def test_hex_gkp_roundtrip_through_file(tmp_path):
    t = targets.hex_gkp_target(targets.HexGkpSpec(2, 1, 0.3, 50))
    path = tmp_path / "hex.txt"
    targets.save_target(t, path)
    reloaded = targets.load_target(path)
    overlap = abs(np.vdot(reloaded.state.amplitudes, t.state.amplitudes))
    assert overlap >= 1.0 - 1e-12
