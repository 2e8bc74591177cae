import math

import numpy as np
import pytest

from fockngd import circuit, geometry, harness
from fockngd.errors import MetricError, ParameterError
from fockngd.fock import FockVector


def random_jacobian(n_layers, seed, cutoff=20, scale=0.3):
    params = circuit.init_params(n_layers, seed=seed, scale=scale)
    return params, circuit.jacobian(params, cutoff)


# -- geometric tensor and real FS metric ------------------------------------------


def test_circle_family_metric_is_one():
    for theta in (0.0, 0.3, 2.0):
        psi = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
        dpsi = np.array([[-math.sin(theta)], [math.cos(theta)]], dtype=complex)
        G = geometry.geometric_tensor(psi, dpsi)
        g = geometry.fs_metric_real(G)
        assert abs(g[0, 0] - 1.0) <= 1e-12


def test_pure_phase_family_metric_is_zero():
    theta = 0.9
    psi = np.array([np.exp(1j * theta), 0.0])
    dpsi = np.array([[1j * np.exp(1j * theta)], [0.0]])
    G = geometry.geometric_tensor(psi, dpsi)
    assert abs(G[0, 0]) <= 1e-12


def test_global_phase_redefinition_leaves_g_unchanged():
    """psi' = exp(i alpha(theta)) psi with alpha = 3 theta has the same metric."""
    theta = 0.4
    psi = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
    dpsi = np.array([[-math.sin(theta)], [math.cos(theta)]], dtype=complex)
    g = geometry.fs_metric_real(geometry.geometric_tensor(psi, dpsi))

    phase = np.exp(3j * theta)
    psi2 = phase * psi
    dpsi2 = phase * (dpsi + 3j * psi[:, None])
    g2 = geometry.fs_metric_real(geometry.geometric_tensor(psi2, dpsi2))
    np.testing.assert_allclose(g2, g, atol=1e-10)


def test_fidelity_expansion_cross_check():
    """1 - |<psi(t), psi(t+h)>|^2 = g h^2 + O(h^3), Richardson extrapolated."""
    base = circuit.init_params(2, seed=9, scale=0.3)
    cutoff = 16

    def state(theta):
        layers = circuit.unpack(base)
        layers[0] = circuit.LayerParams(
            gamma=layers[0].gamma, phi=theta, zeta=layers[0].zeta, kappa=layers[0].kappa
        )
        return circuit.forward(circuit.pack(layers), cutoff).amplitudes

    theta0 = circuit.unpack(base)[0].phi
    psi0 = state(theta0)
    h = 1e-3
    dpsi = ((state(theta0 + h) - state(theta0 - h)) / (2 * h))[:, None]
    g = geometry.fs_metric_real(geometry.geometric_tensor(psi0, dpsi))[0, 0]

    def infid_over_h2(step):
        return (1.0 - abs(np.vdot(psi0, state(theta0 + step))) ** 2) / step**2

    richardson = 2 * infid_over_h2(h / 2) - infid_over_h2(h)
    assert abs(richardson - g) / abs(g) <= 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_geometric_tensor_fd_oracle(seed):
    """G from the analytic Jacobian matches G from an FD real-split Jacobian."""
    params, jac = random_jacobian(3, seed)
    fd_jr = harness.fd_real_split_jacobian(params, 20)
    G_fd = geometry.geometric_tensor(jac.psi.amplitudes, fd_jr)

    bt = geometry.basis_transforms(params.layout)
    # exact real-split columns from the Wirtinger columns via the chain rule
    Jr = jac.d_psi @ np.linalg.inv(bt.V).T
    G = geometry.geometric_tensor(jac.psi.amplitudes, Jr)
    assert np.max(np.abs(G - G_fd)) / np.max(np.abs(G)) <= 1e-6


# -- W / V transforms --------------------------------------------------------------


def test_transform_blocks():
    layout = circuit.layer_layout(1)
    bt = geometry.basis_transforms(layout)
    z = 0.7 - 0.2j
    vec = np.zeros(6, dtype=complex)
    vec[0], vec[1] = z.real, z.imag  # (Re, Im) stacked at the pair slots
    out = bt.W @ vec
    assert out[0] == pytest.approx(z)
    assert out[1] == pytest.approx(np.conj(z))


def test_transform_inverse_identities():
    layout = circuit.layer_layout(1)
    bt = geometry.basis_transforms(layout)
    assert np.max(np.abs(np.linalg.inv(bt.V) - bt.W.T)) <= 1e-12
    assert np.max(np.abs(np.linalg.inv(bt.W) - bt.V.T)) <= 1e-12


def test_all_real_layout_transforms_are_identity():
    layout = circuit.real_layout(4)
    bt = geometry.basis_transforms(layout)
    np.testing.assert_array_equal(bt.W, np.eye(4))
    np.testing.assert_array_equal(bt.V, np.eye(4))


# -- Hermitian metric ---------------------------------------------------------------


@pytest.mark.parametrize("depth", [1, 3, 8])
@pytest.mark.parametrize("seed", range(5))
def test_metric_hermitian_and_psd(depth, seed):
    _, jac = random_jacobian(depth, seed)
    f = geometry.hermitian_metric(jac, "full").dense()
    assert np.max(np.abs(f - f.conj().T)) <= 1e-10
    assert np.linalg.eigvalsh(f).min() >= -1e-9


def test_metric_all_real_reduces_to_fs():
    """With only real slots in the layout, f equals (G + G^T)/2 entrywise."""
    _, jac = random_jacobian(2, seed=3)
    real_cols = [m for m, s in enumerate(jac.layout) if s.kind == circuit.KIND_REAL]
    sub = circuit.StateJacobian(
        psi=jac.psi,
        d_psi=jac.d_psi[:, real_cols],
        layout=circuit.real_layout(len(real_cols)),
    )
    f = geometry.hermitian_metric(sub, "full").dense()
    g = geometry.fs_metric_real(
        geometry.geometric_tensor(jac.psi.amplitudes, sub.d_psi)
    )
    assert np.max(np.abs(f - g)) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_metric_real_split_fd_oracle(seed):
    """f from the f_mn formula vs V* g V^T with g from the FD real-split
    parametrization (plain central differences, FD-limited tolerance)."""
    params, jac = random_jacobian(2, seed)
    f = geometry.hermitian_metric(jac, "full").dense()
    Jr = harness.fd_real_split_jacobian(params, 20)
    g = geometry.fs_metric_real(geometry.geometric_tensor(jac.psi.amplitudes, Jr))
    f_oracle = geometry.real_split_metric_oracle(g, params.layout)
    assert np.max(np.abs(f - f_oracle)) / np.max(np.abs(f)) <= 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_block_metric_matches_full_blocks(seed):
    params, jac = random_jacobian(3, seed)
    full = geometry.hermitian_metric(jac, "full").dense()
    block = geometry.hermitian_metric(jac, "block")
    for sl, blk in zip(block.slices, block.blocks):
        np.testing.assert_allclose(blk, full[sl, sl], atol=1e-14)


def test_single_layer_block_equals_full():
    _, jac = random_jacobian(1, seed=0)
    f_full = geometry.hermitian_metric(jac, "full").dense()
    f_block = geometry.hermitian_metric(jac, "block").dense()
    assert np.max(np.abs(f_full - f_block)) <= 1e-10


def test_metric_global_phase_invariance():
    _, jac = random_jacobian(2, seed=1)
    f = geometry.hermitian_metric(jac, "full").dense()
    phase = np.exp(1j * 0.83)
    jac2 = circuit.StateJacobian(
        psi=FockVector(phase * jac.psi.amplitudes, jac.psi.cutoff),
        d_psi=phase * jac.d_psi,
        layout=jac.layout,
    )
    f2 = geometry.hermitian_metric(jac2, "full").dense()
    assert np.max(np.abs(f - f2)) <= 1e-10


def test_real_slot_diagonal_matches_fs_entry():
    """The 1x1 f diagonal on a real slot equals the real FS metric entry."""
    params, jac = random_jacobian(2, seed=4)
    f = geometry.hermitian_metric(jac, "full").dense()
    bt = geometry.basis_transforms(params.layout)
    Jr = jac.d_psi @ np.linalg.inv(bt.V).T
    g = geometry.fs_metric_real(geometry.geometric_tensor(jac.psi.amplitudes, Jr))
    for m, slot in enumerate(params.layout):
        if slot.kind == circuit.KIND_REAL:
            assert abs(f[m, m] - g[m, m]) <= 1e-12


def test_metric_missing_partner_rejected():
    _, jac = random_jacobian(1, seed=0)
    broken_layout = tuple(
        circuit.SlotInfo(s.layer, s.name, s.kind, None) for s in jac.layout
    )
    broken = circuit.StateJacobian(psi=jac.psi, d_psi=jac.d_psi, layout=broken_layout)
    with pytest.raises(ParameterError):
        geometry.hermitian_metric(broken, "full")


# -- pseudo-inverse and natural direction -------------------------------------------


def test_pinv_zero_metric_with_regularization():
    f = geometry.HermitianMetric("full", [np.zeros((3, 3), dtype=complex)], [slice(0, 3)])
    out = geometry.regularized_pinv(f, 0.1)
    np.testing.assert_allclose(out.dense(), 10.0 * np.eye(3), atol=1e-12)


def test_pinv_identity_no_regularization():
    f = geometry.HermitianMetric("full", [np.eye(4, dtype=complex)], [slice(0, 4)])
    np.testing.assert_allclose(geometry.regularized_pinv(f, 0.0).dense(), np.eye(4), atol=1e-13)


def test_polar_metric_pinv():
    f = geometry.HermitianMetric("full", [np.diag([1.0, 4.0]).astype(complex)], [slice(0, 2)])
    out = geometry.regularized_pinv(f, 0.0)
    np.testing.assert_array_equal(out.dense(), np.diag([1.0, 0.25]))


def test_polar_natural_direction_exact():
    f_pinv = geometry.regularized_pinv(
        geometry.HermitianMetric("full", [np.diag([1.0, 4.0]).astype(complex)], [slice(0, 2)]),
        0.0,
    )
    grad = np.array([0.7, -1.2], dtype=complex)
    direction = geometry.natural_direction(f_pinv, grad)
    np.testing.assert_array_equal(direction, np.array([0.7, -1.2 / 4], dtype=complex))


def test_natural_direction_identity_metric():
    f_pinv = geometry.HermitianMetric("full", [np.eye(3, dtype=complex)], [slice(0, 3)])
    grad = np.array([1.0, 2.0j, -0.5], dtype=complex)
    np.testing.assert_array_equal(geometry.natural_direction(f_pinv, grad), grad)


@pytest.mark.parametrize("seed", range(3))
def test_pinv_roundtrip_positive_definite(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    f_mat = X @ X.conj().T + 0.5 * np.eye(5)
    f = geometry.HermitianMetric("full", [f_mat], [slice(0, 5)])
    f_pinv = geometry.regularized_pinv(f, 0.0)
    v = rng.normal(size=5) + 1j * rng.normal(size=5)
    roundtrip = f_mat @ geometry.natural_direction(f_pinv, v)
    assert np.max(np.abs(roundtrip - v)) <= 1e-8


def test_pinv_rejects_non_hermitian():
    bad = geometry.HermitianMetric(
        "full", [np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex)], [slice(0, 2)]
    )
    with pytest.raises(MetricError):
        geometry.regularized_pinv(bad, 0.0)


@pytest.mark.parametrize("seed", range(3))
def test_descent_property(seed):
    """For lam > 0, Re<v, (f+lam)^+ v> > 0 for any nonzero v."""
    _, jac = random_jacobian(2, seed)
    f = geometry.hermitian_metric(jac, "block")
    f_pinv = geometry.regularized_pinv(f, 0.1)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=f.n) + 1j * rng.normal(size=f.n)
    overlap = np.vdot(v, geometry.natural_direction(f_pinv, v)).real
    assert overlap > 0
