import math

import numpy as np
import pytest

from ncvar.fock import DensityMatrix, FockBasis, FockState, StateKind, StateSpec, build_state, number_op, tensor
from ncvar.linopt import LinOpticalUnitary, apply_linear_optics
from ncvar.measures import q_pure
from ncvar.qfi import (
    QfiMatrix,
    QuadratureDirection,
    i_mean,
    i_opt,
    metrological_power,
    metrological_power_checked,
    optimal_direction,
    qfi_matrix,
    quadrature_operator,
    spectral_qfi,
)

K = StateKind


def naive_qfi(rho: np.ndarray, A: np.ndarray) -> float:
    """Independent oracle: the full double sum over eigenpairs with lam_i + lam_j > 0."""
    lam, E = np.linalg.eigh(rho)
    Ae = E.conj().T @ A @ E
    tot = 0.0
    for i in range(lam.size):
        for j in range(lam.size):
            s = lam[i] + lam[j]
            if s > 1e-12:
                tot += 2 * (lam[i] - lam[j]) ** 2 / s * abs(Ae[i, j]) ** 2
    return tot


def test_coherent_quadrature_qfi_is_two():
    psi = build_state(StateSpec(K.COHERENT, {"alpha": 0.8 - 0.3j}, (40,)))
    for th in np.linspace(0, np.pi, 5):
        X = quadrature_operator(psi.basis, [math.cos(th), math.sin(th)])
        assert spectral_qfi(psi, X) == pytest.approx(2.0, abs=1e-8)


def test_thermal_qfi():
    rho = build_state(StateSpec(K.THERMAL, {"nbar": 1.0}, (60,)), check=False)
    assert qfi_matrix(rho).matrix[0, 0] == pytest.approx(2 / 3, abs=1e-5)


def test_fock_number_qfi_zero():
    psi = build_state(StateSpec(K.FOCK, {"n": 3}, (6,)))
    assert spectral_qfi(psi, number_op(psi.basis, 0)) == 0.0


def test_pure_state_is_four_variance(rng):
    b = FockBasis((6,))
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    psi = FockState.normalized(b, v)
    A = rng.standard_normal((6, 6))
    A = A + A.T
    var = np.vdot(psi.amplitudes, A @ A @ psi.amplitudes).real - np.vdot(psi.amplitudes, A @ psi.amplitudes).real ** 2
    assert spectral_qfi(psi, A) == pytest.approx(4 * var, abs=1e-7)
    assert spectral_qfi(psi.dm(), A) == pytest.approx(4 * var, abs=1e-7)


def test_spectral_qfi_matches_naive_sum(rng):
    b = FockBasis((5,))
    G = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    rho = G @ G.conj().T
    rho /= np.trace(rho).real
    A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    A = A + A.conj().T
    assert spectral_qfi(DensityMatrix(b, rho), A) == pytest.approx(naive_qfi(rho, A), abs=1e-9)


def test_non_hermitian_generator_rejected():
    psi = build_state(StateSpec(K.VACUUM, {}, (3,)))
    with pytest.raises(ValueError):
        spectral_qfi(psi, np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex))


def test_vacuum_matrix():
    F = qfi_matrix(build_state(StateSpec(K.VACUUM, {}, (10,))))
    assert np.allclose(F.matrix, 2 * np.eye(2), atol=1e-8)
    assert i_opt(F) == pytest.approx(1, abs=1e-8) and i_mean(F) == pytest.approx(1, abs=1e-8)


def test_fock_product_matrix():
    F = qfi_matrix(build_state(StateSpec(K.FOCK, {"n": [1, 0]}, (8, 8))))
    assert np.allclose(F.matrix, np.diag([6, 6, 2, 2]), atol=1e-6)
    assert i_mean(F) == pytest.approx(2, abs=1e-9)
    assert i_opt(F) == pytest.approx(3, abs=1e-9)
    single = qfi_matrix(build_state(StateSpec(K.FOCK, {"n": 1}, (8,))))
    assert i_opt(single) == pytest.approx(3) and i_mean(single) == pytest.approx(3)


def test_squeezed_vacuum_matrix():
    # real xi > 0 stretches x: F = diag(2e^{2r}, 2e^{-2r}) in (x, p) order
    F = qfi_matrix(build_state(StateSpec(K.SQUEEZED_VACUUM, {"xi": 0.5}, (60,))))
    assert np.allclose(F.matrix, np.diag([2 * math.e, 2 / math.e]), atol=1e-5)


def test_matrix_quadratic_form_matches_spectral(rng):
    rho = build_state(StateSpec(K.DECOHERED_CAT, {"alpha": 0.9, "gamma": 0.4}, (25,)))
    F = qfi_matrix(rho)
    for _ in range(5):
        mu = rng.standard_normal(2)
        mu /= np.linalg.norm(mu)
        assert F.quadratic(mu) == pytest.approx(spectral_qfi(rho, quadrature_operator(rho.basis, mu)), abs=1e-6)


def test_direction_normalization_and_determinism():
    with pytest.raises(ValueError):
        QuadratureDirection(np.array([1.0, 1.0]))
    d = optimal_direction(QfiMatrix(np.diag([4.0, 4.0, 2.0, 2.0])))
    assert np.allclose(d.vector, [1, 0, 0, 0])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fock_metrological_power(n):
    mp = metrological_power(build_state(StateSpec(K.FOCK, {"n": n}, (n + 20,))))
    assert mp.value == pytest.approx(2 * n, abs=1e-6)
    assert mp.min_variance == pytest.approx(1 / mp.lambda_max)


def test_decohered_cat_values():
    a, g = 1.0, 0.5
    e = math.exp(-2)
    expected = 16 * g * (g + e) / (2 + 2 * g * e) ** 2
    assert metrological_power(build_state(StateSpec(K.DECOHERED_CAT, {"alpha": a, "gamma": g}, (30,)))).value == pytest.approx(expected, abs=1e-5)
    assert expected == pytest.approx(1.1147, abs=1e-4)
    zero = metrological_power(build_state(StateSpec(K.DECOHERED_CAT, {"alpha": 1.0, "gamma": -e}, (30,)))).value
    assert zero == pytest.approx(0, abs=1e-7)


def test_noon_value_is_n_not_two_nbar():
    # spectral value M = n for NOON n >= 2 (the reported discrepancy), M = 2 for n = 1
    for n, expected in ((1, 2.0), (2, 2.0), (3, 3.0)):
        assert metrological_power(build_state(StateSpec(K.NOON, {"n": n}, (n + 3, n + 3)))).value == pytest.approx(expected, abs=1e-9)


def test_unitary_invariance(rng):
    rho = build_state(StateSpec(K.FOCK, {"n": [1, 1]}, (5, 5)))
    m0 = metrological_power(rho).value
    out = apply_linear_optics(rho, LinOpticalUnitary.random(2, rng))
    assert metrological_power(out).value == pytest.approx(m0, abs=1e-6)


def test_convexity_and_tensor_rule():
    a = build_state(StateSpec(K.FOCK, {"n": 1}, (10,))).dm()
    b = build_state(StateSpec(K.CAT, {"alpha": 1.0, "parity": 1}, (10,)), check=False).dm()
    mix = DensityMatrix(a.basis, 0.3 * a.matrix + 0.7 * b.matrix)
    ma, mb = metrological_power(a).value, metrological_power(b).value
    assert metrological_power(mix).value <= 0.3 * ma + 0.7 * mb + 1e-7
    sq = build_state(StateSpec(K.SQUEEZED_VACUUM, {"xi": 0.3}, (20,)))
    joint = tensor(build_state(StateSpec(K.FOCK, {"n": 1}, (8,))), sq)
    assert metrological_power(joint).value == pytest.approx(max(2.0, metrological_power(sq).value), abs=1e-6)


def test_pure_identity_i_mean_minus_one_is_q(rng):
    for spec in (StateSpec(K.CAT, {"alpha": 1.2, "parity": -1}, (40,)), StateSpec(K.PHOTON_ADDED_COHERENT, {"alpha": 0.6}, (30,))):
        psi = build_state(spec)
        assert i_mean(qfi_matrix(psi)) - 1 == pytest.approx(q_pure(psi), abs=1e-7)


def test_checked_reports_truncation_delta():
    res = metrological_power_checked(StateSpec(K.CAT, {"alpha": 1.0, "parity": 1}, (30,)))
    assert res.converged and res.truncation_delta < 1e-6
