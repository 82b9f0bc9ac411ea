import math

import numpy as np
import pytest
import scipy.linalg as sla

from ncvar.fock import FockBasis, FockState, StateKind, StateSpec, build_state, mean_photon, quadrature_ops
from ncvar.linopt import (
    ClementsMesh,
    LinearOpticalChannel,
    LinOpticalUnitary,
    PassiveUnitary,
    apply_channel_phiL,
    apply_linear_optics,
    beam_splitter,
    beam_splitter_mixing,
    clements_decompose,
    displacement_unitary,
    mesh_from_params,
    passive_unitary_to_fock,
    phase_rotation,
    symplectic_embedding,
)
from ncvar.gaussian import is_symplectic
from ncvar.qfi import metrological_power

K = StateKind


def test_displacement_creates_coherent_state():
    b = FockBasis((30,))
    D = displacement_unitary(b, 0, 0.5)
    vac = np.zeros(30)
    vac[0] = 1
    coh = build_state(StateSpec(K.COHERENT, {"alpha": 0.5}, (30,))).amplitudes
    assert np.max(np.abs(D @ vac - coh)) < 1e-8
    Dm = displacement_unitary(b, 0, -0.5)
    assert np.max(np.abs((D @ Dm)[:20, :20] - np.eye(20))) < 1e-8


def test_displacement_shifts_cat_quadrature():
    psi = build_state(StateSpec(K.CAT, {"alpha": 1.0, "parity": 1}, (50,)))
    beta = 0.4 - 0.2j
    shifted = displacement_unitary(psi.basis, 0, beta) @ psi.amplitudes
    x, _ = quadrature_ops(psi.basis)
    before = psi.expect(x).real
    after = np.vdot(shifted, x @ shifted).real
    assert after - before == pytest.approx(math.sqrt(2) * beta.real, abs=1e-7)


def test_phase_rotation_is_diagonal():
    R = phase_rotation(FockBasis((4,)), 0, 0.3)
    assert np.allclose(np.diag(R), np.exp(1j * 0.3 * np.arange(4)))


def test_balanced_splitter_on_coherent_pair():
    a = 0.8
    b = FockBasis((20, 20))
    psi = build_state(StateSpec(K.COHERENT, {"alpha": [a, a]}, (20, 20)))
    out = beam_splitter(b, (0, 1), -math.pi / 4) @ psi.amplitudes
    target = build_state(StateSpec(K.COHERENT, {"alpha": [math.sqrt(2) * a, 0]}, (20, 20))).amplitudes
    assert abs(abs(np.vdot(target, out)) - 1) < 1e-8


def test_splitter_maps_ecs_to_cat():
    b = FockBasis((20, 20))
    for parity in (1, -1):
        ecs = build_state(StateSpec(K.ENTANGLED_COHERENT, {"alpha": [1.0, 1.0], "parity": parity}, (20, 20)))
        out = beam_splitter(b, (0, 1), -math.pi / 4) @ ecs.amplitudes
        cat = build_state(StateSpec(K.CAT, {"alpha": math.sqrt(2), "parity": parity}, (20,))).amplitudes
        vac = np.eye(20)[0]
        assert abs(abs(np.vdot(np.kron(cat, vac), out)) - 1) < 1e-8


def test_splitter_mixing_matches_fock_action():
    b = FockBasis((12, 12))
    th, ph = 0.37, 0.9
    U = beam_splitter_mixing(th, ph)
    psi = build_state(StateSpec(K.COHERENT, {"alpha": [0.6, -0.3j]}, (12, 12)))
    out = beam_splitter(b, (0, 1), th, ph) @ psi.amplitudes
    tgt = build_state(StateSpec(K.COHERENT, {"alpha": list(U @ np.array([0.6, -0.3j]))}, (12, 12))).amplitudes
    assert abs(abs(np.vdot(tgt, out)) - 1) < 1e-8


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
def test_clements_reconstruction(N, rng):
    U = PassiveUnitary.random(N, rng).mixing_matrix
    mesh = clements_decompose(U)
    assert np.max(np.abs(mesh.matrix() - U)) < 1e-10
    again = mesh_from_params(N, mesh.params())
    assert np.max(np.abs(again.matrix() - U)) < 1e-10
    assert mesh.params().size == N * N


def test_identity_decomposes_without_swaps():
    mesh = clements_decompose(np.eye(4))
    assert all(abs(theta) < 1e-12 for _, theta, _ in mesh.cells)


def test_passive_unitary_matches_generator_exponential(rng):
    from ncvar.fock import annihilation_op, total_number_diag

    b = FockBasis((4, 4, 4))
    U = PassiveUnitary.random(3, rng)
    W = passive_unitary_to_fock(b, U)
    H = -1j * sla.logm(U.mixing_matrix)
    a = [annihilation_op(b, m) for m in range(3)]
    G = sum(H[m, n] * a[m].conj().T @ a[n] for m in range(3) for n in range(3))
    # the truncated quadratic generator is exact on sectors below the cutoff
    low = total_number_diag(b) <= 3
    assert np.max(np.abs((sla.expm(1j * G) - W)[np.ix_(low, low)])) < 1e-10
    assert np.max(np.abs(W.conj().T @ W - np.eye(b.total_dim))) < 1e-10


def test_photon_number_conserved(rng):
    psi = build_state(StateSpec(K.FOCK, {"n": [2, 1, 0]}, (5, 5, 5)))
    for _ in range(50):
        out = apply_linear_optics(psi, LinOpticalUnitary(PassiveUnitary.random(3, rng), np.zeros(3)))
        assert abs(mean_photon(out) - 3) < 1e-8


def test_symplectic_embedding_is_orthogonal_symplectic(rng):
    O = symplectic_embedding(PassiveUnitary.random(3, rng).mixing_matrix)
    assert np.allclose(O @ O.T, np.eye(6), atol=1e-12)
    assert is_symplectic(O)


def test_non_unitary_rejected():
    with pytest.raises(ValueError):
        PassiveUnitary(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_channel_identity_with_vacuum_ancilla():
    rho = build_state(StateSpec(K.DECOHERED_CAT, {"alpha": 1.0, "gamma": 0.5}, (20,)))
    out = apply_channel_phiL(rho, StateSpec(K.VACUUM, {}, (20,)), LinOpticalUnitary(PassiveUnitary.identity(2), np.zeros(2)))
    assert np.max(np.abs(out.matrix - rho.matrix)) < 1e-10
    assert abs(np.trace(out.matrix) - 1) < 1e-9


def test_channel_rejects_nonclassical_ancilla():
    with pytest.raises(ValueError):
        LinearOpticalChannel(StateSpec(K.FOCK, {"n": 1}, (5,)), LinOpticalUnitary(PassiveUnitary.identity(2), np.zeros(2)))


def test_loss_channel_on_single_photon():
    rho = build_state(StateSpec(K.FOCK, {"n": 1}, (10,)))
    ch = LinearOpticalChannel(StateSpec(K.THERMAL, {"nbar": 0.1}, (10,)), LinOpticalUnitary(PassiveUnitary(beam_splitter_mixing(0.5)), np.zeros(2)))
    out = ch.apply(rho)
    assert np.max(np.abs(out.matrix - np.diag(np.diag(out.matrix)))) < 1e-12
    assert metrological_power(out).value <= metrological_power(rho).value


def test_coherent_input_stays_classical(rng):
    rho = build_state(StateSpec(K.COHERENT, {"alpha": 0.5}, (25,)))
    for _ in range(20):
        anc = StateSpec(K.COHERENT, {"alpha": complex(*rng.normal(0, 0.3, 2))}, (25,))
        out = apply_channel_phiL(rho, anc, LinOpticalUnitary.random(2, rng, max_displacement=0.3))
        assert metrological_power(out).value <= 1e-7


def test_pushforward_is_a_decomposition(rng):
    rho = build_state(StateSpec(K.DECOHERED_CAT, {"alpha": 0.8, "gamma": 0.3}, (16,)))
    ch = LinearOpticalChannel(StateSpec(K.COHERENT, {"alpha": 0.3}, (16,)), LinOpticalUnitary.random(2, rng, 0.2))
    lam, vecs = np.linalg.eigh(rho.matrix)
    w, V = ch.pushforward(lam.clip(0), vecs, rho.basis)
    assert np.max(np.abs((V * w) @ V.conj().T - ch.apply(rho).matrix)) < 1e-9
