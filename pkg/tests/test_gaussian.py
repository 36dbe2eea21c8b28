import numpy as np
import pytest

from phantm import gaussian as g
from phantm.fock import guard_projector_indices, identity_guard_indices, vacuum
from phantm.states import squeezed_vacuum


def test_damp_diagonal_values():
    mat = g.damp(0.5, 10)
    assert abs(mat[2, 2] - np.exp(-1.0)) < 1e-15
    assert abs(mat[0, 0] - 1.0) < 1e-15


def test_displacement_zero_is_identity():
    assert np.max(np.abs(g.displacement(0.0, 20) - np.eye(20))) < 1e-14


def test_displacement_coherent_series():
    # independent series oracle: <n|D(alpha)|0> = e^{-|a|^2/2} a^n / sqrt(n!)
    from math import factorial

    alpha, cutoff = 1.0, 40
    col = g.displacement(alpha, cutoff) @ vacuum(cutoff).amplitudes
    for n in range(10):
        expected = np.exp(-0.5 * abs(alpha) ** 2) * alpha**n / np.sqrt(factorial(n))
        assert abs(col[n] - expected) < 1e-10
    assert abs(col[2] - np.exp(-0.5) / np.sqrt(2.0)) < 1e-10


def test_build_front_end_and_labels():
    spec = g.OperatorSpec("damp", -0.2)
    assert not spec.physical
    op = g.build(spec, 12)
    assert "non-physical" in op.label
    assert g.build(g.OperatorSpec("beamsplitter", 0.3), 8).modes == 2
    with pytest.raises(ValueError):
        g.build(g.OperatorSpec("nonsense"), 12)
    with pytest.raises(ValueError):
        g.build(g.OperatorSpec("rotate", 0.1), 1)


def test_db_conversions():
    assert g.db_to_r(0.0) == 0.0
    assert abs(g.db_to_r(11.0) - 1.2664218) < 1e-6
    assert abs(g.db_to_r(17.0) - 1.9571973) < 1e-6
    assert abs(g.r_to_db(g.db_to_r(13.0)) - 13.0) < 1e-12
    with pytest.raises(ValueError):
        g.db_to_r(-1.0)


def test_subtraction_reflectivity():
    r = g.db_to_r(11.0)
    theta = g.subtraction_reflectivity(r)
    assert abs(np.cos(theta) ** 2 - np.tanh(r)) < 1e-12
    assert abs(np.cos(theta) ** 2 - 0.852825) < 1e-5
    r17 = g.db_to_r(17.0)
    assert abs(np.cos(g.subtraction_reflectivity(r17)) ** 2 - 0.9609) < 2e-4
    # transparent beamsplitter limit at large squeezing
    assert g.subtraction_reflectivity(8.0) < 2e-2
    with pytest.raises(ValueError):
        g.subtraction_reflectivity(0.0)


def test_rotation_additivity():
    a = g.rotation(0.3, 15)
    b = g.rotation(1.1, 15)
    assert np.max(np.abs(a @ b - g.rotation(1.4, 15))) < 1e-14


def test_beamsplitter_heisenberg_action():
    # B(theta)^dag (a1, a2) B(theta) = (t a1 + r a2, t a2 - r a1), exact on
    # the total-photon guard because the generator conserves photon number
    theta, cutoff = 0.42, 30
    bs = g.beamsplitter(theta, cutoff)
    a = g.annihilation(cutoff)
    eye = np.eye(cutoff)
    a1, a2 = np.kron(a, eye), np.kron(eye, a)
    t, r = np.cos(theta), np.sin(theta)
    gi = guard_projector_indices(cutoff, 2)
    block = np.ix_(gi, gi)
    dev1 = np.max(np.abs((bs.conj().T @ a1 @ bs - (t * a1 + r * a2))[block]))
    dev2 = np.max(np.abs((bs.conj().T @ a2 @ bs - (t * a2 - r * a1))[block]))
    assert dev1 < 1e-9 and dev2 < 1e-9


def test_beamsplitter_decomposition_identity():
    # macronode-convention B(pi/4) = e^{iP1Q2} S1(ln2/2) S2^dag(ln2/2) e^{-iQ1P2}
    from scipy.linalg import expm

    cutoff = 40
    q, p, eye = g.quad_q(cutoff), g.quad_p(cutoff), np.eye(cutoff)
    p1q2 = np.kron(p, eye) @ np.kron(eye, q)
    q1p2 = np.kron(q, eye) @ np.kron(eye, p)
    shalf = g.squeeze(0.5 * np.log(2.0), cutoff)
    rhs = expm(1j * p1q2) @ np.kron(shalf, eye) @ np.kron(eye, shalf.conj().T) @ expm(-1j * q1p2)
    lhs = g.beamsplitter(-np.pi / 4, cutoff)  # = e^{(pi/4)(a1 a2^dag - a1^dag a2)}
    gi = identity_guard_indices(cutoff, 2)
    assert np.max(np.abs((lhs - rhs)[np.ix_(gi, gi)])) < 1e-8


def test_damping_commutation_with_ladder():
    # N(beta) a N(-beta) = a e^{beta}, exact for the diagonal construction
    beta, cutoff = 0.37, 40
    lhs = g.damp(beta, cutoff) @ g.annihilation(cutoff) @ g.damp(-beta, cutoff)
    assert np.max(np.abs(lhs - g.annihilation(cutoff) * np.exp(beta))) < 1e-8


def test_cz_commutes_with_position():
    cutoff = 20
    cz = g.cz(1.0, cutoff)
    q1 = np.kron(g.quad_q(cutoff), np.eye(cutoff))
    q2 = np.kron(np.eye(cutoff), g.quad_q(cutoff))
    gi = guard_projector_indices(cutoff, 2)
    block = np.ix_(gi, gi)
    assert np.max(np.abs((cz @ q1 - q1 @ cz)[block])) < 1e-10
    assert np.max(np.abs((cz @ q2 - q2 @ cz)[block])) < 1e-10


def test_damping_on_p_eigenstate_values():
    coef, r_prime, chain = g.damping_on_p_eigenstate(0.2, m=0.0)
    assert abs(r_prime - np.arctanh(np.exp(-0.4))) < 1e-12
    assert abs(r_prime - 0.811324) < 1e-5
    assert coef == 1.0
    kinds = [spec.kind for spec in chain]
    assert kinds == ["damp", "shiftZ", "damp", "squeeze"]
    coef2, _, _ = g.damping_on_p_eigenstate(0.3, m=1.5)
    assert abs(coef2 - np.exp(0.5 * 1.5**2 * np.sinh(0.3) * np.cosh(0.3))) < 1e-12
    # beta -> infinity drives the residual squeezing to vacuum
    _, r_inf, _ = g.damping_on_p_eigenstate(8.0)
    assert r_inf < 2e-7
    with pytest.raises(ValueError):
        g.damping_on_p_eigenstate(-0.1)


def test_damping_on_squeezed_proxy():
    # N(beta) S(r_big)|0> is close to S(r') |0> with tanh r' = e^{-2b} tanh r_big
    cutoff, beta, r_big = 80, 0.3, 3.0
    vec = g.damp(beta, cutoff) @ squeezed_vacuum(r_big, cutoff).amplitudes
    vec /= np.linalg.norm(vec)
    r_target = np.arctanh(np.exp(-2.0 * beta) * np.tanh(r_big))
    ref = squeezed_vacuum(r_target, cutoff).amplitudes
    fid = abs(np.vdot(vec, ref)) ** 2
    assert fid > 0.999


def test_q_eigensystem_reconstructs_position():
    x, v = g.q_eigensystem(25)
    assert np.max(np.abs((v * x) @ v.conj().T - g.quad_q(25))) < 1e-12


def test_gaussian_envelope_and_shear():
    cutoff = 30
    env = g.gaussian_q_envelope(2.0, cutoff)
    # hermitian positive contraction
    assert np.max(np.abs(env - env.conj().T)) < 1e-12
    w = np.linalg.eigvalsh(env)
    assert w.max() < 1.0 + 1e-10 and w.min() > -1e-12
    shear = g.quadratic_phase(0.8, cutoff)
    from phantm.fock import MatrixOperator

    assert MatrixOperator(shear, 1, cutoff).unitarity_defect() < 1e-10
