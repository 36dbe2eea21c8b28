import numpy as np
import pytest

from phantm import fock
from phantm.fock import (
    DensityOperator,
    DimensionMismatchError,
    FockVector,
    MatrixOperator,
    NormalizationError,
    apply,
    fidelity,
    fock_state,
    partial_trace,
    tensor,
    vacuum,
)
from phantm.gaussian import annihilation, beamsplitter, number_op
from phantm.states import squeezed_vacuum


def test_tensor_vacuum_and_identity():
    two = tensor(vacuum(8), vacuum(8))
    assert two.modes == 2
    assert abs(two.amplitudes[0] - 1.0) < 1e-15
    eye = MatrixOperator(np.eye(8), 1, 8)
    assert np.allclose(tensor(eye, eye).matrix, np.eye(64))


def test_tensor_index_row_major():
    # |1> x |2> occupies flat index 1*cutoff + 2 under row-major layout
    cutoff = 10
    t = tensor(fock_state(1, cutoff), fock_state(2, cutoff))
    idx = int(np.argmax(np.abs(t.amplitudes)))
    assert idx == 1 * cutoff + 2
    # brute-force enumeration of the index map
    for n0 in range(3):
        for n1 in range(3):
            tt = tensor(fock_state(n0, cutoff), fock_state(n1, cutoff))
            assert int(np.argmax(np.abs(tt.amplitudes))) == n0 * cutoff + n1


def test_tensor_cutoff_mismatch():
    with pytest.raises(DimensionMismatchError):
        tensor(vacuum(8), vacuum(9))


def test_apply_identity_and_ladders():
    psi = squeezed_vacuum(0.4, 20)
    eye = MatrixOperator(np.eye(20), 1, 20)
    assert np.allclose(apply(eye, psi).amplitudes, psi.amplitudes)
    a = MatrixOperator(annihilation(20), 1, 20)
    out = apply(a, fock_state(1, 20))
    assert abs(out.amplitudes[0] - 1.0) < 1e-15
    n_op = MatrixOperator(number_op(20), 1, 20)
    for n in range(6):
        res = apply(n_op, fock_state(n, 20))
        assert abs(res.amplitudes[n] - n) < 1e-12


def test_apply_tracks_norm():
    a = MatrixOperator(annihilation(12), 1, 12)
    out = apply(a, fock_state(4, 12))
    assert abs(out.norm_tracked - 2.0) < 1e-12  # sqrt(4)
    normalized = out.normalize()
    assert abs(normalized.norm() - 1.0) < 1e-12
    assert abs(normalized.norm_tracked - 2.0) < 1e-12


def test_partial_trace_product_state():
    rho_a = squeezed_vacuum(0.3, 10).dm()
    rho_b = fock_state(2, 10).dm()
    joint = tensor(rho_a, rho_b)
    red = partial_trace(joint, [0])
    assert np.max(np.abs(red.matrix - rho_a.matrix)) < 1e-12
    assert abs(partial_trace(joint, [1]).trace() - joint.trace()) < 1e-12


def test_partial_trace_two_mode_squeezed_thermal():
    # B(pi/4) on S(r)|0> x S(-r)|0> makes the two-mode squeezed state whose
    # reduced state is thermal with Schmidt weights tanh^{2n} r / cosh^2 r
    r, cutoff = 0.5, 40
    joint = tensor(squeezed_vacuum(r, cutoff), squeezed_vacuum(-r, cutoff))
    bs = MatrixOperator(beamsplitter(np.pi / 4, cutoff), 2, cutoff)
    tms = apply(bs, joint)
    red = partial_trace(tms.dm(), [0])
    nbar = float(np.real(np.trace(number_op(cutoff) @ red.matrix)))
    assert abs(nbar - np.sinh(r) ** 2) < 1e-8
    schmidt = np.tanh(r) ** (2 * np.arange(cutoff)) / np.cosh(r) ** 2
    assert np.max(np.abs(np.real(np.diag(red.matrix)) - schmidt)) < 1e-10
    off = red.matrix - np.diag(np.diag(red.matrix))
    assert np.max(np.abs(off)) < 1e-10


def test_partial_trace_errors():
    rho = vacuum(6, 2).dm()
    with pytest.raises(ValueError):
        partial_trace(rho, [])
    with pytest.raises(ValueError):
        partial_trace(rho, [5])


def test_fidelity_basics():
    psi = squeezed_vacuum(0.6, 30)
    assert abs(fidelity(psi, psi) - 1.0) < 1e-12
    assert fidelity(fock_state(0, 10), fock_state(1, 10)) < 1e-15


def test_fidelity_squeezed_vacuum_sech():
    # independent oracle: sum_n (tanh r)^{2n} (2n)!/(4^n n!^2) converges to
    # cosh r, so |<0|S(r)|0>|^2 = 1/series = sech r
    r = 1.0
    series, term = 0.0, 1.0
    for n in range(400):
        series += term
        term *= np.tanh(r) ** 2 * (2 * n + 1) / (2 * n + 2)
    got = fidelity(squeezed_vacuum(r, 80), vacuum(80))
    assert abs(got - 1.0 / series) < 1e-6
    assert abs(got - 1.0 / np.cosh(r)) < 1e-10


def test_fidelity_symmetry_and_mixed():
    rng = np.random.default_rng(0)
    a = rng.normal(size=12) + 1j * rng.normal(size=12)
    b = rng.normal(size=12) + 1j * rng.normal(size=12)
    va = FockVector(a / np.linalg.norm(a), 1, 12)
    vb = FockVector(b / np.linalg.norm(b), 1, 12)
    assert abs(fidelity(va, vb) - fidelity(vb, va)) < 1e-12
    rho = (0.5 * va.dm().matrix + 0.5 * vb.dm().matrix)
    mixed = DensityOperator(rho, 1, 12)
    f_pm = fidelity(va, mixed)
    f_mp = fidelity(mixed, va)
    assert abs(f_pm - f_mp) < 1e-12
    # pure-vs-mixed equals <psi|rho|psi>
    direct = float(np.real(np.vdot(va.amplitudes, rho @ va.amplitudes)))
    assert abs(f_pm - direct) < 1e-12
    # mixed-vs-mixed Uhlmann with itself is 1
    assert abs(fidelity(mixed, mixed) - 1.0) < 1e-9


def test_fidelity_rejects_unnormalized():
    bad = FockVector(np.ones(8), 1, 8)
    with pytest.raises(NormalizationError):
        fidelity(bad, vacuum(8))


def test_tail_mass_and_guard():
    psi = squeezed_vacuum(0.8, 40)
    assert psi.tail_mass() < 1e-6
    hot = fock_state(39, 40)
    assert hot.tail_mass() > 0.99
    idx = fock.guard_projector_indices(40, 1)
    assert idx.max() < 40 - 4  # 10% guard


def test_unitarity_defect_flags():
    from phantm.gaussian import displacement, squeeze

    op = MatrixOperator(displacement(0.7 + 0.2j, 40), 1, 40)
    assert op.unitarity_defect() < 1e-10
    sq = MatrixOperator(squeeze(0.5, 40), 1, 40)
    assert sq.unitarity_defect() < 1e-10


def test_apply_partial_trace_commutes_with_kept_mode_action():
    # acting on the kept mode commutes with tracing out the other mode
    rng = np.random.default_rng(3)
    cutoff = 8
    vec = rng.normal(size=cutoff**2) + 1j * rng.normal(size=cutoff**2)
    psi = FockVector(vec / np.linalg.norm(vec), 2, cutoff)
    op = annihilation(cutoff) + 0.3 * np.eye(cutoff)
    big = np.kron(op, np.eye(cutoff))
    rho_after = partial_trace(apply(MatrixOperator(big, 2, cutoff), psi).dm(), [0])
    red = partial_trace(psi.dm(), [0])
    direct = op @ red.matrix @ op.conj().T
    assert np.max(np.abs(rho_after.matrix - direct)) < 1e-12
