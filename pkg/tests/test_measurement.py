import numpy as np
import pytest

from phantm import measurement as meas
from phantm.fock import DensityOperator, FockVector, fock_state, partial_trace, tensor, vacuum
from phantm.states import cat, coherent, squeezed_vacuum


def test_quadrature_bra_values():
    b = meas.quadrature_bra(0.0, 0.0, 6)
    assert abs(b[0] - np.pi**-0.25) < 1e-12
    assert abs(b[1]) < 1e-14  # odd wavefunction at the origin
    b1 = meas.quadrature_bra(1.0, 0.0, 6)
    psi2 = np.pi**-0.25 / np.sqrt(8.0) * (4.0 - 2.0) * np.exp(-0.5)
    assert abs(b1[2] - psi2) < 1e-10
    assert abs(b1[2] - 0.32214) < 1e-4


def test_quadrature_bra_periodic_in_theta():
    b1 = meas.quadrature_bra(0.7, 0.3, 40)
    b2 = meas.quadrature_bra(0.7, 0.3 + 2 * np.pi, 40)
    assert np.max(np.abs(b1 - b2)) < 1e-12


def test_p_basis_bra_matches_fourier_convention():
    # <m|_P = (2pi)^{-1/2} Int e^{-imv} <v|_Q dv, checked on a coherent state
    alpha, m = 0.9 + 0.4j, 0.8
    c = coherent(alpha, 80)
    lhs = meas.quadrature_bra(m, np.pi / 2, 80) @ c.amplitudes
    xs = np.linspace(-12, 12, 4001)
    psi_q = (
        np.pi**-0.25
        * np.exp(
            -((xs - np.sqrt(2) * alpha.real) ** 2) / 2
            + 1j * np.sqrt(2) * alpha.imag * xs
            - 1j * alpha.real * alpha.imag
        )
    )
    ft = (xs[1] - xs[0]) / np.sqrt(2 * np.pi) * np.sum(np.exp(-1j * m * xs) * psi_q)
    assert abs(lhs - ft) < 1e-10


def test_homodyne_pdf_vacuum_variance():
    xs, pdf, captured = meas.homodyne_pdf(vacuum(40), 0, 0.0)
    dx = xs[1] - xs[0]
    assert captured > 0.999
    assert abs(np.sum(pdf) * dx - 1.0) < 1e-4
    var = np.sum(xs**2 * pdf) * dx
    assert abs(var - 0.5) < 1e-6


def test_homodyne_pdf_single_photon_node():
    xs, pdf, _ = meas.homodyne_pdf(fock_state(1, 30), 0, 0.0)
    assert pdf[np.argmin(np.abs(xs))] < 1e-4


def test_homodyne_pdf_squeezed_variance():
    xs, pdf, _ = meas.homodyne_pdf(squeezed_vacuum(0.7, 60), 0, 0.0)
    dx = xs[1] - xs[0]
    var = np.sum(xs**2 * pdf) * dx
    assert abs(var - np.exp(1.4) / 2.0) < 1e-4


def test_homodyne_grid_widens_then_errors():
    # a state beyond +-8 gets one automatic widening
    big = coherent(6.5, 150)  # Q center ~9.2
    xs, pdf, captured = meas.homodyne_pdf(big, 0, 0.0)
    assert captured > 0.999
    assert xs.max() > 8.0
    with pytest.raises(meas.GridTooSmallError):
        meas.homodyne_pdf(big, 0, 0.0, grid=(-2.0, 2.0, 128))


def test_sample_homodyne_deterministic_and_centered():
    state = vacuum(30)
    a = meas.sample_homodyne(state, 0, 0.0, np.random.default_rng(42))
    b = meas.sample_homodyne(state, 0, 0.0, np.random.default_rng(42))
    assert a.value == b.value
    rng = np.random.default_rng(1)
    vals = np.array([meas.sample_homodyne(state, 0, 0.0, rng).value for _ in range(10000)])
    assert abs(vals.mean()) < 3.0 * np.sqrt(0.5) / 100.0 * 3  # 3 sigma of the mean
    forced = meas.sample_homodyne(state, 0, 0.0, rng, forced=0.37)
    assert forced.value == 0.37 and forced.pdf_norm > 0


def test_sample_homodyne_ks_self_consistency():
    # cat fringes along P: empirical histogram matches the pdf (KS < 0.02)
    state = cat(1.5, 0.0, 0.0, 60)
    rng = np.random.default_rng(7)
    nsamp = 10000
    vals = np.sort([meas.sample_homodyne(state, 0, np.pi / 2, rng).value for _ in range(nsamp)])
    xs, pdf, _ = meas.homodyne_pdf(state, 0, np.pi / 2)
    dx = xs[1] - xs[0]
    cdf_model = np.cumsum(pdf) * dx
    cdf_model /= cdf_model[-1]
    model_at = np.interp(vals, xs, cdf_model)
    emp = np.arange(1, nsamp + 1) / nsamp
    ks = np.max(np.abs(model_at - emp))
    assert ks < 0.02


def test_project_homodyne_vacuum_prefactor():
    psi = squeezed_vacuum(0.4, 30)
    joint = tensor(vacuum(30), psi)
    out = meas.project_homodyne(joint, 0, (0.0, 0.0))
    assert np.max(np.abs(out.amplitudes - np.pi**-0.25 * psi.amplitudes)) < 1e-12


def test_project_homodyne_epr_conditioning():
    # two-mode squeezed proxy: projecting one mode in Q concentrates the
    # other near the measured value, sharper for larger r
    from phantm.gaussian import beamsplitter, quad_q
    from phantm.fock import MatrixOperator, apply

    cutoff = 70
    widths = []
    for r in (1.0, 2.0):
        joint = tensor(squeezed_vacuum(r, cutoff), squeezed_vacuum(-r, cutoff))
        tms = apply(MatrixOperator(beamsplitter(np.pi / 4, cutoff), 2, cutoff), joint)
        cond = meas.project_homodyne(tms, 0, (0.8, 0.0)).normalize()
        q = quad_q(cutoff)
        mean = float(np.real(np.vdot(cond.amplitudes, q @ cond.amplitudes)))
        var = float(np.real(np.vdot(cond.amplitudes, q @ q @ cond.amplitudes))) - mean**2
        widths.append(var)
        # this beamsplitter sign anti-correlates the Q quadratures
        assert abs(abs(mean) - 0.8) < 0.15
    assert widths[1] < widths[0]


def test_project_single_photon_node_zero_norm():
    joint = tensor(fock_state(1, 20), vacuum(20))
    out = meas.project_homodyne(joint, 0, (0.0, 0.0))
    assert out.norm() < 1e-12


def test_pnr_distribution_and_sampling():
    c = coherent(1.0, 40)
    probs = meas.pnr_distribution(c, 0)
    assert abs(probs[0] - np.exp(-1.0)) < 1e-10
    assert abs(probs.sum() - 1.0) < 1e-6
    assert meas.pnr_distribution(vacuum(10), 0)[0] == 1.0
    sq = squeezed_vacuum(0.7, 40)
    assert np.max(meas.pnr_distribution(sq, 0)[1::2]) < 1e-14
    out = meas.sample_pnr(c, 0, np.random.default_rng(0))
    assert 0 <= out.count < 40
    forced = meas.sample_pnr(c, 0, np.random.default_rng(0), forced=3)
    assert forced.count == 3


def test_projective_completeness_reconstructs_reduced_state():
    rng = np.random.default_rng(5)
    cutoff = 8
    vec = rng.normal(size=cutoff**2) + 1j * rng.normal(size=cutoff**2)
    psi = FockVector(vec / np.linalg.norm(vec), 2, cutoff)
    acc = np.zeros((cutoff, cutoff), dtype=complex)
    for n in range(cutoff):
        piece = meas.project_pnr(psi, 0, n)
        acc += np.outer(piece.amplitudes, piece.amplitudes.conj())
    red = partial_trace(psi.dm(), [1])
    assert np.max(np.abs(acc - red.matrix)) < 1e-12


def test_density_operator_paths():
    rho = cat(1.0, 0.0, 0.0, 40).dm()
    xs, pdf, captured = meas.homodyne_pdf(rho, 0, 0.0)
    assert captured > 0.999
    probs = meas.pnr_distribution(rho, 0)
    assert abs(probs.sum() - 1.0) < 1e-9
    joint = tensor(rho, vacuum(40).dm())
    out = meas.project_homodyne(joint, 1, (0.0, 0.0))
    assert isinstance(out, DensityOperator)
    assert out.modes == 1
