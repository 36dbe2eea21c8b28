import numpy as np

from phantm import gaussian as g
from phantm.fock import fidelity, vacuum
from phantm.states import (
    cat,
    coherent,
    displaced_squeezed,
    displaced_squeezed_amplitudes,
    grid_product,
    parity_expectation,
    qunaught,
    rotate,
    squeezed_vacuum,
    weighted_cat,
)


def test_displaced_squeezed_matches_matrix_route():
    cutoff = 60
    for alpha, r in [(0.7 - 0.3j, 0.5), (1.2, -0.4), (0.0, 0.9), (0.4j, 0.0)]:
        via_expm = g.displacement(alpha, cutoff) @ g.squeeze(r, cutoff) @ vacuum(cutoff).amplitudes
        via_rec = displaced_squeezed_amplitudes(alpha, r, cutoff)
        # compare away from the cutoff boundary (the expm route truncates)
        assert np.max(np.abs(via_expm[:30] - via_rec[:30])) < 1e-9


def test_squeezed_vacuum_variance_and_parity():
    sv = squeezed_vacuum(0.7, 60)
    q = g.quad_q(60)
    var = float(np.real(np.vdot(sv.amplitudes, q @ q @ sv.amplitudes)))
    assert abs(var - np.exp(1.4) / 2.0) < 1e-9
    # squeezed vacuum has even parity: no odd Fock support
    assert np.max(np.abs(sv.amplitudes[1::2])) < 1e-14
    assert abs(parity_expectation(sv) - 1.0) < 1e-12


def test_coherent_poisson():
    c = coherent(1.0, 50)
    probs = np.abs(c.amplitudes) ** 2
    assert abs(probs[0] - np.exp(-1.0)) < 1e-12
    assert abs(probs.sum() - 1.0) < 1e-12


def test_cat_parity_and_orientation():
    even = cat(1.5, 0.0, 0.0, 60)
    odd = cat(1.5, np.pi, 0.0, 60)
    assert parity_expectation(even) > 0.999
    assert parity_expectation(odd) < -0.999
    q = g.quad_q(60)
    var_q = float(np.real(np.vdot(even.amplitudes, q @ q @ even.amplitudes)))
    rot_cat = cat(1.5, 0.0, 0.0, 60, axis=np.pi / 2)
    var_q_rot = float(np.real(np.vdot(rot_cat.amplitudes, q @ q @ rot_cat.amplitudes)))
    assert var_q > 4.0 and var_q_rot < 1.0  # lobes moved from Q to P


def test_weighted_cat_normalization():
    wc = weighted_cat(np.sqrt(0.8), np.sqrt(0.2), 4.0, 0.0, 60)
    assert abs(wc.norm() - 1.0) < 1e-12
    q = g.quad_q(60)
    mean_q = float(np.real(np.vdot(wc.amplitudes, q @ wc.amplitudes)))
    assert mean_q > 1.0  # weighted toward the positive lobe


def test_rotate_is_fourier():
    st = cat(1.0, 0.3, 0.2, 40)
    four = rotate(rotate(rotate(rotate(st, np.pi / 2), np.pi / 2), np.pi / 2), np.pi / 2)
    assert fidelity(four, st) > 1.0 - 1e-12


def test_grid_product_peaks():
    gp = grid_product(2.0, [0.0, 0.0], 0.5, 70)
    # two cat factors -> P-comb with peaks at -2alpha..2alpha
    from phantm.measurement import homodyne_pdf

    from phantm.breeding import find_marginal_peaks

    peaks = find_marginal_peaks(gp, np.pi / 2)
    # (Z(a)+Z(-a))^2 has P-peaks at -2a, 0, +2a
    assert len(peaks) == 3
    assert np.max(np.abs(np.sort(peaks) - np.array([-4.0, 0.0, 4.0]))) < 0.05


def test_qunaught_marginal_peaks_and_selfdual():
    qn = qunaught(0.4, 90)
    from phantm.measurement import homodyne_pdf

    from phantm.breeding import find_marginal_peaks

    spacing = np.sqrt(2.0 * np.pi)
    for theta in (0.0, np.pi / 2):
        peaks = find_marginal_peaks(qn, 0.0 + theta)
        gaps = np.diff(peaks)
        assert len(peaks) >= 3
        assert np.max(np.abs(gaps - spacing)) < 0.25
