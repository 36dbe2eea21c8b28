"""Cat-state breeding through CZ teleportation: enlargement, grid synthesis,
shear-based squeezing, phase-estimation operators, and the BS↔CZ map.

Teleporting |ψ⟩ through an arbitrary ancilla |ψ'⟩ filters the momentum
wavefunction with the ancilla's position wavefunction,

    |out⟩ = √(2π) X(m) R(π/2) ψ'_Q(m - P̂) |ψ⟩,
    ψ_P(x) -> ψ_P(x) ψ'_Q(m - x),

so peak-aligned cats breed into larger cats and fringe-aligned cats breed
into grid states (peak counts add as N + M - 1).  Breeding two grid-family
states composes envelope squeezings as r'' = r + r' - ln(e^{2r} + e^{2r'})/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import FockVector, MatrixOperator, NormalizationError, tensor
from .gaussian import (
    beamsplitter,
    q_eigensystem,
    quadratic_phase,
    rotation,
    shift_x,
    shift_z,
    squeeze,
)
from .measurement import (
    DEFAULT_GRID,
    homodyne_pdf,
    project_homodyne,
    quadrature_bra,
    sample_homodyne,
)
from .protocol import (
    _recenter,
    apply_cz,
    apply_two_mode,
    plain_kraus,
    q_operator_from_values,
    teleport_kraus,
)
from .states import cat, qunaught, rotate, squeezed_vacuum


@dataclass
class GridState:
    """Diagnostics of a grid-family state: peak spacing, per-peak width,
    fitted fidelity, and the marginal peak positions found."""

    spacing: float
    delta: float
    fidelity: float
    peaks: np.ndarray
    offset: str = "centered"  # or "half-shifted"


def teleport_through(ancilla: FockVector, state: FockVector, m: float) -> FockVector:
    """One CZ teleportation of ``state`` through ``ancilla`` at outcome m.

    Exact two-mode contraction; the result is unnormalized (norm² equals the
    outcome density).
    """
    if ancilla.modes != 1 or state.modes != 1 or ancilla.cutoff != state.cutoff:
        raise ValueError("teleport_through needs single-mode states on one cutoff")
    cutoff = state.cutoff
    bra = quadrature_bra(m, np.pi / 2, cutoff).conj()  # ket components of |m>_P
    k_mat = teleport_kraus(bra, ancilla.amplitudes, cutoff)
    out = k_mat @ state.amplitudes
    if np.linalg.norm(out) < 1e-14:
        raise NormalizationError("measure-zero breeding outcome")
    return FockVector(out, 1, cutoff)


def breed_round(
    a: FockVector,
    b: FockVector,
    orientation: str,
    m: float = 0.0,
    undo_displacement: bool = True,
):
    """Breed cat ``a`` (input) through cat ``b`` (ancilla).

    ``orientation='enlarge'`` peak-aligns the pair (input Fourier-rotated);
    ``'grid'`` fringe-aligns both.  Inputs are expected as Q-lobed cats.
    Returns (output, diagnostics) where diagnostics hold the expected
    envelope recursion r'' for Gaussian inputs and the marginal peaks.
    """
    if orientation == "enlarge":
        ain = rotate(a, np.pi / 2)
        anc = b
    elif orientation == "grid":
        ain = rotate(a, np.pi)
        anc = rotate(b, np.pi / 2)
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    out = teleport_through(anc, ain, m)
    vec = out.amplitudes
    if undo_displacement:
        vec, _ = _recenter(vec, out.cutoff)
    out = FockVector(vec, 1, out.cutoff).normalize()
    peaks_q = find_marginal_peaks(out, 0.0)
    peaks_p = find_marginal_peaks(out, np.pi / 2)
    return out, {"peaks_q": peaks_q, "peaks_p": peaks_p}


def squeezing_recursion(r: float, r_prime: float) -> float:
    """Envelope squeezing after one breed: r'' = r + r' - ln(e^{2r}+e^{2r'})/2."""
    return float(r + r_prime - 0.5 * np.log(np.exp(2.0 * r) + np.exp(2.0 * r_prime)))


def find_marginal_peaks(state: FockVector, theta: float, grid=DEFAULT_GRID) -> np.ndarray:
    """Local maxima of the θ-quadrature marginal above 5% of the global max.

    One-sided >= tolerates the two-point plateaus that symmetric states
    produce at the origin of an even grid.
    """
    xs, pdf, _ = homodyne_pdf(state.normalize(), 0, theta, grid)
    level = 0.05 * pdf.max()
    idx = np.where((pdf[1:-1] >= pdf[:-2]) & (pdf[1:-1] > pdf[2:]) & (pdf[1:-1] > level))[0] + 1
    return xs[idx]


# ---------------------------------------------------------------------------
# measurement-based squeezing via three shears


def shear_gamma_values(target_r: float) -> tuple[float, float, float]:
    """γ values of the three shear gates composing S(r): (s, 1/s, s), s = e^r."""
    s = float(np.exp(target_r))
    return (s, 1.0 / s, s)


def shear_squeeze(
    state: FockVector,
    target_r: float,
    r_cluster: float,
    rng=None,
    forced_ms=None,
    noiseless: bool = False,
):
    """Apply S(target_r) by three cluster teleportations in sheared bases.

    Each step applies e^{iγQ²/2} then a teleportation (with its Gaussian
    envelope unless ``noiseless``); displacements are undone by recentring.
    The achievable squeezing is bounded by the cluster: |target_r| must not
    exceed r_cluster.
    """
    if abs(target_r) > r_cluster:
        raise ValueError(
            f"target squeezing {target_r:+.3f} beyond the cluster capability ±{r_cluster:.3f}"
        )
    cutoff = state.cutoff
    gammas = shear_gamma_values(target_r)
    vec = state.normalize().amplitudes
    rot = rotation(np.pi / 2, cutoff)
    for k, gamma in enumerate(gammas):
        vec = quadratic_phase(gamma, cutoff) @ vec
        if noiseless:
            vec = rot @ vec
        else:
            if forced_ms is not None:
                m = float(forced_ms[k])
            else:
                st = FockVector(vec, 1, cutoff).normalize()
                m = sample_homodyne(st, 0, np.pi / 2, rng).value if rng is not None else 0.0
            vec = plain_kraus(m, r_cluster, cutoff).matrix @ vec
            vec = shift_x(-m, cutoff) @ vec
        vec, _ = _recenter(vec, cutoff)
    return FockVector(vec, 1, cutoff).normalize()


def shear_symplectic(target_r: float) -> np.ndarray:
    """2x2 symplectic product F P(γ₃) F P(γ₂) F P(γ₁) (oracle: equals diag(s, 1/s))."""
    f_mat = np.array([[0.0, -1.0], [1.0, 0.0]])
    total = np.eye(2)
    for gamma in shear_gamma_values(target_r):
        total = f_mat @ np.array([[1.0, 0.0], [gamma, 1.0]]) @ total
    return total


# ---------------------------------------------------------------------------
# qunaught synthesis


QUNAUGHT_SPACING = float(np.sqrt(2.0 * np.pi))


def qunaught_pipeline(
    cat_alpha: float,
    cat_r: float,
    r_cluster: float,
    cutoff: int,
    rng=None,
    post_select_m: float | None = 0.0,
    fit_multistart: int = 6,
):
    """Shear-squeeze a cat pair to the self-dual lattice and breed a qunaught.

    Fringe-aligned breeding of cats with displacement α yields Q-peaks at
    spacing π/(√2α) and P-peaks at 2√2α; both equal √(2π) iff
    α = √π/2, which fixes the shear target ln(√π/(2α)).  Returns
    (state, FitResult) with the fitted Δ, spacing, and s_GKP.
    """
    from .analysis import fit

    if cat_alpha <= 0:
        raise ValueError("need a nonzero cat amplitude")
    base = cat(cat_alpha, 0.0, cat_r, cutoff)
    target = float(np.log(np.sqrt(np.pi) / 2.0 / cat_alpha))
    sheared = shear_squeeze(base, target, r_cluster, rng)
    if post_select_m is None:
        m = sample_homodyne(sheared, 0, np.pi / 2, rng).value if rng is not None else 0.0
    else:
        m = float(post_select_m)
    bred, diag = breed_round(sheared, sheared, "grid", m)
    res = fit(bred, "qunaught", multistart=fit_multistart)
    if res.fidelity < 0.5 or len(diag["peaks_q"]) < 2:
        res = type(res)(res.family, res.params, res.fidelity, False)
    return bred, res


# ---------------------------------------------------------------------------
# phase estimation


def phase_estimation_operator(
    alpha: float,
    outcome,
    variant: str,
    cutoff: int,
    r: float = 2.5,
    phase: float = 0.0,
) -> MatrixOperator:
    """Single-round phase-estimation operator for displacement e^{iαP}.

    ``variant='qubit_round'``: M± = e^{i(αP+φ)/2} {cos, i·sin}((αP+φ)/2) with
    ``outcome`` +1/-1.  ``variant='cluster_round'``: the teleport through a
    fringe-aligned cat of fringe frequency α at homodyne result ``outcome``,
    √(2π) X(m) R(π/2) w(m - P̂) with w the normalized Gaussian-cosine
    wavefunction of envelope e^r.
    """
    from .gaussian import p_function

    if variant == "qubit_round":
        sign = 1 if outcome in (1, "+", "plus") else -1

        def func(p):
            arg = 0.5 * (alpha * p + phase)
            base = np.exp(1j * arg)
            return base * (np.cos(arg) if sign > 0 else 1j * np.sin(arg))

        mat = p_function(func, cutoff)
        return MatrixOperator(mat, 1, cutoff, f"M{'+' if sign > 0 else '-'}")
    if variant == "cluster_round":
        m = float(outcome)
        s = np.exp(r)
        norm = np.pi**-0.25 * s**-0.5 / np.sqrt(2.0 * (1.0 + np.exp(-(s**2) * alpha**2)))

        def wfunc(p):
            x = m - p
            return 2.0 * norm * np.cos(alpha * x) * np.exp(-(x**2) / (2.0 * s * s))

        mat = np.sqrt(2.0 * np.pi) * shift_x(m, cutoff) @ rotation(np.pi / 2, cutoff) @ p_function(
            wfunc, cutoff
        )
        return MatrixOperator(mat, 1, cutoff, f"M_m(m={m:.3g})")
    raise ValueError(f"unknown variant {variant!r}")


def fringe_cat(alpha: float, r: float, cutoff: int) -> FockVector:
    """Normalized (Z(α) + Z†(α)) S(r)|0⟩: Gaussian-times-cosine Q wavefunction."""
    amps = (shift_z(alpha, cutoff) + shift_z(-alpha, cutoff)) @ squeezed_vacuum(r, cutoff).amplitudes
    return FockVector(amps, 1, cutoff).normalize()


# ---------------------------------------------------------------------------
# beamsplitter <-> CZ breeding equivalence


def bs_cz_equivalence_check(psi: FockVector, phi: FockVector, m: float, cutoff: int) -> float:
    """Max deviation between beamsplitter breeding and the CZ-reduced form.

    LHS: ⟨m|_P,2 B₁₂(π/4) (ψ ⊗ φ), macronode beamsplitter convention.
    RHS: Z†(m) S†(½ln2) R(π/2) × [⟨√2 m|_P,2 CZ (R†(π/2)ψ ⊗ φ)].
    (The √2 on the measured value and the R† pre-rotation are the convention
    fixed numerically against the circuit; the derivation's bra-side scaling
    reads in the opposite direction.)
    """
    joint = tensor(psi.normalize(), phi.normalize())
    joint = apply_two_mode(beamsplitter(-np.pi / 4, cutoff), joint, 0, 1)
    lhs = project_homodyne(joint, 1, (m, np.pi / 2)).amplitudes

    pre = FockVector(rotation(-np.pi / 2, cutoff) @ psi.normalize().amplitudes, 1, cutoff)
    joint2 = apply_cz(tensor(pre, phi.normalize()), 0, 1)
    inner = project_homodyne(joint2, 1, (m * np.sqrt(2.0), np.pi / 2)).amplitudes
    rhs = (
        shift_z(-m, cutoff)
        @ squeeze(-0.5 * np.log(2.0), cutoff)
        @ rotation(np.pi / 2, cutoff)
        @ inner
    )
    # overall phase and the √2 measure factor are conventions; compare
    # normalized directions scaled by matched norms
    nl, nr = np.linalg.norm(lhs), np.linalg.norm(rhs)
    if nl < 1e-14 or nr < 1e-14:
        return float(max(nl, nr))
    phase = np.vdot(rhs, lhs)
    phase /= abs(phase)
    return float(np.max(np.abs(lhs / nl - phase * rhs / nr)))
