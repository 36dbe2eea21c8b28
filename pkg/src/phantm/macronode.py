"""Macronode-wire teleportation, the dictionary-protocol reduction, and
weighted-cat rebalancing statistics.

The two-homodyne gadget (balanced beamsplitters, angles θ₁, θ₂) applies
K = (1/π) A(ψ,φ) D(μ) V(θ₁,θ₂) with

    μ = (m₁ e^{iθ₂} + m₂ e^{iθ₁}) / sin(θ₂-θ₁),
    V  = R(θ₊ - π/2) S(ln tanθ₋) R(θ₊),          θ± = (θ₁ ± θ₂)/2,

and A reduces to the identity for ideal |0⟩_P, |0⟩_Q ancillas.  The
dictionary protocol reduces subtraction on the top wire to the canonical
case with an extra input squeeze/shift and the output Gaussian
G = R†(π/2) Z†(m₂ tanh(2r₀)/√2) S†(ln(tanh(2r₀)/√2)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import FockVector, MatrixOperator, tensor
from .gaussian import (
    beamsplitter,
    bs_beta,
    gaussian_q_envelope,
    q_eigensystem,
    rotation,
    shift_x,
    shift_z,
    squeeze,
)
from .measurement import (
    DEFAULT_GRID,
    _inverse_cdf_sample,
    project_homodyne,
    quadrature_bra_grid,
    sample_homodyne,
)
from .protocol import (
    StepRecord,
    _recenter,
    apply_cz,
    apply_two_mode,
    q_operator_from_values,
    subtraction_kraus,
    teleport_kraus,
)
from .states import squeezed_vacuum, weighted_cat


@dataclass(frozen=True)
class MacronodeConfig:
    theta1: float = 0.0
    theta2: float = np.pi / 2
    r0: float = 1.0  # per-physical-mode squeezing
    subtraction_wire: str = "top"  # or "middle"
    bs_theta: float | None = None
    forced_m1: float | None = None
    forced_m2: float | None = None
    grid: tuple = DEFAULT_GRID


@dataclass(frozen=True)
class WeightedCat:
    """(A X(α) ± B X†(α)) S(r)|0⟩ with A² + B² = 1."""

    a_coef: float
    b_coef: float
    alpha: float
    r: float = 0.0
    sign: int = 1

    def __post_init__(self):
        if abs(self.a_coef**2 + self.b_coef**2 - 1.0) > 1e-10:
            raise ValueError("weights must satisfy A² + B² = 1")

    def state(self, cutoff: int) -> FockVector:
        return weighted_cat(self.a_coef, self.b_coef, self.alpha, self.r, cutoff, self.sign)


def macronode_mu(m1: float, m2: float, theta1: float, theta2: float) -> complex:
    denom = np.sin(theta2 - theta1)
    if abs(denom) < 1e-12:
        raise ValueError("singular measurement bases: sin(θ₂-θ₁) = 0")
    return (m1 * np.exp(1j * theta2) + m2 * np.exp(1j * theta1)) / denom


def macronode_V(theta1: float, theta2: float, cutoff: int) -> MatrixOperator:
    """The basis-dependent Gaussian V(θ₁,θ₂) = R(θ₊-π/2) S(ln tanθ₋) R(θ₊).

    tanθ₋ enters by magnitude; its sign is a rotation convention fixed once
    against the gadget oracle (see the convention test).
    """
    tp = 0.5 * (theta1 + theta2)
    tm = 0.5 * (theta1 - theta2)
    t = np.tan(tm)
    if abs(t) < 1e-12:
        raise ValueError("singular θ₋: tan = 0")
    mat = (
        rotation(tp - np.pi / 2, cutoff)
        @ squeeze(float(np.log(abs(t))), cutoff)
        @ rotation(tp, cutoff)
    )
    return MatrixOperator(mat, 1, cutoff, f"V({theta1:.3g},{theta2:.3g})")


def epr_proxy_pair(r0: float, cutoff: int) -> FockVector:
    """Finite-squeezing stand-ins for the gadget ancillas |ψ⟩ ⊗ |φ⟩.

    |ψ⟩ ≈ |0⟩_P is S(r₀)|0⟩ and |φ⟩ ≈ |0⟩_Q is S(-r₀)|0⟩; the gadget's
    beamsplitter turns them into the two-mode-squeezed link.
    """
    return tensor(squeezed_vacuum(r0, cutoff), squeezed_vacuum(-r0, cutoff))


def macronode_teleport(
    state: FockVector,
    ancillas: FockVector,
    config: MacronodeConfig,
    rng=None,
):
    """Two-homodyne macronode gadget: B₂₃, B₁₂, then ⟨m₁|_{Pθ₁}, ⟨m₂|_{Pθ₂}.

    ``ancillas`` is the two-mode (ψ, φ) input; returns (output state,
    record).  P_θ bases map to quadrature angle θ + π/2.
    """
    if ancillas.modes != 2 or state.modes != 1:
        raise ValueError("need a single-mode input and a two-mode ancilla pair")
    cutoff = state.cutoff
    joint = tensor(state, ancillas)  # modes: 0 = in, 1 = psi, 2 = phi
    bmat = beamsplitter(-np.pi / 4, cutoff)  # macronode convention B(π/4)
    joint = apply_two_mode(bmat, joint, 1, 2)
    joint = apply_two_mode(bmat, joint, 0, 1)
    if config.forced_m1 is not None:
        m1 = float(config.forced_m1)
    else:
        m1 = sample_homodyne(joint, 0, config.theta1 + np.pi / 2, rng, config.grid).value
    joint = project_homodyne(joint, 0, (m1, config.theta1 + np.pi / 2))
    if config.forced_m2 is not None:
        m2 = float(config.forced_m2)
    else:
        m2 = sample_homodyne(joint, 0, config.theta2 + np.pi / 2, rng, config.grid).value
    out = project_homodyne(joint, 0, (m2, config.theta2 + np.pi / 2))
    record = {"m1": m1, "m2": m2, "mu": macronode_mu(m1, m2, config.theta1, config.theta2)}
    return out, record


# ---------------------------------------------------------------------------
# dictionary-protocol PhANTM on the macronode wire


def _dict_params(r0: float) -> tuple[float, float, float]:
    """(weight, r, r') of the weighted-CZ picture for physical squeezing r₀."""
    w = float(np.tanh(2.0 * r0))
    r_eff = float(np.log(np.sqrt(1.0 / np.cosh(2.0 * r0))))
    r_prime = float(np.log(w * np.sqrt(1.0 / np.cosh(2.0 * r0))))
    return w, r_eff, r_prime


def macronode_gaussian_G(m2: float, r0: float, cutoff: int) -> np.ndarray:
    """Output-side Gaussian of the dictionary reduction."""
    w = np.tanh(2.0 * r0)
    return (
        rotation(-np.pi / 2, cutoff)
        @ shift_z(m2 * w / np.sqrt(2.0), cutoff).conj().T
        @ squeeze(float(np.log(w / np.sqrt(2.0))), cutoff).conj().T
    )


def macronode_phantm_kraus(
    n: int,
    m1: float,
    m2: float,
    r0: float,
    bs_theta: float | None = None,
    cutoff: int = 40,
) -> MatrixOperator:
    """Single-mode Kraus of the macronode PhANTM step (dictionary reduction).

    Composed as G R(π/2) K_n^{canonical}(r'-ln√2) X†(m₂) S(½ln2)
    e^{-(Q-√2 m₂)²/2s²} with s = e^r = sech^{1/2}(2r₀); validated against the
    three-wire circuit.
    """
    from .gaussian import subtraction_reflectivity
    from .protocol import phantm_kraus

    w, r_eff, r_prime = _dict_params(r0)
    s = np.exp(r_eff)
    theta = subtraction_reflectivity(abs(r_prime)) if bs_theta is None else bs_theta
    k_can = phantm_kraus(n, m1, r_prime - 0.5 * np.log(2.0), theta, cutoff).matrix
    env_in = gaussian_q_envelope(s, cutoff, center=np.sqrt(2.0) * m2)
    pref = np.pi**-0.25 / np.sqrt(s)
    mat = (
        macronode_gaussian_G(m2, r0, cutoff)
        @ rotation(np.pi / 2, cutoff)
        @ k_can
        @ shift_x(m2, cutoff).conj().T
        @ squeeze(0.5 * np.log(2.0), cutoff)
        @ env_in
    ) * pref
    return MatrixOperator(mat, 1, cutoff, f"K_mac(n={n})")


def macronode_phantm_limit(n: int, m1: float, m2: float, r0: float, cutoff: int) -> MatrixOperator:
    """High-squeezing, weak-tap limit direction:
    R(π/2) S†(ln(tanh2r₀/√2)) Z†(m₁/√2) H_n(iQ - (m₁+im₂)/√2)."""
    from numpy.polynomial.hermite import hermval

    w = np.tanh(2.0 * r0)
    hc = np.zeros(n + 1)
    hc[n] = 1.0
    x, _ = q_eigensystem(cutoff)
    hmat = q_operator_from_values(hermval(1j * x - (m1 + 1j * m2) / np.sqrt(2.0), hc), cutoff)
    mat = (
        rotation(np.pi / 2, cutoff)
        @ squeeze(float(np.log(w / np.sqrt(2.0))), cutoff).conj().T
        @ shift_z(m1 / np.sqrt(2.0), cutoff).conj().T
        @ hmat
    )
    return MatrixOperator(mat, 1, cutoff, f"K_mac_limit(n={n})")


def macronode_phantm_circuit(
    state: FockVector,
    n: int,
    m1: float,
    m2: float,
    r0: float,
    bs_theta: float | None = None,
) -> FockVector:
    """Three-wire dictionary circuit oracle with forced outcomes.

    Wires: 1 = input (subtraction + ⟨m₁|_P), 2 = ⟨m₂|_Q, 3 = output.
    Prepared S(r)|0⟩ on 2 and 3, weighted CZ₂₃ (weight tanh2r₀), B₁₂(π/4),
    subtraction on wire 1, measurements, then R(π/2) on the output.
    """
    from .gaussian import subtraction_reflectivity

    cutoff = state.cutoff
    w, r_eff, r_prime = _dict_params(r0)
    theta = subtraction_reflectivity(abs(r_prime)) if bs_theta is None else bs_theta
    anc = squeezed_vacuum(r_eff, cutoff)
    joint = tensor(tensor(state, anc), anc)  # 0 = in, 1, 2
    joint = apply_cz(joint, 1, 2, weight=w)
    joint = apply_two_mode(beamsplitter(-np.pi / 4, cutoff), joint, 0, 1)
    sub = subtraction_kraus(n, bs_beta(theta), cutoff).matrix
    t = np.moveaxis(joint.tensor_view(), 0, 0)
    t = np.tensordot(sub, t, axes=(1, 0))
    joint = FockVector(t.reshape(-1), 3, cutoff)
    joint = project_homodyne(joint, 0, (m1, np.pi / 2))  # P basis on wire 1
    out = project_homodyne(joint, 0, (m2, 0.0))  # Q basis on wire 2
    vec = rotation(np.pi / 2, cutoff) @ out.amplitudes
    return FockVector(vec, 1, cutoff)


# ---------------------------------------------------------------------------
# weighted-cat m2 statistics and rebalancing


def weighted_cat_m2_pdf(cat: WeightedCat, s2: float, m2) -> np.ndarray:
    """Closed-form P(m₂): two Gaussians plus an interference term.

    ``s2 = e^{r₂}`` is the macronode physical-mode squeezing scale and
    ``s1 = e^{r}`` the input cat's; the density is normalized in m₂.
    """
    m2 = np.atleast_1d(np.asarray(m2, dtype=float))
    a_c, b_c, alpha = cat.a_coef, cat.b_coef, cat.alpha
    s1 = np.exp(cat.r)
    ss = s1 * s1 + s2 * s2
    coef = 1.0 / (
        np.sqrt(np.pi / 2.0) * np.sqrt(ss) * (1.0 + a_c * b_c * np.exp(-(alpha**2) / s1**2))
    )
    out = (
        a_c**2 * np.exp(-((alpha - np.sqrt(2.0) * m2) ** 2) / ss)
        + b_c**2 * np.exp(-((alpha + np.sqrt(2.0) * m2) ** 2) / ss)
        + 2.0 * a_c * b_c * np.exp(-(alpha**2) / s1**2 - 2.0 * m2**2 / ss)
    )
    return coef * out


def weighted_cat_q2_expectation(cat: WeightedCat, s1: float | None = None) -> float:
    """⟨Q₂⟩ = α(2A²-1) / (√2 (1 + AB e^{-α²/s₁²})); positive for A² > 1/2."""
    s1 = np.exp(cat.r) if s1 is None else s1
    a_c, b_c, alpha = cat.a_coef, cat.b_coef, cat.alpha
    return float(
        alpha * (2.0 * a_c**2 - 1.0)
        / (np.sqrt(2.0) * (1.0 + a_c * b_c * np.exp(-(alpha**2) / s1**2)))
    )


def sample_m2_circuit(state: FockVector, r2: float, rng, grid=DEFAULT_GRID, forced=None):
    """m₂ from the reduced two-mode circuit: B₁₂ on (ψ, S(r₂)|0⟩), Q on mode 2.

    Returns (value, (xs, pdf)); the pdf is the closed form's sampling oracle.
    """
    cutoff = state.cutoff
    joint = tensor(state.normalize(), squeezed_vacuum(r2, cutoff))
    joint = apply_two_mode(beamsplitter(-np.pi / 4, cutoff), joint, 0, 1)
    lo, hi, points = grid
    xs = np.linspace(lo, hi, int(points))
    amps = np.moveaxis(joint.tensor_view(), 1, 0).reshape(cutoff, -1)
    bras = quadrature_bra_grid(xs, 0.0, cutoff)
    pdf = np.sum(np.abs(bras @ amps) ** 2, axis=1)
    if forced is not None:
        return float(forced), (xs, pdf)
    value, _ = _inverse_cdf_sample(xs, pdf, float(rng.random()))
    return float(value), (xs, pdf)


def rebalance_step(
    cat: WeightedCat,
    config: MacronodeConfig,
    rng=None,
    cutoff: int = 50,
    fit_multistart: int = 8,
):
    """One macronode PhANTM round on a weighted cat; returns (fit, m2, state).

    m₁ defaults to 0 (forced) per the weighting analysis; m₂ is sampled from
    the reduced circuit unless forced; a single photon is subtracted.
    """
    from .analysis import fit

    state = cat.state(cutoff)
    _, _, r_prime = _dict_params(config.r0)
    m2, _pdf = sample_m2_circuit(state, config.r0, rng, config.grid, forced=config.forced_m2)
    m1 = 0.0 if config.forced_m1 is None else float(config.forced_m1)
    k_mat = macronode_phantm_kraus(1, m1, m2, config.r0, config.bs_theta, cutoff).matrix
    vec = k_mat @ state.amplitudes
    vec, _ = _recenter(vec, cutoff)
    out = FockVector(vec, 1, cutoff).normalize()
    res = fit(out, "weighted_cat", multistart=fit_multistart)
    return res, m2, out


def rebalance_trajectory(
    cat: WeightedCat,
    steps: int,
    config: MacronodeConfig,
    rng=None,
    cutoff: int = 50,
):
    """Iterate macronode PhANTM rounds, alternating the subtraction wire.

    The alternation is the built-in reorientation of the macronode protocol;
    in the reduced picture it is a π/2 pre-rotation of the input every other
    round.  Fit failures are flagged and the trajectory continues.
    """
    from .analysis import fit
    from .states import rotate

    results = [fit(cat.state(cutoff), "weighted_cat", multistart=8)]
    state = cat.state(cutoff)
    for k in range(steps):
        if k % 2 == 1:
            state = rotate(state, np.pi / 2)
        m2, _ = sample_m2_circuit(state, config.r0, rng, config.grid, forced=config.forced_m2)
        m1 = 0.0 if config.forced_m1 is None else float(config.forced_m1)
        k_mat = macronode_phantm_kraus(1, m1, m2, config.r0, config.bs_theta, cutoff).matrix
        vec = k_mat @ state.amplitudes
        vec, _ = _recenter(vec, cutoff)
        state = FockVector(vec, 1, cutoff).normalize()
        results.append(fit(state, "weighted_cat", multistart=8))
    return results
