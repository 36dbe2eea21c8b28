"""Photon-subtraction-assisted node teleportation: Kraus forms and step engines.

The subtraction gadget (beamsplitter of angle θ to vacuum + PNR result n)
applies

    S_n = ((-1)^n e^{nβ/2} / √n!) (2 sinhβ)^{n/2} a^n N(β),      β = -ln cosθ,

and a homodyne result m after it contracts to a filter in Q alone,
⟨m|_P S_n = ⟨0|_P f_n(Q), with the closed form (t = cosθ, r = sinθ,
σ = 2t/(1+t²)) obtained by Gaussian integration of the oscillator overlap:

    f_n(x) = √(2/(1+t²)) (2^n n!)^{-1/2} (r²/(1+t²))^{n/2} H_n(-(x+imt)/√(1+t²))
             × exp(-imσx - r²x²/(2(1+t²)) - m²r²/(2(1+t²))).

Teleporting through an ancilla S(r')|0⟩ then yields the step Kraus operator

    K_n = π^{-1/4} s^{-1/2} e^{-Q²/2s²} R(π/2) f_n(Q),        s = e^{r'},

whose displacement part X(mσ) is undone by feed-forward after every step.
The constant is pinned to the exact circuit contraction so that ‖Kψ‖² is the
joint outcome density: Σ_n ∫dm ‖K_{n,m}ψ‖² = 1 for normalized inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.polynomial.hermite import hermval
from scipy.special import comb

from .fock import DensityOperator, FockVector, MatrixOperator, apply, tensor, vacuum
from .gaussian import (
    annihilation,
    bs_beta,
    beamsplitter,
    damp,
    displacement,
    gaussian_q_envelope,
    p_function,
    q_eigensystem,
    quad_p,
    quad_q,
    rotation,
    shift_x,
    subtraction_reflectivity,
)
from .measurement import (
    DEFAULT_GRID,
    HomodyneOutcome,
    PnrOutcome,
    _inverse_cdf_sample,
    project_homodyne,
    project_pnr,
    quadrature_bra,
    quadrature_bra_grid,
    sample_homodyne,
    sample_pnr,
)
from .states import squeezed_vacuum

PNR_CEILING = 6


# ---------------------------------------------------------------------------
# configuration and records


@dataclass(frozen=True)
class LossSpec:
    """Loss channel of efficiency eta truncated at ``kraus_truncation`` terms."""

    eta: float
    kraus_truncation: int = 8

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError("efficiency must be in (0, 1]")


@dataclass(frozen=True)
class PhantmStepConfig:
    """One teleportation step along the cluster wire.

    ``bs_theta`` defaults to the noise-matched angle cos²θ = tanh(r_cluster).
    ``loss`` maps location codes to LossSpec: 'A' before PNR detection,
    'B' before homodyne detection, 'C' on the fresh ancilla after squeezing.
    ``displacement_error`` shifts the PNR projector to D(Δα)|n⟩.
    """

    r_cluster: float
    bs_theta: float | None = None
    mode: str = "subtract_teleport"  # or "plain_teleport"
    forced_n: int | None = None
    forced_m: float | None = None
    loss: dict | None = None
    displacement_error: complex | None = None
    engine: str = "kraus"  # "kraus" | "circuit" | "ideal"
    m_model: str = "circuit"  # "circuit" (exact conditional) | "realigned"
    pnr_max: int = PNR_CEILING
    grid: tuple = DEFAULT_GRID

    def theta(self) -> float:
        if self.bs_theta is not None:
            return self.bs_theta
        return subtraction_reflectivity(self.r_cluster)


@dataclass
class StepRecord:
    step: int
    kind: str
    n: int | None
    m: float | None
    feedforward: complex  # D(feedforward) applied after the step (X/Z undo)
    pnr_folded: bool = False


@dataclass
class MeasurementRecord:
    """Ordered log of per-step outcomes."""

    entries: list = field(default_factory=list)

    def add(self, entry: StepRecord) -> None:
        self.entries.append(entry)

    def total_photons(self) -> int:
        return sum(e.n for e in self.entries if e.n is not None)


# ---------------------------------------------------------------------------
# subtraction Kraus operators and the Q filter


def subtraction_kraus(n: int, beta: float, cutoff: int) -> MatrixOperator:
    """S_n for n-photon subtraction at damping β = -ln t (main-text ordering)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if n < 0:
        raise ValueError("n must be nonnegative")
    a = annihilation(cutoff)
    mat = np.array(damp(beta, cutoff))
    for _ in range(n):
        mat = a @ mat
    coef = (-1.0) ** n * np.exp(0.5 * n * beta) * (2.0 * np.sinh(beta)) ** (n / 2.0)
    coef /= np.sqrt(float(factorial(n)))
    return MatrixOperator(coef * mat, 1, cutoff, f"S_{n}(beta={beta:.4g})")


def subtraction_filter(x, n: int, m: float, theta: float) -> np.ndarray:
    """f_n(x): the in-Q filter equivalent to subtraction + homodyne result m."""
    x = np.asarray(x, dtype=np.complex128)
    t, r = np.cos(theta), np.sin(theta)
    opt2 = 1.0 + t * t
    sigma = 2.0 * t / opt2
    herm_coef = np.zeros(n + 1)
    herm_coef[n] = 1.0
    poly = hermval(-(x + 1j * m * t) / np.sqrt(opt2), herm_coef)
    pref = np.sqrt(2.0 / opt2) / np.sqrt(2.0**n * factorial(n)) * (r * r / opt2) ** (n / 2.0)
    envelope = np.exp(
        -1j * m * sigma * x - (r * r) * x * x / (2.0 * opt2) - (m * m * r * r) / (2.0 * opt2)
    )
    return pref * poly * envelope


def q_operator_from_values(values, cutoff: int) -> np.ndarray:
    """Operator g(Q) from the values of g on the Q eigenvalue grid."""
    x, v = q_eigensystem(cutoff)
    return (v * np.asarray(values, dtype=np.complex128)) @ v.conj().T


def phantm_kraus(
    n: int,
    m: float,
    r_cluster: float,
    bs_theta: float | None = None,
    cutoff: int = 40,
    form: str = "envelope",
) -> MatrixOperator:
    """Single-step Kraus operator K_n for PNR result n and homodyne result m.

    ``form='envelope'`` builds π^{1/4}√(2/s) e^{-Q²/2s²} R(π/2) f_n(Q); the
    ``'decomposed'`` form extracts the feed-forward displacement explicitly,
    X(mσ) R(π/2) e^{-(P-mσ)²/2s²} e^{-Q² r²/(2(1+t²))} f'_n(Q).  Both agree
    to machine precision on the guard subspace.
    """
    theta = subtraction_reflectivity(r_cluster) if bs_theta is None else bs_theta
    s = np.exp(r_cluster)
    const = np.pi**-0.25 / np.sqrt(s)
    x, _ = q_eigensystem(cutoff)
    if form == "envelope":
        fmat = q_operator_from_values(subtraction_filter(x, n, m, theta), cutoff)
        mat = const * gaussian_q_envelope(s, cutoff) @ rotation(np.pi / 2, cutoff) @ fmat
    elif form == "decomposed":
        t, r = np.cos(theta), np.sin(theta)
        opt2 = 1.0 + t * t
        sigma = 2.0 * t / opt2
        # strip the displacement phase and the quadratic envelope from f_n
        fprime = subtraction_filter(x, n, m, theta) * np.exp(
            1j * m * sigma * x + (r * r) * x * x / (2.0 * opt2) + (m * m * r * r) / (2.0 * opt2)
        )
        scalar = const * np.exp(-(m * m * r * r) / (2.0 * opt2))
        envp = p_function(lambda p: np.exp(-((p - m * sigma) ** 2) / (2.0 * s * s)), cutoff)
        envq = q_operator_from_values(np.exp(-(r * r) * x * x / (2.0 * opt2)), cutoff)
        mat = (
            scalar
            * shift_x(m * sigma, cutoff)
            @ rotation(np.pi / 2, cutoff)
            @ envp
            @ envq
            @ q_operator_from_values(fprime, cutoff)
        )
    else:
        raise ValueError(f"unknown form {form!r}")
    return MatrixOperator(mat, 1, cutoff, f"K(n={n}, m={m:.4g})")


def plain_kraus(m: float, r_cluster: float, cutoff: int) -> MatrixOperator:
    """Teleportation without subtraction: π^{-1/4} s^{-1/2} e^{-Q²/2s²} X(m) R(π/2)."""
    s = np.exp(r_cluster)
    const = np.pi**-0.25 / np.sqrt(s)
    mat = const * gaussian_q_envelope(s, cutoff) @ shift_x(m, cutoff) @ rotation(np.pi / 2, cutoff)
    return MatrixOperator(mat, 1, cutoff, f"K_plain(m={m:.4g})")


def phantm_limit_kraus(n: int, m: float, cutoff: int) -> MatrixOperator:
    """Weak-reflectivity, high-squeezing limit direction of K_n (unnormalized):

        K_n ∝ X(m) R(π/2) H_n(-(Q + im)/√2).

    This is the r→0, t→1, s→∞ limit of the closed-form filter; the full K_n
    converges to it in operator direction.
    """
    hc = np.zeros(n + 1)
    hc[n] = 1.0
    x, _ = q_eigensystem(cutoff)
    hmat = q_operator_from_values(hermval(-(x + 1j * m) / np.sqrt(2.0), hc), cutoff)
    mat = shift_x(m, cutoff) @ rotation(np.pi / 2, cutoff) @ hmat
    return MatrixOperator(mat, 1, cutoff, f"K_limit(n={n}, m={m:.4g})")


def ideal_kraus(n: int, m: float, cutoff: int) -> MatrixOperator:
    """Infinite-squeezing, vanishing-reflectivity limit:
    X(m) R(π/2) 2^{-n/2} Σ_k C(n,k) (-iP+im)^k (Q+iP)^{n-k}.

    At m = 0 this reduces to R(π/2) H_n(Q/√2) / 2^n.
    """
    a = annihilation(cutoff)
    adag = a.conj().T
    qp = np.sqrt(2.0) * a  # Q + iP = √2 a
    p = 1j * (adag - a) / np.sqrt(2.0)
    eye = np.eye(cutoff, dtype=np.complex128)
    acc = np.zeros((cutoff, cutoff), dtype=np.complex128)
    left = eye.copy()
    for k in range(n + 1):
        acc += comb(n, k) * left @ np.linalg.matrix_power(qp, n - k)
        left = left @ (-1j * p + 1j * m * eye)
    mat = shift_x(m, cutoff) @ rotation(np.pi / 2, cutoff) @ (acc / np.sqrt(2.0**n))
    return MatrixOperator(mat, 1, cutoff, f"K_ideal(n={n}, m={m:.4g})")


# ---------------------------------------------------------------------------
# teleportation contraction engine (exact CZ circuit, one output mode)


def teleport_kraus(bra_vec: np.ndarray, ancilla_vec: np.ndarray, cutoff: int) -> np.ndarray:
    """Single-mode Kraus K = ⟨w|₁ CZ₁₂ ( · ⊗ |χ⟩₂ ), via the Q eigenbasis.

    ``bra_vec`` holds the ket components w of the measured wire's projector
    (the operator contracts with ⟨w|); ``ancilla_vec`` is the fresh node.
    """
    x, v = q_eigensystem(cutoff)
    w_t = (v.conj().T @ np.asarray(bra_vec, dtype=np.complex128)).conj()
    chi_t = v.conj().T @ np.asarray(ancilla_vec, dtype=np.complex128)
    core = (np.exp(1j * np.outer(x, x)).T * w_t[None, :]) @ v.conj().T  # [b, i]
    return v @ (chi_t[:, None] * core)


def apply_cz(state: FockVector, mode_a: int, mode_b: int, weight: float = 1.0) -> FockVector:
    """e^{iw Q_a Q_b} applied via the Q eigenbasis (pure states, any arity)."""
    n = state.cutoff
    x, v = q_eigensystem(n)
    t = np.moveaxis(state.tensor_view(), (mode_a, mode_b), (0, 1))
    shape = t.shape
    flat = t.reshape(n, n, -1)
    flat = np.einsum("ai,bj,ijk->abk", v.conj().T, v.conj().T, flat)
    flat *= np.exp(1j * weight * np.outer(x, x))[:, :, None]
    flat = np.einsum("ia,jb,abk->ijk", v, v, flat)
    t = np.moveaxis(flat.reshape(shape), (0, 1), (mode_a, mode_b))
    return FockVector(t.reshape(-1), state.modes, n)


def apply_two_mode(op_matrix: np.ndarray, state: FockVector, mode_a: int, mode_b: int) -> FockVector:
    """Dense two-mode operator applied to the given mode pair of a pure state."""
    n = state.cutoff
    t = np.moveaxis(state.tensor_view(), (mode_a, mode_b), (0, 1))
    rest = t.shape[2:]
    out = op_matrix @ t.reshape(n * n, -1)
    out = np.moveaxis(out.reshape((n, n) + rest), (0, 1), (mode_a, mode_b))
    return FockVector(out.reshape(-1), state.modes, n)


def apply_single_mode(op_matrix: np.ndarray, state: FockVector, mode: int) -> FockVector:
    n = state.cutoff
    t = np.moveaxis(state.tensor_view(), mode, 0)
    rest = t.shape[1:]
    out = op_matrix @ t.reshape(n, -1)
    out = np.moveaxis(out.reshape((n,) + rest), 0, mode)
    return FockVector(out.reshape(-1), state.modes, n)


# ---------------------------------------------------------------------------
# loss channel


def loss_kraus(eta: float, l: int, cutoff: int) -> MatrixOperator:
    """L_l = √((1-η)^l / (l! η^l)) a^l e^{(a†a/2) lnη}."""
    if not (0.0 < eta <= 1.0):
        raise ValueError("efficiency must be in (0, 1]")
    a = annihilation(cutoff)
    mat = np.diag(np.exp(0.5 * np.arange(cutoff) * np.log(eta)) + 0j)
    for _ in range(l):
        mat = a @ mat
    coef = np.sqrt((1.0 - eta) ** l / (factorial(l) * eta**l)) if eta < 1.0 else (1.0 if l == 0 else 0.0)
    return MatrixOperator(coef * mat, 1, cutoff, f"L_{l}(eta={eta})")


def loss_kraus_list(spec: LossSpec, cutoff: int) -> list[np.ndarray]:
    if spec.eta == 1.0:
        return [np.eye(cutoff, dtype=np.complex128)]
    return [loss_kraus(spec.eta, l, cutoff).matrix for l in range(spec.kraus_truncation + 1)]


def loss_completeness_defect(spec: LossSpec, cutoff: int, guard_fraction: float = 0.5) -> float:
    """max |Σ L†L - I| on the guarded diagonal block."""
    acc = np.zeros((cutoff, cutoff), dtype=np.complex128)
    for mat in loss_kraus_list(spec, cutoff):
        acc += mat.conj().T @ mat
    gd = int(np.floor(guard_fraction * cutoff))
    dev = acc - np.eye(cutoff)
    return float(np.max(np.abs(dev[:gd, :gd])))


def apply_loss(state, spec: LossSpec) -> DensityOperator:
    """Σ_l L_l ρ L_l† on a single-mode state; completeness checked on guard."""
    rho = state.dm() if isinstance(state, FockVector) else state
    if rho.modes != 1:
        raise ValueError("apply_loss acts on single-mode states")
    defect = loss_completeness_defect(spec, rho.cutoff)
    if defect > 1e-6:
        raise ValueError(
            f"loss Kraus truncation {spec.kraus_truncation} incomplete (defect {defect:.2e}); "
            "raise kraus_truncation"
        )
    acc = np.zeros_like(rho.matrix)
    for mat in loss_kraus_list(spec, rho.cutoff):
        acc += mat @ rho.matrix @ mat.conj().T
    return DensityOperator(acc, 1, rho.cutoff)


def displacement_error_projector(n: int, dalpha: complex, cutoff: int) -> np.ndarray:
    """Ket components of D(Δα)|n⟩; the PNR projection contracts its conjugate.

    The full displaced Fock state, not the first-order expansion (which is a
    small-Δα test oracle only).
    """
    if abs(dalpha) > 0.5:
        raise ValueError("displacement error beyond the small-error regime (|Δα| <= 0.5)")
    return displacement(complex(dalpha), cutoff)[:, n].copy()


# ---------------------------------------------------------------------------
# effective measured-wire projector kets and step Kraus assembly


def _pnr_ket(n: int, dalpha, cutoff: int) -> np.ndarray:
    if dalpha:
        return displacement_error_projector(n, dalpha, cutoff)
    ket = np.zeros(cutoff, dtype=np.complex128)
    ket[n] = 1.0
    return ket


def _subtraction_ops(config: PhantmStepConfig, n: int, cutoff: int) -> list[np.ndarray]:
    """Wire operators ⟨pnr_ket| (loss_A) B_θ |0⟩, one per A-loss Kraus index.

    Without loss this is S_n (possibly with a displaced-Fock projector); each
    A-loss term contracts to a linear combination of the analytic S_k.
    """
    theta = config.theta()
    beta = bs_beta(theta)
    pnr = _pnr_ket(n, config.displacement_error, cutoff)
    loss_a = (config.loss or {}).get("A")
    if loss_a is None:
        effective = [pnr]
    else:
        effective = [mat.conj().T @ pnr for mat in loss_kraus_list(loss_a, cutoff)]
    s_ops = {}
    out = []
    for ket in effective:
        support = np.nonzero(np.abs(ket) > 1e-14)[0]
        acc = np.zeros((cutoff, cutoff), dtype=np.complex128)
        for k in support:
            if k not in s_ops:
                s_ops[k] = subtraction_kraus(int(k), beta, cutoff).matrix
            acc += np.conj(ket[k]) * s_ops[k]
        out.append(acc)
    return out


def step_kraus_operators(
    config: PhantmStepConfig, n: int | None, m: float, cutoff: int
) -> list[np.ndarray]:
    """All single-mode Kraus operators of one step at fixed outcomes (n, m).

    Lossless configurations give a single operator; each loss location
    multiplies the list by its Kraus terms.
    """
    anc = squeezed_vacuum(config.r_cluster, cutoff).amplitudes
    loss_c = (config.loss or {}).get("C")
    ancillas = (
        [anc]
        if loss_c is None
        else [mat @ anc for mat in loss_kraus_list(loss_c, cutoff)]
    )
    loss_b = (config.loss or {}).get("B")
    m_ket = quadrature_bra(m, np.pi / 2, cutoff).conj()  # ket components of |m⟩_P
    bras = [m_ket] if loss_b is None else [mat.conj().T @ m_ket for mat in loss_kraus_list(loss_b, cutoff)]
    if config.mode == "plain_teleport":
        wire_ops = [np.eye(cutoff, dtype=np.complex128)]
    else:
        wire_ops = _subtraction_ops(config, int(n), cutoff)
    out = []
    for chi in ancillas:
        for w in bras:
            tk = teleport_kraus(w, chi, cutoff)
            for t_op in wire_ops:
                out.append(tk @ t_op)
    return out


# ---------------------------------------------------------------------------
# sampling helpers (kraus engine)


def _post_cz_joint(state_vec: np.ndarray, r_cluster: float, cutoff: int) -> np.ndarray:
    """CZ(ψ ⊗ S(r')|0⟩) as an (N, N) tensor [wire, fresh node].

    The subtraction beamsplitter taps the wire *after* the CZ, so PNR
    statistics draw on the fresh node's anti-squeezed quadrature; the cluster
    itself is the photon reservoir that perpetuates subtraction events.
    """
    anc = squeezed_vacuum(r_cluster, cutoff).amplitudes
    x, v = q_eigensystem(cutoff)
    psi_t = v.conj().T @ state_vec
    chi_t = v.conj().T @ anc
    joint = np.exp(1j * np.outer(x, x)) * np.outer(psi_t, chi_t)
    return v @ joint @ v.T


def _pnr_probabilities(joint: np.ndarray, config: PhantmStepConfig, cutoff: int) -> np.ndarray:
    beta = bs_beta(config.theta())
    probs = np.zeros(config.pnr_max + 1)
    for k in range(config.pnr_max + 1):
        sk = subtraction_kraus(k, beta, cutoff).matrix
        probs[k] = np.linalg.norm(sk @ joint) ** 2
    return probs


def _sample_pnr_count(joint, config, cutoff, rng) -> tuple[int, bool]:
    probs = _pnr_probabilities(joint, config, cutoff)
    total = probs.sum()
    folded = False
    residual = max(0.0, 1.0 - total)
    if residual > 1e-6:
        # residual mass beyond the ceiling is folded into the largest bin
        probs[int(np.argmax(probs))] += residual
        folded = True
    u = float(rng.random()) * probs.sum()
    ncount = int(np.searchsorted(np.cumsum(probs), u))
    return min(ncount, config.pnr_max), folded


def _wire_m_density(joint: np.ndarray, cutoff: int, grid) -> tuple[np.ndarray, np.ndarray]:
    """p(m) = Σ_j |⟨m|_P,wire joint|² for a two-mode tensor [wire, out]."""
    lo, hi, points = grid
    xs = np.linspace(lo, hi, int(points))
    amp = quadrature_bra_grid(xs, np.pi / 2, cutoff) @ joint  # [m, out]
    pdf = np.sum(np.abs(amp) ** 2, axis=1)
    return xs, pdf


def _sample_wire_m(joint, cutoff, grid, rng) -> float:
    xs, pdf = _wire_m_density(joint, cutoff, grid)
    norm2 = float(np.real(np.sum(np.abs(joint) ** 2)))
    captured = float(np.trapezoid(pdf, dx=xs[1] - xs[0])) / norm2
    if captured < 0.999:
        lo, hi, points = grid
        xs, pdf = _wire_m_density(joint, cutoff, (2 * lo, 2 * hi, 2 * int(points)))
    value, _ = _inverse_cdf_sample(xs, pdf, float(rng.random()))
    return value


# ---------------------------------------------------------------------------
# single step and iterated chains


def _recenter(vec: np.ndarray, cutoff: int) -> tuple[np.ndarray, complex]:
    """Displace a pure state so its first moments vanish.

    The measurement-dependent shifts (the Kraus X(mσ) part plus the pull of
    the off-center teleportation envelope) are known functions of the record,
    so the feed-forward can always recenter the state; doing so keeps
    cutoffs small.  Returns (recentred vector, applied D amplitude).
    """
    a = annihilation(cutoff)
    n2 = np.real(np.vdot(vec, vec))
    mean_a = complex(np.vdot(vec, a @ vec) / n2)
    if abs(mean_a) < 1e-12:
        return vec, 0.0 + 0.0j
    return displacement(-mean_a, cutoff) @ vec, -mean_a


def phantm_step(state, config: PhantmStepConfig, rng=None, step_index: int = 0):
    """One teleportation step (with or without subtraction).

    Returns (state, StepRecord).  Feed-forward displacement is applied before
    returning: the state is recentred (first moments zeroed), undoing the
    X(mσ) shift together with the envelope-induced pull.  Pure states are
    renormalized with the pre-normalization norm kept in ``norm_tracked``.
    """
    if isinstance(state, DensityOperator) or (config.loss is not None):
        return _phantm_step_density(state, config, rng, step_index)
    if config.engine == "circuit":
        return _phantm_step_circuit(state, config, rng, step_index)
    if config.engine not in ("kraus", "ideal"):
        raise ValueError(f"unknown engine {config.engine!r}")
    cutoff = state.cutoff
    vec = state.amplitudes
    theta = config.theta()
    sigma = 1.0 if config.engine == "ideal" else 2.0 * np.cos(theta) / (1.0 + np.cos(theta) ** 2)
    plain = config.mode == "plain_teleport"
    folded = False
    need_sampling = config.forced_n is None or config.forced_m is None
    joint = None
    if need_sampling and config.engine != "ideal":
        joint = _post_cz_joint(vec, config.r_cluster, cutoff)
    if plain:
        ncount = None
    elif config.forced_n is not None:
        ncount = int(config.forced_n)
    elif config.engine == "ideal":
        raise ValueError("ideal engine requires forced PNR outcomes")
    else:
        ncount, folded = _sample_pnr_count(joint, config, cutoff, rng)
    if config.forced_m is not None:
        m = float(config.forced_m)
    elif config.engine == "ideal":
        raise ValueError("ideal engine requires forced homodyne outcomes")
    else:
        if not plain:
            post = subtraction_kraus(ncount, bs_beta(theta), cutoff).matrix @ joint
            post = post / np.linalg.norm(post.reshape(-1))
        else:
            post = joint / np.linalg.norm(joint.reshape(-1))
        m = _sample_wire_m(post, cutoff, config.grid, rng)
    # In the realigned model the feed-forward is taken to reset the full
    # measurement dependence of the step (displacement and fringe phase per
    # the record), so the state update is the m = 0 Kraus; the sampled m is
    # still logged.  The "circuit" model applies the exact conditional.
    # Forced (post-selected) outcomes are always applied as given.
    realigned = config.m_model == "realigned" and config.forced_m is None
    m_eff = 0.0 if realigned else m
    if config.engine == "ideal":
        k_op = ideal_kraus(0 if plain else ncount, m_eff, cutoff).matrix
        if plain:
            k_op = shift_x(m_eff, cutoff) @ rotation(np.pi / 2, cutoff)
    elif plain:
        k_op = plain_kraus(m_eff, config.r_cluster, cutoff).matrix
    else:
        k_op = phantm_kraus(ncount, m_eff, config.r_cluster, config.bs_theta, cutoff).matrix
    out_vec = shift_x(-m_eff * (1.0 if plain else sigma), cutoff) @ (k_op @ vec)
    out_vec, extra = _recenter(out_vec, cutoff)
    shift = complex(-m_eff * (1.0 if plain else sigma) / np.sqrt(2.0)) + extra
    out = FockVector(out_vec, 1, cutoff).normalize()
    kind = "plain" if plain else "subtract"
    rec = StepRecord(step_index, kind, ncount, m, shift, folded)
    return out, rec


def _phantm_step_circuit(state: FockVector, config: PhantmStepConfig, rng, step_index: int):
    """Explicit 2/3-mode circuit: CZ to a fresh node, subtraction beamsplitter
    to vacuum, PNR, then homodyne on the input wire."""
    cutoff = state.cutoff
    plain = config.mode == "plain_teleport"
    anc = squeezed_vacuum(config.r_cluster, cutoff)
    joint = tensor(state.normalize(), anc)  # mode 0 = wire in, 1 = fresh node
    joint = apply_cz(joint, 0, 1)
    ncount = None
    folded = False
    if not plain:
        theta = config.theta()
        joint = tensor(joint, vacuum(cutoff))  # mode 2 = subtraction vacuum
        joint = apply_two_mode(beamsplitter(theta, cutoff), joint, 0, 2)
        if config.forced_n is not None:
            ncount = int(config.forced_n)
        else:
            out = sample_pnr(joint, 2, rng)
            ncount = min(out.count, config.pnr_max)
            folded = out.count > config.pnr_max
        joint = project_pnr(joint, 2, ncount)
        joint = FockVector(joint.amplitudes, joint.modes, cutoff).normalize()
    if config.forced_m is not None:
        m = float(config.forced_m)
    else:
        m = sample_homodyne(joint, 0, np.pi / 2, rng, config.grid).value
    realigned = config.m_model == "realigned" and config.forced_m is None
    m_eff = 0.0 if realigned else m
    out_state = project_homodyne(joint, 0, (m_eff, np.pi / 2))
    theta = config.theta()
    sigma = 2.0 * np.cos(theta) / (1.0 + np.cos(theta) ** 2)
    base = -m_eff * (1.0 if plain else sigma)
    out_vec = shift_x(base, cutoff) @ out_state.amplitudes
    out_vec, extra = _recenter(out_vec, cutoff)
    out = FockVector(out_vec, 1, cutoff).normalize()
    shift = complex(base / np.sqrt(2.0)) + extra
    rec = StepRecord(step_index, "plain" if plain else "subtract", ncount, m, shift, folded)
    return out, rec


def _phantm_step_density(state, config: PhantmStepConfig, rng, step_index: int):
    """Density-operator step; outcomes must be forced when loss is present."""
    rho = state.dm() if isinstance(state, FockVector) else state
    cutoff = rho.cutoff
    plain = config.mode == "plain_teleport"
    if (config.forced_m is None) or (not plain and config.forced_n is None):
        raise ValueError("loss/density evolution requires forced (post-selected) outcomes")
    ncount = None if plain else int(config.forced_n)
    m = float(config.forced_m)
    ops = step_kraus_operators(config, ncount, m, cutoff)
    theta = config.theta()
    sigma = 1.0 if plain else 2.0 * np.cos(theta) / (1.0 + np.cos(theta) ** 2)
    undo = shift_x(-m * sigma, cutoff)
    acc = np.zeros_like(rho.matrix)
    for k_op in ops:
        full = undo @ k_op
        acc += full @ rho.matrix @ full.conj().T
    out = DensityOperator(acc, 1, cutoff).normalize()
    rec = StepRecord(step_index, "plain" if plain else "subtract", ncount, m, -m * sigma)
    return out, rec


@dataclass
class ChainResult:
    final: object
    record: MeasurementRecord
    snapshots: list


def run_chain(initial: FockVector, steps: int, config: PhantmStepConfig, rng=None) -> ChainResult:
    """Iterate subtract-teleport steps with a plain teleportation in between.

    Each PhANTM step consumes two cluster nodes: the subtraction node and the
    intervening plain node that restores the orientation with R(π/2).
    Snapshots (normalized, one per PhANTM step, taken after the intervening
    plain teleportation) are collected along with the full record.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    record = MeasurementRecord()
    snapshots = []
    state = initial.normalize() if isinstance(initial, FockVector) else initial
    sub_cfg = config
    plain_cfg = _plain_config(config)
    for k in range(steps):
        state, rec = phantm_step(state, sub_cfg, rng, step_index=2 * k)
        record.add(rec)
        state, rec = phantm_step(state, plain_cfg, rng, step_index=2 * k + 1)
        record.add(rec)
        snapshots.append(state)
    return ChainResult(state, record, snapshots)


def _plain_config(config: PhantmStepConfig) -> PhantmStepConfig:
    loss = None
    if config.loss:
        # no PNR arm on a plain step; only B and C locations apply
        loss = {k: v for k, v in config.loss.items() if k in ("B", "C")} or None
    return PhantmStepConfig(
        r_cluster=config.r_cluster,
        bs_theta=config.bs_theta,
        mode="plain_teleport",
        forced_m=config.forced_m,
        loss=loss,
        engine=config.engine,
        m_model=config.m_model,
        pnr_max=config.pnr_max,
        grid=config.grid,
    )


def preservation_run(
    initial: FockVector,
    steps: int,
    config: PhantmStepConfig,
    rng=None,
    cadence: str = "phantm",
    fit_multistart: int = 6,
):
    """Teleport a cat along the wire and fit (|α|, φ, r) after every node.

    ``cadence='phantm'`` attempts subtraction every other node; ``'plain'``
    teleports only.  Fit failures are flagged and the trajectory continues.
    """
    from .analysis import fit  # local import; analysis sits above protocol

    plain_cfg = _plain_config(config)
    state = initial.normalize()
    fits = [fit(state, "cat", multistart=fit_multistart)]
    for k in range(steps):
        if cadence == "phantm" and k % 2 == 0:
            state, _ = phantm_step(state, config, rng, step_index=k)
        else:
            state, _ = phantm_step(state, plain_cfg, rng, step_index=k)
        fits.append(fit(state, "cat", multistart=fit_multistart))
    return fits
