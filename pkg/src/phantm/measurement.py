"""Homodyne and photon-number-resolving measurement.

Quadrature eigenbra components are ⟨m,θ|n⟩ = ψ_n(m) e^{-inθ} with ψ_n the
harmonic-oscillator wavefunction; θ = 0 is the Q basis and θ = π/2 the P
basis.  Sampling is inverse-CDF on a uniform grid, deterministic per rng.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import DensityOperator, FockVector, partial_trace

DEFAULT_GRID = (-8.0, 8.0, 2048)
CAPTURE_THRESHOLD = 0.999


class GridTooSmallError(ValueError):
    """The homodyne grid fails to capture the marginal distribution."""


@dataclass(frozen=True)
class HomodyneOutcome:
    value: float
    theta: float
    pdf_norm: float = 0.0  # density at the sampled point, diagnostic


@dataclass(frozen=True)
class PnrOutcome:
    count: int
    probability: float


def hermite_functions(n_max: int, x) -> np.ndarray:
    """ψ_n(x) for n = 0..n_max-1, shape (n_max, len(x)).

    Normalized three-term recurrence
    ψ_{n+1} = √(2/(n+1)) x ψ_n - √(n/(n+1)) ψ_{n-1}, stable to n ~ 100.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((n_max, x.size))
    out[0] = np.pi ** (-0.25) * np.exp(-0.5 * x * x)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quadrature_bra(m: float, theta: float, cutoff: int) -> np.ndarray:
    """Components of ⟨m,θ| over |n⟩: ψ_n(m) e^{-inθ}."""
    psi = hermite_functions(cutoff, np.array([m]))[:, 0]
    return psi * np.exp(-1j * theta * np.arange(cutoff))


def quadrature_bra_grid(xs: np.ndarray, theta: float, cutoff: int) -> np.ndarray:
    """Row k is ⟨xs[k],θ|; shape (len(xs), cutoff)."""
    psi = hermite_functions(cutoff, xs).T
    return psi * np.exp(-1j * theta * np.arange(cutoff))[None, :]


def _mode_first(state: FockVector, mode: int) -> np.ndarray:
    """Amplitudes reshaped to (cutoff, rest) with the measured mode first."""
    t = state.tensor_view()
    t = np.moveaxis(t, mode, 0)
    return t.reshape(state.cutoff, -1)


def homodyne_pdf(state, mode: int, theta: float, grid=DEFAULT_GRID, _widened: bool = False):
    """Discretized marginal density p(m) = ‖⟨m,θ|ψ⟩‖² on the grid.

    Returns (xs, pdf, captured_mass).  The grid auto-widens once if less than
    99.9% of the mass is captured, then raises GridTooSmallError.
    """
    lo, hi, points = grid
    xs = np.linspace(lo, hi, int(points))
    bras = quadrature_bra_grid(xs, theta, state.cutoff)
    if isinstance(state, FockVector):
        amps = _mode_first(state, mode)
        proj = bras @ amps  # ⟨m|ψ⟩ = Σ_n ⟨m|n⟩ ψ_n, components already bra-side
        pdf = np.sum(np.abs(proj) ** 2, axis=1)
        total_norm = state.norm() ** 2
    elif isinstance(state, DensityOperator):
        reduced = partial_trace(state, [mode]).matrix
        pdf = np.real(np.einsum("kn,nm,km->k", bras, reduced, bras.conj()))
        total_norm = float(np.real(np.trace(state.matrix)))
    else:
        raise TypeError(f"unsupported state type {type(state)}")
    dx = xs[1] - xs[0]
    captured = float(np.trapezoid(pdf, dx=dx) / total_norm)
    if captured < CAPTURE_THRESHOLD:
        if _widened:
            raise GridTooSmallError(
                f"homodyne grid captured only {captured:.6f} of the marginal after widening"
            )
        wide = (2.0 * lo, 2.0 * hi, 2 * int(points))
        return homodyne_pdf(state, mode, theta, wide, _widened=True)
    return xs, pdf, captured


def _inverse_cdf_sample(xs: np.ndarray, pdf: np.ndarray, u: float) -> tuple[float, float]:
    """Linear-in-bin inverse CDF; returns (sample, density at sample)."""
    dx = xs[1] - xs[0]
    masses = pdf * dx
    cdf = np.cumsum(masses)
    total = cdf[-1]
    target = u * total
    k = int(np.searchsorted(cdf, target))
    k = min(k, xs.size - 1)
    prev = cdf[k - 1] if k > 0 else 0.0
    frac = (target - prev) / masses[k] if masses[k] > 0 else 0.5
    value = xs[k] + (frac - 0.5) * dx
    return float(value), float(pdf[k])


def sample_homodyne(
    state, mode: int, theta: float, rng, grid=DEFAULT_GRID, forced: float | None = None
) -> HomodyneOutcome:
    """Draw a homodyne outcome; ``forced`` switches to post-selection."""
    if forced is not None:
        xs, pdf, _ = homodyne_pdf(state, mode, theta, grid)
        dens = float(np.interp(forced, xs, pdf))
        return HomodyneOutcome(float(forced), theta, dens)
    xs, pdf, _ = homodyne_pdf(state, mode, theta, grid)
    value, dens = _inverse_cdf_sample(xs, pdf, float(rng.random()))
    return HomodyneOutcome(value, theta, dens)


def project_homodyne(state, mode: int, outcome) -> FockVector | DensityOperator:
    """Contract ⟨m,θ| against one mode; the result keeps norm² = density."""
    if isinstance(outcome, HomodyneOutcome):
        m, theta = outcome.value, outcome.theta
    else:
        m, theta = outcome
    bra = quadrature_bra(m, theta, state.cutoff)
    n = state.cutoff
    if isinstance(state, FockVector):
        if state.modes < 2:
            raise ValueError("projection removes a mode; need at least two")
        t = np.moveaxis(state.tensor_view(), mode, 0)
        out = np.tensordot(bra, t, axes=(0, 0))
        return FockVector(out.reshape(-1), state.modes - 1, n)
    if isinstance(state, DensityOperator):
        if state.modes < 2:
            raise ValueError("projection removes a mode; need at least two")
        modes = state.modes
        t = state.matrix.reshape((n,) * (2 * modes))
        t = np.moveaxis(t, (mode, modes + mode), (0, 1))
        out = np.einsum("i,j,ij...->...", bra, bra.conj(), t)
        d = n ** (modes - 1)
        return DensityOperator(out.reshape(d, d), modes - 1, n)
    raise TypeError(f"unsupported state type {type(state)}")


def pnr_distribution(state, mode: int) -> np.ndarray:
    """Photon-number probabilities of one mode."""
    pops = state.mode_populations(mode)
    if isinstance(state, FockVector):
        pops = pops / state.norm() ** 2
    else:
        pops = pops / float(np.real(np.trace(state.matrix)))
    return pops


def sample_pnr(state, mode: int, rng, forced: int | None = None) -> PnrOutcome:
    probs = pnr_distribution(state, mode)
    if forced is not None:
        return PnrOutcome(int(forced), float(probs[int(forced)]))
    u = float(rng.random())
    cdf = np.cumsum(probs)
    n = int(np.searchsorted(cdf, u * cdf[-1]))
    n = min(n, probs.size - 1)
    return PnrOutcome(n, float(probs[n]))


def project_pnr(state, mode: int, n: int) -> FockVector | DensityOperator:
    """Contract ⟨n| against one mode (unnormalized result)."""
    bra = np.zeros(state.cutoff, dtype=np.complex128)
    bra[n] = 1.0
    c = state.cutoff
    if isinstance(state, FockVector):
        t = np.moveaxis(state.tensor_view(), mode, 0)
        out = np.tensordot(bra.conj(), t, axes=(0, 0))
        return FockVector(out.reshape(-1), state.modes - 1, c)
    modes = state.modes
    t = state.matrix.reshape((c,) * (2 * modes))
    t = np.moveaxis(t, (mode, modes + mode), (0, 1))
    out = t[n, n]
    d = c ** (modes - 1)
    return DensityOperator(out.reshape(d, d), modes - 1, c)
