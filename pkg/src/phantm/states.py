"""State-family constructors on the truncated Fock basis.

Families are built from the displaced-squeezed ladder recurrence rather than
matrix exponentials, so a single construction costs O(cutoff) and fitting
loops stay cheap.  For D(α)S(r)|0⟩ the Bogoliubov relation
(a cosh r - a† sinh r) D S |0⟩ = (α cosh r - α* sinh r) D S |0⟩ gives

    c_{n+1} = [(α cosh r - α* sinh r) c_n + sinh r √n c_{n-1}] / (cosh r √(n+1))
    c_0     = sech^{1/2} r · exp(-|α|²/2 + α*² tanh r / 2).
"""

from __future__ import annotations

import numpy as np

from .fock import FockVector


def displaced_squeezed_amplitudes(alpha: complex, r: float, cutoff: int) -> np.ndarray:
    """Fock amplitudes of D(α)S(r)|0⟩ (exact coefficients, then truncated)."""
    c = np.zeros(cutoff, dtype=np.complex128)
    ch, sh, th = np.cosh(r), np.sinh(r), np.tanh(r)
    c[0] = np.exp(-0.5 * abs(alpha) ** 2 + 0.5 * np.conj(alpha) ** 2 * th) / np.sqrt(ch)
    lam = alpha * ch - np.conj(alpha) * sh
    if cutoff > 1:
        c[1] = lam * c[0] / ch
    for n in range(1, cutoff - 1):
        c[n + 1] = (lam * c[n] + sh * np.sqrt(n) * c[n - 1]) / (ch * np.sqrt(n + 1))
    return c


def displaced_squeezed(alpha: complex, r: float, cutoff: int) -> FockVector:
    """Normalized on the truncated space; raw exact coefficients are available
    from displaced_squeezed_amplitudes."""
    return FockVector(displaced_squeezed_amplitudes(alpha, r, cutoff), 1, cutoff).normalize()


def squeezed_vacuum(r: float, cutoff: int) -> FockVector:
    return displaced_squeezed(0.0, r, cutoff)


def coherent(alpha: complex, cutoff: int) -> FockVector:
    return displaced_squeezed(alpha, 0.0, cutoff)


def rotate(state: FockVector, theta: float) -> FockVector:
    """R(θ) on a single-mode state (diagonal phase)."""
    if state.modes != 1:
        raise ValueError("rotate acts on single-mode states")
    phases = np.exp(1j * theta * np.arange(state.cutoff))
    return FockVector(phases * state.amplitudes, 1, state.cutoff, norm_tracked=state.norm_tracked)


def cat(alpha: float, phi: float, r: float, cutoff: int, axis: float = 0.0) -> FockVector:
    """Normalized (D(α) + e^{iφ} D(-α)) S(r)|0⟩, optionally rotated by ``axis``.

    ``alpha`` is real and nonnegative; the displacement direction is set by
    ``axis`` (0 puts the lobes on the Q axis, π/2 on the P axis).
    """
    amps = displaced_squeezed_amplitudes(alpha, r, cutoff) + np.exp(
        1j * phi
    ) * displaced_squeezed_amplitudes(-alpha, r, cutoff)
    vec = FockVector(amps, 1, cutoff).normalize()
    if axis:
        vec = rotate(vec, axis)
    return vec


def weighted_cat(
    a_coef: float, b_coef: float, alpha: float, r: float, cutoff: int, sign: int = 1
) -> FockVector:
    """Normalized (A X(α) ± B X†(α)) S(r)|0⟩ with X(α) = D(α/√2)."""
    d = alpha / np.sqrt(2.0)
    amps = a_coef * displaced_squeezed_amplitudes(d, r, cutoff) + sign * b_coef * (
        displaced_squeezed_amplitudes(-d, r, cutoff)
    )
    return FockVector(amps, 1, cutoff).normalize()


def grid_product(alpha: float, phases, r: float, cutoff: int) -> FockVector:
    """Normalized Π_k (Z(α) + e^{iφ_k} Z†(α)) S(r)|0⟩.

    Z displacements are all along the imaginary axis so they compose without
    Weyl phases and the product expands into 2^k displaced-squeezed terms.
    """
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    k = phases.size
    amps = np.zeros(cutoff, dtype=np.complex128)
    for bits in range(2**k):
        shift = 0.0
        coef = 1.0 + 0.0j
        for j in range(k):
            if (bits >> j) & 1:
                shift -= alpha
                coef *= np.exp(1j * phases[j])
            else:
                shift += alpha
        amps += coef * displaced_squeezed_amplitudes(1j * shift / np.sqrt(2.0), r, cutoff)
    return FockVector(amps, 1, cutoff).normalize()


def qunaught(
    delta: float,
    cutoff: int,
    spacing: float | None = None,
    peaks: int = 9,
    envelope: float | None = None,
) -> FockVector:
    """Approximate grid state with equal Q and P peak spacing.

    Gaussian peaks of width Δ sit at integer multiples of ``spacing``
    (default √(2π)) under a global Gaussian envelope.  The envelope width
    defaults to 1/Δ (the standard single-parameter family) but may be set
    independently, since bred grids carry the two widths separately.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if spacing is None:
        spacing = np.sqrt(2.0 * np.pi)
    if envelope is None:
        envelope = 1.0 / delta
    r_peak = 0.5 * np.log(2.0 * delta * delta)
    half = peaks // 2
    amps = np.zeros(cutoff, dtype=np.complex128)
    for k in range(-half, peaks - half):
        w = np.exp(-0.5 * (k * spacing / envelope) ** 2)
        amps += w * displaced_squeezed_amplitudes(k * spacing / np.sqrt(2.0), r_peak, cutoff)
    return FockVector(amps, 1, cutoff).normalize()


def parity_expectation(state: FockVector) -> float:
    """⟨(-1)^n⟩ for a single-mode state."""
    signs = 1.0 - 2.0 * (np.arange(state.cutoff) % 2)
    probs = np.abs(state.amplitudes) ** 2
    n2 = probs.sum()
    return float((signs * probs).sum() / n2)
