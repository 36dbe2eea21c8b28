"""Analytic Fock-basis constructors for Gaussian and damping operators.

Operator definitions (all with Q = (a + a†)/√2):

    Z(y) = e^{iQy}           X(x) = e^{-iPx}          R(θ) = e^{iθ a†a}
    D(α) = e^{αa† - α*a}     S(r) = e^{(r/2)(a†² - a²)}
    N(β) = e^{-β a†a}        B(θ) = e^{θ(a₁†a₂ - a₁a₂†)}    CZ(w) = e^{iw Q₁Q₂}

With these signs S(r)|0⟩ has Q-quadrature variance e^{2r}/2, and B(θ)
transforms (a₁, a₂) -> (t a₁ + r a₂, t a₂ - r a₁) with t = cosθ, r = sinθ.
Rotations and damping are built diagonally; the rest are scaling-and-squaring
exponentials of the truncated generators, exact on the guard subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm, eigh_tridiagonal

from .fock import MatrixOperator

LN10 = math.log(10.0)


# ---------------------------------------------------------------------------
# raw ndarray builders (cached; arrays are returned read-only)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def annihilation(cutoff: int) -> np.ndarray:
    return _frozen(np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(np.complex128))


@lru_cache(maxsize=None)
def creation(cutoff: int) -> np.ndarray:
    return _frozen(annihilation(cutoff).conj().T.copy())


@lru_cache(maxsize=None)
def number_op(cutoff: int) -> np.ndarray:
    return _frozen(np.diag(np.arange(cutoff, dtype=np.complex128)))


@lru_cache(maxsize=None)
def quad_q(cutoff: int) -> np.ndarray:
    a = annihilation(cutoff)
    return _frozen((a + a.conj().T) / np.sqrt(2.0))


@lru_cache(maxsize=None)
def quad_p(cutoff: int) -> np.ndarray:
    a = annihilation(cutoff)
    return _frozen(1j * (a.conj().T - a) / np.sqrt(2.0))


@lru_cache(maxsize=None)
def q_eigensystem(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition Q = V diag(x) V† of the truncated position operator.

    Used to build any function of Q exactly on the truncated space.
    """
    off = np.sqrt(np.arange(1, cutoff, dtype=float) / 2.0)
    x, v = eigh_tridiagonal(np.zeros(cutoff), off)
    return _frozen(x), _frozen(v.astype(np.complex128))


def q_function(func, cutoff: int) -> np.ndarray:
    """f(Q) for a scalar callable f, via the Q eigenbasis."""
    x, v = q_eigensystem(cutoff)
    return (v * np.asarray(func(x), dtype=np.complex128)) @ v.conj().T


def p_function(func, cutoff: int) -> np.ndarray:
    """f(P); P = R(π/2) Q R†(π/2), so rotate the Q eigenbasis."""
    phase = np.exp(1j * np.pi / 2 * np.arange(cutoff))
    x, v = q_eigensystem(cutoff)
    vp = phase[:, None] * v
    return (vp * np.asarray(func(x), dtype=np.complex128)) @ vp.conj().T


@lru_cache(maxsize=None)
def displacement(alpha: complex, cutoff: int) -> np.ndarray:
    a = annihilation(cutoff)
    return _frozen(expm(alpha * a.conj().T - np.conj(alpha) * a))


@lru_cache(maxsize=None)
def squeeze(r: float, cutoff: int) -> np.ndarray:
    a = annihilation(cutoff)
    return _frozen(expm(0.5 * r * (a.conj().T @ a.conj().T - a @ a)))


@lru_cache(maxsize=None)
def rotation(theta: float, cutoff: int) -> np.ndarray:
    return _frozen(np.diag(np.exp(1j * theta * np.arange(cutoff))))


@lru_cache(maxsize=None)
def damp(beta: float, cutoff: int) -> np.ndarray:
    return _frozen(np.diag(np.exp(-beta * np.arange(cutoff)) + 0j))


def shift_z(y: float, cutoff: int) -> np.ndarray:
    return displacement(1j * y / np.sqrt(2.0), cutoff)


def shift_x(x: float, cutoff: int) -> np.ndarray:
    return displacement(x / np.sqrt(2.0) + 0j, cutoff)


@lru_cache(maxsize=None)
def beamsplitter(theta: float, cutoff: int) -> np.ndarray:
    """exp(θ(a₁†a₂ - a₁a₂†)), assembled per total-photon block.

    The generator conserves a₁†a₁ + a₂†a₂, so the truncated exponential
    factorizes into small blocks |k, M-k⟩; this is exactly expm of the
    truncated generator at a tiny fraction of the cost.
    """
    n = cutoff
    out = np.zeros((n * n, n * n), dtype=np.complex128)
    sq = np.sqrt(np.arange(n, dtype=float))
    for total in range(2 * n - 1):
        ks = np.arange(max(0, total - n + 1), min(total, n - 1) + 1)
        idx = ks * n + (total - ks)
        d = ks.size
        gen = np.zeros((d, d))
        # <k+1, M-k-1| a1† a2 |k, M-k> = √(k+1) √(M-k)
        for j in range(d - 1):
            k = ks[j]
            val = sq[k + 1] * sq[total - k]
            gen[j + 1, j] = val
            gen[j, j + 1] = -val
        out[np.ix_(idx, idx)] = expm(theta * gen)
    return _frozen(out)


@lru_cache(maxsize=None)
def cz(weight: float, cutoff: int) -> np.ndarray:
    """e^{iw Q₁Q₂}, built exactly from the joint Q eigenbasis."""
    x, v = q_eigensystem(cutoff)
    vv = np.kron(v, v)
    phases = np.exp(1j * weight * np.outer(x, x)).reshape(-1)
    return _frozen((vv * phases) @ vv.conj().T)


def gaussian_q_envelope(s: float, cutoff: int, center: float = 0.0) -> np.ndarray:
    """Non-unitary e^{-(Q - center)² / 2s²}."""
    return q_function(lambda x: np.exp(-((x - center) ** 2) / (2.0 * s * s)), cutoff)


def quadratic_phase(gamma: float, cutoff: int) -> np.ndarray:
    """Shear gate e^{iγQ²/2}."""
    return q_function(lambda x: np.exp(0.5j * gamma * x * x), cutoff)


# ---------------------------------------------------------------------------
# OperatorSpec front-end


@dataclass(frozen=True)
class OperatorSpec:
    """Declarative description of a circuit operator.

    kinds: displacement(alpha), squeeze(r), rotate(theta), shiftZ(y),
    shiftX(x), damp(beta), beamsplitter(theta), cz(weight), quadQ, quadP,
    annihilate, create.  ``damp`` with beta < 0 is the unbounded inverse and
    is flagged non-physical (analytic checks only).
    """

    kind: str
    value: complex = 0.0

    @property
    def physical(self) -> bool:
        return not (self.kind == "damp" and np.real(self.value) < 0)


_TWO_MODE = {"beamsplitter", "cz"}
_UNITARY = {"displacement", "squeeze", "rotate", "shiftZ", "shiftX", "beamsplitter", "cz"}


def build(spec: OperatorSpec, cutoff: int) -> MatrixOperator:
    """Materialize an OperatorSpec on the truncated space."""
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    k, v = spec.kind, spec.value
    if k == "displacement":
        mat = displacement(complex(v), cutoff)
    elif k == "squeeze":
        mat = squeeze(float(np.real(v)), cutoff)
    elif k == "rotate":
        mat = rotation(float(np.real(v)), cutoff)
    elif k == "shiftZ":
        mat = shift_z(float(np.real(v)), cutoff)
    elif k == "shiftX":
        mat = shift_x(float(np.real(v)), cutoff)
    elif k == "damp":
        mat = damp(float(np.real(v)), cutoff)
    elif k == "beamsplitter":
        mat = beamsplitter(float(np.real(v)), cutoff)
    elif k == "cz":
        mat = cz(float(np.real(v)), cutoff)
    elif k == "quadQ":
        mat = quad_q(cutoff)
    elif k == "quadP":
        mat = quad_p(cutoff)
    elif k == "annihilate":
        mat = annihilation(cutoff)
    elif k == "create":
        mat = creation(cutoff)
    else:
        raise ValueError(f"unknown operator kind {k!r}")
    modes = 2 if k in _TWO_MODE else 1
    label = f"{k}({v})" if k not in ("quadQ", "quadP", "annihilate", "create") else k
    if not spec.physical:
        label += " [non-physical inverse damping]"
    return MatrixOperator(mat, modes, cutoff, label)


# ---------------------------------------------------------------------------
# squeezing conventions and subtraction matching


def db_to_r(squeezing_db: float) -> float:
    """dB = 10 log10(e^{2r})  =>  r = dB ln(10) / 20."""
    if squeezing_db < 0:
        raise ValueError("squeezing in dB must be nonnegative")
    return squeezing_db * LN10 / 20.0


def r_to_db(r: float) -> float:
    return 20.0 * r / LN10


def subtraction_reflectivity(r_cluster: float) -> float:
    """Beamsplitter angle with cos²θ = tanh|r| so subtraction damping matches
    the cluster's finite-squeezing noise."""
    if r_cluster <= 0:
        raise ValueError("cluster squeezing must be positive")
    return float(np.arccos(np.sqrt(np.tanh(abs(r_cluster)))))


def bs_beta(theta: float) -> float:
    """Damping argument β = -ln t of a subtraction beamsplitter."""
    return float(-np.log(np.cos(theta)))


def damping_on_p_eigenstate(beta: float, m: float = 0.0):
    """Decomposition N(β)|m⟩_P = A e^{-mP sinhβ} Z(m coshβ) S(r')|0⟩.

    Returns ``(coefficient, r_prime, chain)`` where the chain of OperatorSpecs
    (applied right to left to the vacuum) reproduces the state direction:
    damp(β) Z(m) damp(-β) carries the non-unitary imaginary shift together
    with Z(m coshβ), and equals coefficient × e^{-mP sinhβ} Z(m coshβ).
    The diverging eigenstate normalization is dropped.
    """
    if beta <= 0:
        raise ValueError("damping argument must be positive")
    r_prime = float(np.arctanh(np.exp(-2.0 * beta)))
    coefficient = float(np.exp(0.5 * m * m * np.sinh(beta) * np.cosh(beta)))
    chain = (
        OperatorSpec("damp", beta),
        OperatorSpec("shiftZ", m),
        OperatorSpec("damp", -beta),
        OperatorSpec("squeeze", r_prime),
    )
    return coefficient, r_prime, chain
