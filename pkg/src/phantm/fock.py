"""Truncated-Fock-space state and operator arithmetic.

Quadrature convention: Q = (a + a†)/√2 and P = i(a† − a)/√2, so the vacuum has
quadrature variance 1/2.  Multimode amplitudes are stored flat in row-major
mode layout: mode 0 is the slowest index, i.e. the flat index of the basis
ket |n_0, n_1, ...⟩ is n_0 * cutoff**(modes-1) + ... + n_{modes-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GUARD_FRACTION = 0.1
TAIL_FRACTION = 0.1
TAIL_MASS_BOUND = 1e-6


class DimensionMismatchError(ValueError):
    """Operands live on incompatible truncated spaces."""


class NormalizationError(ValueError):
    """Input state is not normalized within the required tolerance."""


def guard_dim(cutoff: int, guard_fraction: float = GUARD_FRACTION) -> int:
    """Dimension of the guard subspace (the cutoff boundary levels excluded)."""
    guard = max(1, int(np.ceil(guard_fraction * cutoff)))
    return max(1, cutoff - guard)


def _as_complex(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=np.complex128)
    out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FockVector:
    """Pure state over a truncated Fock basis (single- or multi-mode).

    ``norm_tracked`` retains the pre-normalization norm so that measurement /
    Kraus probabilities survive a later ``normalize()``.
    """

    amplitudes: np.ndarray
    modes: int
    cutoff: int
    norm_tracked: float = field(default=-1.0)

    def __post_init__(self):
        amps = _as_complex(self.amplitudes).reshape(-1)
        if self.modes < 1 or self.cutoff < 1:
            raise ValueError("modes and cutoff must be positive")
        if amps.size != self.cutoff**self.modes:
            raise DimensionMismatchError(
                f"amplitude length {amps.size} != cutoff^modes = {self.cutoff**self.modes}"
            )
        object.__setattr__(self, "amplitudes", amps)
        if self.norm_tracked < 0:
            object.__setattr__(self, "norm_tracked", float(np.linalg.norm(amps)))

    @property
    def dim(self) -> int:
        return self.cutoff**self.modes

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "FockVector":
        n = self.norm()
        if n == 0.0:
            raise NormalizationError("cannot normalize a zero vector (measure-zero outcome)")
        return FockVector(self.amplitudes / n, self.modes, self.cutoff, norm_tracked=n)

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per mode."""
        return self.amplitudes.reshape((self.cutoff,) * self.modes)

    def mode_populations(self, mode: int) -> np.ndarray:
        """Marginal Fock populations of one mode (unnormalized states allowed)."""
        t = np.abs(self.tensor_view()) ** 2
        axes = tuple(i for i in range(self.modes) if i != mode)
        return t.sum(axis=axes)

    def tail_mass(self, tail_fraction: float = TAIL_FRACTION) -> float:
        """Largest per-mode population of the top ``tail_fraction`` Fock levels.

        Relative to the current norm, so it is meaningful for unnormalized
        states as well.
        """
        n2 = self.norm() ** 2
        if n2 == 0.0:
            return 0.0
        start = self.cutoff - max(1, int(np.ceil(tail_fraction * self.cutoff)))
        return max(float(self.mode_populations(m)[start:].sum()) / n2 for m in range(self.modes))

    def dm(self) -> "DensityOperator":
        m = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityOperator(m, self.modes, self.cutoff)

    def overlap(self, other: "FockVector") -> complex:
        _check_same_space(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityOperator:
    """Mixed state for evolution under loss channels."""

    matrix: np.ndarray
    modes: int
    cutoff: int

    def __post_init__(self):
        m = _as_complex(self.matrix)
        dim = self.cutoff**self.modes
        if m.shape != (dim, dim):
            raise DimensionMismatchError(f"matrix shape {m.shape} != ({dim}, {dim})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.cutoff**self.modes

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def normalize(self) -> "DensityOperator":
        tr = self.trace()
        if tr <= 0.0:
            raise NormalizationError("cannot normalize a trace-zero density operator")
        return DensityOperator(self.matrix / tr, self.modes, self.cutoff)

    def validate(self, herm_tol: float = 1e-10, psd_tol: float = -1e-8) -> None:
        """Check hermiticity, trace in (0, 1], and positive semidefiniteness."""
        dev = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if dev > herm_tol:
            raise ValueError(f"not Hermitian: max deviation {dev:.3e}")
        tr = self.trace()
        if not (0.0 < tr <= 1.0 + 1e-9):
            raise ValueError(f"trace {tr} outside (0, 1]")
        evals = np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))
        if evals.min() < psd_tol:
            raise ValueError(f"negative eigenvalue {evals.min():.3e}")

    def mode_populations(self, mode: int) -> np.ndarray:
        """Marginal Fock populations of one mode."""
        reduced = partial_trace(self, [mode])
        return np.real(np.diag(reduced.matrix))

    def populations(self) -> np.ndarray:
        """Diagonal in the flat basis."""
        return np.real(np.diag(self.matrix))


def _check_same_space(a, b) -> None:
    if a.cutoff != b.cutoff or a.modes != b.modes:
        raise DimensionMismatchError(
            f"space mismatch: ({a.modes} modes, cutoff {a.cutoff}) vs ({b.modes}, {b.cutoff})"
        )


@dataclass(frozen=True)
class MatrixOperator:
    """Dense operator on the truncated space, tagged with arity and provenance."""

    matrix: np.ndarray
    modes: int
    cutoff: int
    label: str = ""

    def __post_init__(self):
        m = _as_complex(self.matrix)
        dim = self.cutoff**self.modes
        if m.shape != (dim, dim):
            raise DimensionMismatchError(f"matrix shape {m.shape} != ({dim}, {dim})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.cutoff**self.modes

    def dag(self) -> "MatrixOperator":
        return MatrixOperator(self.matrix.conj().T, self.modes, self.cutoff, self.label + "†")

    def unitarity_defect(self, guard_fraction: float = GUARD_FRACTION) -> float:
        """max |(U†U − I)| restricted to the guard subspace."""
        dev = self.matrix.conj().T @ self.matrix - np.eye(self.dim)
        proj = guard_projector_indices(self.cutoff, self.modes, guard_fraction)
        return float(np.max(np.abs(dev[np.ix_(proj, proj)])))


def guard_projector_indices(
    cutoff: int, modes: int, guard_fraction: float = GUARD_FRACTION, total: bool = True
) -> np.ndarray:
    """Flat indices of the guard subspace.

    With ``total=True`` (default) the guard keeps total photon number below
    the guard dimension; number-conserving multimode identities are then
    exact, since truncation only removes incomplete total-number blocks.
    ``total=False`` restricts each mode index separately instead.
    """
    gd = guard_dim(cutoff, guard_fraction)
    idx = np.arange(cutoff**modes)
    if total:
        tot = np.zeros(idx.size, dtype=int)
        for m in range(modes):
            tot += (idx // cutoff ** (modes - 1 - m)) % cutoff
        return idx[tot < gd]
    keep = np.ones(idx.size, dtype=bool)
    for m in range(modes):
        level = (idx // cutoff ** (modes - 1 - m)) % cutoff
        keep &= level < gd
    return idx[keep]


def identity_guard_indices(cutoff: int, modes: int = 1, fraction: float = 0.2) -> np.ndarray:
    """Strong guard for identity checks with active (squeezing-type) generators.

    Products of truncated exponentials are boundary-polluted well below the
    cutoff; restricting to total photon number <= fraction*cutoff keeps the
    residual tails below ~1e-8 at cutoff 40.
    """
    return guard_projector_indices(cutoff, modes, 1.0 - fraction, total=True)


def fock_state(levels, cutoff: int) -> FockVector:
    """Basis ket |n_0, ..., n_{k-1}⟩; a bare int means a single mode."""
    if np.isscalar(levels):
        levels = (int(levels),)
    levels = tuple(int(n) for n in levels)
    if any(n < 0 or n >= cutoff for n in levels):
        raise ValueError(f"levels {levels} outside 0..{cutoff - 1}")
    amps = np.zeros(cutoff ** len(levels), dtype=np.complex128)
    flat = 0
    for n in levels:
        flat = flat * cutoff + n
    amps[flat] = 1.0
    return FockVector(amps, len(levels), cutoff)


def vacuum(cutoff: int, modes: int = 1) -> FockVector:
    return fock_state((0,) * modes, cutoff)


def tensor(a, b):
    """Kronecker composite of two states or two operators (mode counts add)."""
    if isinstance(a, FockVector) and isinstance(b, FockVector):
        if a.cutoff != b.cutoff:
            raise DimensionMismatchError("tensor requires equal cutoffs")
        return FockVector(np.kron(a.amplitudes, b.amplitudes), a.modes + b.modes, a.cutoff)
    if isinstance(a, MatrixOperator) and isinstance(b, MatrixOperator):
        if a.cutoff != b.cutoff:
            raise DimensionMismatchError("tensor requires equal cutoffs")
        label = f"{a.label}⊗{b.label}" if (a.label or b.label) else ""
        return MatrixOperator(np.kron(a.matrix, b.matrix), a.modes + b.modes, a.cutoff, label)
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        if a.cutoff != b.cutoff:
            raise DimensionMismatchError("tensor requires equal cutoffs")
        return DensityOperator(np.kron(a.matrix, b.matrix), a.modes + b.modes, a.cutoff)
    raise TypeError(f"tensor expects two states or two operators, got {type(a)}, {type(b)}")


def apply(op: MatrixOperator, state):
    """op |ψ⟩ for vectors, op ρ op† for density operators; result unnormalized."""
    mat = op.matrix if isinstance(op, MatrixOperator) else np.asarray(op)
    if isinstance(state, FockVector):
        if mat.shape[1] != state.dim:
            raise DimensionMismatchError(f"operator dim {mat.shape} vs state dim {state.dim}")
        out = mat @ state.amplitudes
        return FockVector(out, state.modes, state.cutoff, norm_tracked=float(np.linalg.norm(out)))
    if isinstance(state, DensityOperator):
        if mat.shape[1] != state.dim:
            raise DimensionMismatchError(f"operator dim {mat.shape} vs state dim {state.dim}")
        return DensityOperator(mat @ state.matrix @ mat.conj().T, state.modes, state.cutoff)
    raise TypeError(f"cannot apply to {type(state)}")


def embed(op: MatrixOperator, mode, total_modes: int) -> MatrixOperator:
    """Promote an operator to ``total_modes`` acting on the given mode(s).

    ``mode`` is an int for single-mode operators or a pair of adjacent-free
    mode indices for two-mode operators (any ordering, need not be adjacent).
    """
    n = op.cutoff
    if op.modes == 1:
        mats = [np.eye(n)] * total_modes
        mats[mode] = op.matrix
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return MatrixOperator(out, total_modes, n, op.label)
    if op.modes == 2:
        i, j = mode
        rest = [k for k in range(total_modes) if k not in (i, j)]
        big = op.matrix
        for _ in rest:
            big = np.kron(big, np.eye(n, dtype=np.complex128))
        # big acts on modes ordered (i, j, *rest); permute axes to natural order
        order = [i, j] + rest
        perm = [order.index(m) for m in range(total_modes)]
        t = big.reshape((n,) * (2 * total_modes))
        t = np.transpose(t, perm + [total_modes + p for p in perm])
        dim = n**total_modes
        return MatrixOperator(t.reshape(dim, dim), total_modes, n, op.label)
    raise ValueError("embed supports 1- and 2-mode operators")


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Reduced state over ``keep`` (mode indices, original order preserved)."""
    keep = sorted(set(int(k) for k in (keep if np.iterable(keep) else [keep])))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(k < 0 or k >= rho.modes for k in keep):
        raise ValueError(f"keep {keep} outside 0..{rho.modes - 1}")
    n, modes = rho.cutoff, rho.modes
    t = rho.matrix.reshape((n,) * (2 * modes))
    traced = [m for m in range(modes) if m not in keep]
    for m in sorted(traced, reverse=True):
        t = np.trace(t, axis1=m, axis2=t.ndim // 2 + m)
    k = len(keep)
    return DensityOperator(t.reshape(n**k, n**k), k, n)


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Hermitian matrix square root with eigenvalue clamping at 0."""
    w, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a, b, norm_tol: float = 1e-6) -> float:
    """Uhlmann fidelity Tr[√(√σ ρ √σ)]²; reduces to |⟨a|b⟩|² for pure states."""
    _check_same_space(a, b)
    for s in (a, b):
        if isinstance(s, FockVector):
            if abs(s.norm() - 1.0) > norm_tol:
                raise NormalizationError(f"state norm {s.norm()} not within {norm_tol} of 1")
        else:
            if abs(s.trace() - 1.0) > norm_tol:
                raise NormalizationError(f"trace {s.trace()} not within {norm_tol} of 1")
    if isinstance(a, FockVector) and isinstance(b, FockVector):
        return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
    if isinstance(a, FockVector):
        val = np.real(np.vdot(a.amplitudes, b.matrix @ a.amplitudes))
        return float(min(1.0, max(0.0, val)))
    if isinstance(b, FockVector):
        return fidelity(b, a, norm_tol)
    sq = _sqrtm_psd(b.matrix)
    inner = _sqrtm_psd(sq @ a.matrix @ sq)
    return float(min(1.0, np.real(np.trace(inner)) ** 2))
