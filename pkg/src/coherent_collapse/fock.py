"""Truncated Fock-space kernel.

States live on a tensor product of truncated single-mode spaces, flattened
in C order over ``dims``.  Single-mode operators are available as dense
matrices (:class:`LadderAlgebra`); multimode ladder actions are matrix-free
(:func:`lower`, :func:`raise_`).  General operators are handled through
:class:`scipy.sparse.linalg.LinearOperator`, which already provides adjoint,
sum, scalar multiple and composition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator

NORM_TOL = 1e-12
COHERENT_GUARD = 0.5
# expect/variance accept states that drifted this far from unit norm
_EXPECT_NORM_TOL = 1e-9


class DimensionMismatch(ValueError):
    pass


class TruncationRiskError(ValueError):
    """Requested state would put too much weight near the truncation edge."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVector:
    """Amplitudes over a truncated occupation-number basis.

    ``amplitudes`` is flat (C order over ``dims``) and read-only.
    """

    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        amps = _readonly(np.asarray(self.amplitudes).reshape(-1))
        if amps.size != int(np.prod(dims)):
            raise DimensionMismatch(
                f"{amps.size} amplitudes do not fit dims {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) < NORM_TOL

    def normalized(self) -> StateVector:
        nrm = self.norm()
        if nrm == 0.0 or not np.isfinite(nrm):
            raise ValueError("cannot normalize a zero or non-finite state")
        return StateVector(self.amplitudes / nrm, self.dims)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def top_level_mass(self) -> np.ndarray:
        """Probability on the highest retained level, one entry per mode."""
        return top_level_mass(self.amplitudes, self.dims)

    def leakage(self) -> float:
        return float(self.top_level_mass().max())

    def __matmul__(self, other: StateVector) -> complex:
        # <self|other>
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def top_level_mass(vec: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    probs = np.abs(np.reshape(vec, dims)) ** 2
    total = probs.sum()
    out = np.empty(len(dims))
    for k in range(len(dims)):
        out[k] = np.take(probs, -1, axis=k).sum()
    return out / total if total > 0 else out


# --- single-mode algebra ---------------------------------------------------

@dataclass(frozen=True)
class LadderAlgebra:
    """Dense ladder operators for one mode truncated to ``n_max`` levels."""

    n_max: int
    omega: float
    a: np.ndarray = field(repr=False)
    adag: np.ndarray = field(repr=False)
    number: np.ndarray = field(repr=False)
    hamiltonian: np.ndarray = field(repr=False)

    @property
    def dims(self) -> tuple[int]:
        return (self.n_max,)

    def commutator(self) -> np.ndarray:
        return self.a @ self.adag - self.adag @ self.a

    def quadrature(self) -> np.ndarray:
        """a + a^dagger (proportional to position)."""
        return self.a + self.adag


def make_algebra(n_max: int, omega: float = 1.0) -> LadderAlgebra:
    if int(n_max) != n_max or n_max < 2:
        raise ValueError(f"n_max must be an integer >= 2, got {n_max}")
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    n_max = int(n_max)
    levels = np.arange(n_max)
    a = np.diag(np.sqrt(levels[1:]).astype(np.complex128), k=1)
    adag = a.conj().T.copy()
    num = np.diag(levels.astype(np.complex128))
    ham = np.diag(omega * (levels + 0.5)).astype(np.complex128)
    for m in (a, adag, num, ham):
        m.setflags(write=False)
    return LadderAlgebra(n_max, float(omega), a, adag, num, ham)


# --- matrix-free multimode actions -----------------------------------------

def _sqrt_levels(n: int) -> np.ndarray:
    return np.sqrt(np.arange(1, n, dtype=float))


def lower(vec: np.ndarray, dims: Sequence[int], mode: int = 0) -> np.ndarray:
    """Apply the annihilation operator of ``mode`` to a flat amplitude vector."""
    t = np.reshape(vec, dims)
    out = np.zeros_like(t)
    n = dims[mode]
    shape = [1] * len(dims)
    shape[mode] = n - 1
    src = [slice(None)] * len(dims)
    dst = [slice(None)] * len(dims)
    src[mode] = slice(1, None)
    dst[mode] = slice(0, n - 1)
    out[tuple(dst)] = t[tuple(src)] * _sqrt_levels(n).reshape(shape)
    return out.reshape(-1)


def raise_(vec: np.ndarray, dims: Sequence[int], mode: int = 0) -> np.ndarray:
    """Apply the (truncated) creation operator of ``mode``."""
    t = np.reshape(vec, dims)
    out = np.zeros_like(t)
    n = dims[mode]
    shape = [1] * len(dims)
    shape[mode] = n - 1
    src = [slice(None)] * len(dims)
    dst = [slice(None)] * len(dims)
    src[mode] = slice(0, n - 1)
    dst[mode] = slice(1, None)
    out[tuple(dst)] = t[tuple(src)] * _sqrt_levels(n).reshape(shape)
    return out.reshape(-1)


def occupation_grid(dims: Sequence[int], mode: int) -> np.ndarray:
    """Flat vector of the occupation number of ``mode`` for each basis index."""
    shape = [1] * len(dims)
    shape[mode] = dims[mode]
    grid = np.broadcast_to(np.arange(dims[mode]).reshape(shape), tuple(dims))
    return grid.reshape(-1).astype(float)


def mode_operator(dims: Sequence[int], mode: int, kind: str) -> LinearOperator:
    """Matrix-free ``a``, ``adag`` or ``n`` for one mode of a product space."""
    dims = tuple(dims)
    size = int(np.prod(dims))
    if kind == "a":
        mv, rmv = (lambda v: lower(v, dims, mode)), (lambda v: raise_(v, dims, mode))
    elif kind == "adag":
        mv, rmv = (lambda v: raise_(v, dims, mode)), (lambda v: lower(v, dims, mode))
    elif kind == "n":
        occ = occupation_grid(dims, mode)
        mv = rmv = lambda v: occ * np.ravel(v)
    else:
        raise ValueError(f"unknown ladder kind {kind!r}")
    return LinearOperator((size, size), matvec=mv, rmatvec=rmv,
                          dtype=np.complex128)


def as_operator(op) -> LinearOperator:
    if isinstance(op, LinearOperator):
        return op
    return aslinearoperator(np.asarray(op, dtype=np.complex128))


def apply(op, vec: np.ndarray) -> np.ndarray:
    if isinstance(op, np.ndarray):
        return op @ vec
    return as_operator(op).matvec(vec).reshape(-1)


# --- states ----------------------------------------------------------------

def basis_state(occupations: Sequence[int] | int,
                dims: Sequence[int] | int) -> StateVector:
    occ = (occupations,) if np.isscalar(occupations) else tuple(occupations)
    dims = (dims,) if np.isscalar(dims) else tuple(dims)
    if len(occ) != len(dims):
        raise DimensionMismatch("occupations and dims differ in length")
    amps = np.zeros(dims, dtype=np.complex128)
    amps[occ] = 1.0
    return StateVector(amps.reshape(-1), dims)


def vacuum(dims: Sequence[int] | int) -> StateVector:
    dims = (dims,) if np.isscalar(dims) else tuple(dims)
    return basis_state((0,) * len(dims), dims)


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Untruncated-normalization coefficients exp(-|a|^2/2) a^n/sqrt(n!)."""
    c = np.empty(n_max, dtype=np.complex128)
    c[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, n_max):
        c[n] = c[n - 1] * alpha / np.sqrt(n)
    return c


def coherent_state(alpha: complex, n_max: int) -> StateVector:
    """Coherent state |alpha>, truncated to ``n_max`` levels and renormalized.

    Raises :class:`TruncationRiskError` unless ``|alpha|^2 <= n_max / 2``;
    the discarded Poisson tail is then below 1e-10 for n_max >= 24.
    """
    if abs(alpha) ** 2 > COHERENT_GUARD * n_max:
        raise TruncationRiskError(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds n_max/2 = {n_max / 2:.3g}")
    c = coherent_amplitudes(complex(alpha), n_max)
    return StateVector(c / np.linalg.norm(c), (n_max,))


def coherent_residual_bound(alpha: complex, n_max: int) -> float:
    """Exact ||(a - alpha)|alpha>|| for the renormalized truncated state.

    Truncation only breaks the eigen-relation on the top level, so the
    residual is |alpha| times the top amplitude.
    """
    c = coherent_amplitudes(complex(alpha), n_max)
    return float(abs(alpha) * abs(c[-1]) / np.linalg.norm(c))


def product_state(states: Sequence[StateVector]) -> StateVector:
    amps = np.ones(1, dtype=np.complex128)
    dims: tuple[int, ...] = ()
    for s in states:
        amps = np.kron(amps, s.amplitudes)
        dims += s.dims
    return StateVector(amps, dims)


def superpose(states: Sequence[StateVector],
              weights: Sequence[complex]) -> StateVector:
    """Normalized sum of ``weights[i] * states[i]``."""
    if len(states) != len(weights) or not states:
        raise ValueError("need one weight per state")
    dims = states[0].dims
    total = np.zeros(states[0].dim, dtype=np.complex128)
    for s, w in zip(states, weights):
        if s.dims != dims:
            raise DimensionMismatch("superposed states have different dims")
        total += w * s.amplitudes
    return StateVector(total, dims).normalized()


# --- moments ---------------------------------------------------------------

def _check(psi: StateVector, op) -> None:
    shape = op.shape
    if shape != (psi.dim, psi.dim):
        raise DimensionMismatch(
            f"operator shape {shape} does not act on dimension {psi.dim}")
    if abs(psi.norm() - 1.0) > _EXPECT_NORM_TOL:
        raise ValueError(f"state is not normalized (norm {psi.norm():.3e})")


def expect(psi: StateVector, op) -> complex:
    """<psi|O|psi>."""
    _check(psi, op)
    return complex(np.vdot(psi.amplitudes, apply(op, psi.amplitudes)))


def _centered(psi: StateVector, op) -> np.ndarray:
    v = apply(op, psi.amplitudes)
    return v - np.vdot(psi.amplitudes, v) * psi.amplitudes


def covariance(psi: StateVector, op1, op2) -> complex:
    """<(O1^dagger - <O1>^*)(O2 - <O2>)>."""
    _check(psi, op1)
    _check(psi, op2)
    return complex(np.vdot(_centered(psi, op1), _centered(psi, op2)))


def variance(psi: StateVector, op) -> float:
    """<(O^dagger - <O>^*)(O - <O>)>, which is real and nonnegative."""
    _check(psi, op)
    d = _centered(psi, op)
    return float(np.vdot(d, d).real)


def fidelity(psi: StateVector, phi: StateVector) -> float:
    """|<psi|phi>|^2 for normalized states (global phase ignored)."""
    if psi.dims != phi.dims:
        raise DimensionMismatch("fidelity between different spaces")
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2
                 / (psi.norm() ** 2 * phi.norm() ** 2))
