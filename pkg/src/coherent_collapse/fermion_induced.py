"""Field coherence induced by a classical current, and the induced reduction demo.

The matter sector is represented only by its current eigenvalue j(p, t).
In the interaction picture

    H_int(t) = sum_p (2 w_p)^(-1/2) [ j*(p,t) e^{-i w_p t} a_p + j(p,t) e^{i w_p t} a_p^dag ]

is linear in the ladder operators, so the vacuum is displaced into the
coherent state with eigenvalue

    alpha(p, t) = -i int_0^t j(p,u) e^{i w_p u} / sqrt(2 w_p) du.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from . import stats
from .field_lattice import LatticeConfig, lattice_coherent, run_field_ensemble
from .fock import (COHERENT_GUARD, StateVector, TruncationRiskError, fidelity,
                   superpose, top_level_mass, vacuum)
from .sde_engine import Ensemble, TruncationLeakageError, step_count

QUAD_ATOL = 1e-10


class QuadratureError(RuntimeError):
    pass


class IndistinguishableBranches(ValueError):
    pass


def _gaussian(t: float, center: float, width: float) -> float:
    return math.exp(-0.5 * ((t - center) / width) ** 2)


def _constant(t: float, center: float, width: float) -> float:
    return 1.0


def _sine_squared(t: float, center: float, width: float) -> float:
    # smooth compact bump of full width 2*width around center
    s = (t - center) / width
    return math.cos(0.5 * math.pi * s) ** 2 if abs(s) < 1 else 0.0


ENVELOPES: dict[str, Callable[[float, float, float], float]] = {
    "gaussian": _gaussian,
    "constant": _constant,
    "sine2": _sine_squared,
}


@dataclass(frozen=True)
class CurrentPulse:
    """j(p, t) = amplitude * profile[p] * envelope(t) on the window [0, t_end].

    ``profile`` holds one complex weight per active mode of the lattice
    config the pulse is used with.
    """

    amplitude: float = 1.0
    profile: tuple[complex, ...] = (1.0,)
    envelope: str = "gaussian"
    center: float = 1.5
    width: float = 0.5
    t_end: float = 3.0

    def __post_init__(self):
        if self.envelope not in ENVELOPES:
            raise ValueError(f"unknown envelope {self.envelope!r}; "
                             f"choose from {sorted(ENVELOPES)}")
        if self.width <= 0 or self.t_end < 0:
            raise ValueError("pulse width must be positive and window non-negative")
        object.__setattr__(self, "profile", tuple(complex(w) for w in self.profile))

    def __call__(self, mode: int, t: float) -> complex:
        if t < 0 or t > self.t_end:
            return 0j
        env = ENVELOPES[self.envelope](t, self.center, self.width)
        return self.amplitude * self.profile[mode] * env

    def scaled(self, factor: float) -> CurrentPulse:
        from dataclasses import replace
        return replace(self, amplitude=self.amplitude * factor)

    def l2_norm(self, mode: int) -> float:
        val, _ = quad(lambda u: abs(self(mode, u)) ** 2, 0.0, self.t_end,
                      points=_breakpoints(self, self.t_end), limit=200)
        return math.sqrt(val)


def hermiticity_violation(pulse: CurrentPulse, config: LatticeConfig) -> float:
    """max |j(-p) - j(p)*| over active mode pairs (0 when none can be compared)."""
    index = {k: j for j, k in enumerate(config.modes)}
    worst = 0.0
    for k, j in index.items():
        partner = index.get((-k) % config.L)
        if partner is not None:
            worst = max(worst, abs(pulse.profile[partner] - pulse.profile[j].conjugate()))
    return worst


def _breakpoints(pulse: CurrentPulse, upper: float) -> list[float] | None:
    pts = [p for p in (pulse.center - pulse.width, pulse.center,
                       pulse.center + pulse.width) if 0 < p < upper]
    return pts or None


def alpha_of(pulse: CurrentPulse, mode: int, t: float, omega: float) -> complex:
    """Coherent eigenvalue driven into ``mode`` (frequency ``omega``) by time t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if omega <= 0:
        raise ValueError("omega must be positive")
    upper = min(t, pulse.t_end)
    if upper == 0:
        return 0j

    def part(fn):
        val, abserr, info, *msg = quad(fn, 0.0, upper, epsabs=QUAD_ATOL, epsrel=0.0,
                                       limit=500, points=_breakpoints(pulse, upper),
                                       full_output=1)
        if msg and "roundoff" not in msg[0]:
            raise QuadratureError(msg[0])
        if abserr > QUAD_ATOL:
            raise QuadratureError(f"quadrature error estimate {abserr:.2e} exceeds tolerance")
        return val

    re = part(lambda u: (pulse(mode, u) * np.exp(1j * omega * u)).real)
    im = part(lambda u: (pulse(mode, u) * np.exp(1j * omega * u)).imag)
    return -1j * complex(re, im) / math.sqrt(2 * omega)


def alphas_of(pulse: CurrentPulse, config: LatticeConfig, t: float) -> np.ndarray:
    return np.array([alpha_of(pulse, j, t, w) for j, w in enumerate(config.omegas)])


def _apply_mode_matrix(v: np.ndarray, dims: tuple[int, ...], mode: int,
                       m: np.ndarray) -> np.ndarray:
    t = np.moveaxis(v.reshape(dims), mode, 0)
    out = np.tensordot(m, t, axes=(1, 0))
    return np.moveaxis(out, 0, mode).reshape(-1)


def evolve_with_current(pulse: CurrentPulse, config: LatticeConfig, T: float,
                        dt: float, psi0: StateVector | None = None, *,
                        t0: float = 0.0, leakage_threshold: float = 1e-6
                        ) -> StateVector:
    """Interaction-picture state after the current acts on [t0, t0 + T].

    Each step applies exp(-i dt H_int(t_mid)) mode by mode; this is a
    displacement by the midpoint-rule increment of alpha.  Reduction terms
    are not included (pure current-driven evolution).
    """
    dims = config.dims
    psi = psi0 if psi0 is not None else vacuum(dims)
    if psi.dims != dims:
        raise ValueError(f"state dims {psi.dims} do not match config dims {dims}")
    n = step_count(T, dt)
    for j, w in enumerate(config.omegas):
        a_final = alpha_of(pulse, j, t0 + T, w) - alpha_of(pulse, j, t0, w)
        if abs(a_final) ** 2 > COHERENT_GUARD * config.n_max:
            raise TruncationRiskError(
                f"|alpha|^2 = {abs(a_final) ** 2:.3g} exceeds guard for n_max={config.n_max}")
    n_max = config.n_max
    a = np.diag(np.sqrt(np.arange(1, n_max)), 1).astype(complex)
    adag = a.conj().T
    v = psi.amplitudes.copy()
    for k in range(n):
        tm = t0 + (k + 0.5) * dt
        for j, w in enumerate(config.omegas):
            jm = pulse(j, tm)
            if jm == 0:
                continue
            beta = -1j * dt * jm * np.exp(1j * w * tm) / math.sqrt(2 * w)
            u = expm(beta * adag - np.conj(beta) * a)
            v = _apply_mode_matrix(v, dims, j, u)
    mass = float(top_level_mass(v, dims).max())
    if mass > leakage_threshold:
        raise TruncationLeakageError(n, mass, leakage_threshold)
    return StateVector(v, dims)


def coherence_residual(psi: StateVector, config: LatticeConfig, mode: int,
                       alpha: complex) -> float:
    """||(a_p - alpha) psi||."""
    from .fock import lower
    v = psi.amplitudes
    return float(np.linalg.norm(lower(v, config.dims, mode) - alpha * v))


# --- induced reduction -------------------------------------------------------

UNREDUCED = "unreduced"


@dataclass
class InducedReductionResult:
    labels: tuple[str, str]
    expected: np.ndarray
    counts: np.ndarray
    unreduced: int
    n_paths: int
    branch_alphas: np.ndarray
    classifications: list[str] = field(default_factory=list)
    ensemble: Ensemble | None = None

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_paths

    @property
    def standard_errors(self) -> np.ndarray:
        p = self.expected
        return np.sqrt(p * (1 - p) / self.n_paths)

    def matches_born(self, n_sigma: float = 3.0) -> bool:
        if self.unreduced:
            return False
        se = self.standard_errors
        dev = np.abs(self.frequencies - self.expected)
        return bool(np.all(np.where(se > 0, dev <= n_sigma * se, dev == 0)))

    def to_dict(self) -> dict:
        return stats._jsonable({
            "labels": list(self.labels), "expected": self.expected,
            "counts": self.counts, "frequencies": self.frequencies,
            "standard_errors": self.standard_errors, "unreduced": self.unreduced,
            "n_paths": self.n_paths,
            "branch_alphas": [[complex(a) for a in row] for row in self.branch_alphas],
            "matches_born": self.matches_born()})


def decayed_alphas(alphas: np.ndarray, config: LatticeConfig, t: float) -> np.ndarray:
    """Eigenvalues of a reduced coherent branch after time t of field dynamics."""
    w = config.omegas
    return alphas * np.exp(-(1j * w + config.lam ** 2 / (4 * w)) * t)


def induced_reduction_demo(pulse_a: CurrentPulse, pulse_b: CurrentPulse,
                           weights: Sequence[complex], lam: float,
                           config: LatticeConfig, T: float, dt: float,
                           n_paths: int, seed: int, *, pulse_dt: float = 0.01,
                           threshold: float = 0.9, workers: int = 1,
                           max_overlap: float = 0.01) -> InducedReductionResult:
    """Branch frequencies for a superposition of two current-displaced fields.

    The two branches are produced by evolving the vacuum under each pulse,
    superposed with ``weights`` and then run under the reduction dynamics
    with coupling ``lam``.  A path counts for a branch when its final
    fidelity with that branch's decayed coherent state reaches ``threshold``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    cfg = config.replace(lam=float(lam))
    t_pulse = max(pulse_a.t_end, pulse_b.t_end)
    branches = [evolve_with_current(p, cfg, t_pulse, pulse_dt) for p in (pulse_a, pulse_b)]
    overlap = abs(branches[0] @ branches[1]) ** 2
    if overlap >= max_overlap:
        raise IndistinguishableBranches(
            f"branch overlap {overlap:.3g} >= {max_overlap}; pulses are not distinguishable")
    w = np.asarray(weights, dtype=complex)
    if w.shape != (2,) or not np.any(w):
        raise ValueError("need two weights, not both zero")
    alphas = np.stack([alphas_of(p, cfg, t_pulse) for p in (pulse_a, pulse_b)])
    live = [i for i in range(2) if w[i] != 0]
    psi = superpose([branches[i] for i in live], list(w[live]))
    expected = np.abs(w) ** 2 / np.sum(np.abs(w) ** 2)
    ens = run_field_ensemble(cfg, psi, T, dt, seed, n_paths, None, workers=workers,
                             site_wise=False)
    candidates = [lattice_coherent(cfg, decayed_alphas(alphas[i], cfg, T)) for i in range(2)]
    labels = ("A", "B")
    counts = np.zeros(2, dtype=int)
    classes = []
    for rec in ens:
        fids = [fidelity(rec.final_state, c) for c in candidates]
        k = int(np.argmax(fids))
        if fids[k] >= threshold:
            counts[k] += 1
            classes.append(labels[k])
        else:
            classes.append(UNREDUCED)
    unreduced = classes.count(UNREDUCED)
    return InducedReductionResult(labels, expected, counts, unreduced, n_paths,
                                  alphas, classes, ens)
