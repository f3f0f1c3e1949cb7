"""Harmonic oscillator reducing toward annihilation-operator eigenstates.

Physical-measure equation (hbar = 1, abar = Re<a>):

    d|psi> = [-iH - l^2/2 (a^dag - abar) a + l^2/2 (a - abar) abar] |psi> dt
             + l (a - abar) |psi> dB

The drift is split into the diagonal generator ``-iH - l^2 N / 2`` and the
state-dependent remainder ``l^2 abar a - l^2 abar^2 / 2``.  Under the
exponential scheme a coherent state therefore stays exactly coherent, with
eigenvalue alpha * exp(-i w t - l^2 t / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from . import stats
from .fock import (StateVector, TruncationRiskError, coherent_amplitudes,
                   coherent_state, superpose)
from .sde_engine import (DiffusionModel, Ensemble, observable_recorder,
                         run_ensemble)


@dataclass(frozen=True)
class OscillatorParams:
    omega: float = 1.0
    lam: float = 0.5
    n_max: int = 128

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError("n_max must be an integer >= 2")


# --- single-mode vector kernels --------------------------------------------

def _lower(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    out[:-1] = v[1:] * np.sqrt(np.arange(1, v.size))
    return out


def mean_a(v: np.ndarray) -> complex:
    return complex(np.vdot(v, _lower(v)))


def abar(v: np.ndarray) -> float:
    """Half the quadrature expectation, (1/2)<a + a^dag> = Re<a>."""
    return mean_a(v).real


@dataclass(frozen=True)
class _ReductionDrift:
    lam: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        av = _lower(v)
        b = np.vdot(v, av).real
        return self.lam ** 2 * (b * av - 0.5 * b * b * v)


@dataclass(frozen=True)
class _ReductionChannel:
    lam: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        av = _lower(v)
        return self.lam * (av - np.vdot(v, av).real * v)


@dataclass(frozen=True)
class _LinearChannel:
    lam: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.lam * _lower(v)


def _zero(v: np.ndarray) -> np.ndarray:
    return np.zeros_like(v)


def _generator(p: OscillatorParams) -> np.ndarray:
    n = np.arange(p.n_max)
    return -1j * p.omega * (n + 0.5) - 0.5 * p.lam ** 2 * n


def build_model(p: OscillatorParams) -> DiffusionModel:
    """Nonlinear (physical-measure) oscillator reduction model."""
    return DiffusionModel(
        dims=(p.n_max,), drift=_ReductionDrift(p.lam),
        channels=(_ReductionChannel(p.lam),), generator=_generator(p),
        params={"kind": "oscillator", "omega": p.omega, "lam": p.lam,
                "n_max": p.n_max})


def build_linear_model(p: OscillatorParams) -> DiffusionModel:
    """Linear form d|phi> = (-iH - l^2 N/2)|phi> dt + l a |phi> dX under Q."""
    return DiffusionModel(
        dims=(p.n_max,), drift=_zero, channels=(_LinearChannel(p.lam),),
        generator=_generator(p),
        params={"kind": "oscillator-linear", "omega": p.omega, "lam": p.lam,
                "n_max": p.n_max})


def full_drift_matrix(p: OscillatorParams, state: StateVector) -> np.ndarray:
    """Dense drift operator of the physical equation at ``state`` (for checks)."""
    n = p.n_max
    a = np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)
    ad = a.conj().T
    b = abar(state.amplitudes)
    eye = np.eye(n)
    ham = p.omega * (ad @ a + 0.5 * eye)
    return (-1j * ham - 0.5 * p.lam ** 2 * (ad - b * eye) @ a
            + 0.5 * p.lam ** 2 * (a - b * eye) * b)


# --- observables -----------------------------------------------------------

def number(s: StateVector) -> float:
    v = s.amplitudes
    return float(np.dot(np.arange(v.size), np.abs(v) ** 2))


def energy(s: StateVector, omega: float = 1.0) -> float:
    return omega * (number(s) + 0.5)


def variance_a(s: StateVector) -> float:
    """V^a = <a^dag a> - |<a>|^2."""
    return max(number(s) - abs(mean_a(s.amplitudes)) ** 2, 0.0)


def covariance_quadrature_a(s: StateVector) -> complex:
    """V^{(a + a^dag), a} = <a a> + <N> - <a + a^dag><a>."""
    v = s.amplitudes
    av = _lower(v)
    aa = complex(np.vdot(v, _lower(av)))
    ma = complex(np.vdot(v, av))
    return aa + number(s) - 2.0 * ma.real * ma


def projection(s: StateVector, n: int) -> float:
    return float(abs(s.amplitudes[n]) ** 2)


def annihilation_mean(s: StateVector) -> complex:
    return mean_a(s.amplitudes)


def fit_coherent(s: StateVector) -> tuple[complex, float]:
    """Best-fit coherent eigenvalue <a> and the fidelity to that coherent state."""
    alpha = mean_a(s.amplitudes)
    ref = coherent_amplitudes(alpha, s.dim)
    ref /= np.linalg.norm(ref)
    return alpha, float(abs(np.vdot(ref, s.amplitudes)) ** 2)


def coherent_fidelity(s: StateVector) -> float:
    return fit_coherent(s)[1]


def standard_recorder(p: OscillatorParams, projections: Sequence[int] = (0, 1),
                      extra: dict | None = None):
    """Records H, N, Va, Cov (complex), a (complex) and P<n> for each n."""
    obs = {
        "H": partial(energy, omega=p.omega),
        "N": number,
        "Va": variance_a,
        "Cov": covariance_quadrature_a,
        "a": annihilation_mean,
    }
    for n in projections:
        obs[f"P{n}"] = partial(projection, n=n)
    if extra:
        obs.update(extra)
    return observable_recorder(obs)


# --- initial states --------------------------------------------------------

def branch_superposition(alphas: Sequence[complex], weights: Sequence[complex],
                         n_max: int) -> StateVector:
    return superpose([coherent_state(a, n_max) for a in alphas], weights)


def default_timestep(p: OscillatorParams, tau_r: float) -> float:
    return min(0.01 / p.omega, 0.01 * tau_r)


# --- timescales ------------------------------------------------------------

def reduction_timescale(va0: float, cov0: complex, lam: float) -> float:
    """tau_R = V^a_0 / (l^2 |V^{(a+a^dag),a}_0|^2); infinite when l = 0."""
    if lam == 0:
        return math.inf
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if abs(cov0) == 0:
        raise ValueError("zero quadrature covariance: timescale undefined")
    return va0 / (lam ** 2 * abs(cov0) ** 2)


def reduction_timescale_physical(n0: float, lam: float, omega: float,
                                 hbar: float = 1.0) -> tuple[float, float]:
    """(tau_R, energy loss rate) = (1 / (l^2 N0), l^2 w N0 hbar)."""
    if lam == 0:
        return math.inf, 0.0
    if lam < 0 or n0 <= 0:
        raise ValueError("need lambda > 0 and N0 > 0")
    lam2 = lam * lam
    return 1.0 / (lam2 * n0), lam2 * omega * n0 * hbar


# --- audits ----------------------------------------------------------------

def _times(records) -> np.ndarray:
    if not len(records):
        raise ValueError("empty ensemble")
    return records[0].times


def energy_drift_audit(records, omega: float, lam: float, *,
                       n_sigma: float = 3.0, checkpoints: int = 8
                       ) -> stats.AuditReport:
    """E[H_t] = H_0 - l^2 w int_0^t E[N_u] du, checked pathwise."""
    t = _times(records)
    H = stats.stack_series(records, "H")
    N = stats.stack_series(records, "N")
    integral, quad_err = stats.cumulative_integral(N, t)
    resid = H - H[:, :1] + lam ** 2 * omega * integral
    atol = lam ** 2 * omega * quad_err.max(axis=0) + 1e-9 * np.abs(H).max()
    mean_h = H.mean(axis=0)
    predicted = H[:, 0].mean() - lam ** 2 * omega * integral.mean(axis=0)
    return stats.zero_mean_check(
        "oscillator energy drift", resid, t, atol=atol, n_sigma=n_sigma,
        checkpoints=checkpoints,
        extra={"mean_H_final": mean_h[-1], "predicted_H_final": predicted[-1]})


def variance_supermartingale_audit(records, lam: float, *, n_sigma: float = 3.0,
                                   checkpoints: int = 8) -> stats.AuditReport:
    """E[V^a] non-increasing and equal to its integral form."""
    t = _times(records)
    V = stats.stack_series(records, "Va")
    C2 = np.abs(stats.stack_series(records, "Cov")) ** 2
    iv, ev = stats.cumulative_integral(V, t)
    ic, ec = stats.cumulative_integral(C2, t)
    resid = V - V[:, :1] + lam ** 2 * (iv + ic)
    atol = lam ** 2 * (ev + ec).max(axis=0) + 1e-9 * max(V.max(), 1.0)
    integral = stats.zero_mean_check(
        "variance integral form", resid, t, atol=atol, n_sigma=n_sigma,
        checkpoints=checkpoints)
    mono = monotone_check(V, t, n_sigma=n_sigma, checkpoints=checkpoints)
    verdict = stats.PASS if (integral.passed and mono["passed"]) else stats.FAIL
    mean_v, _ = stats.mean_and_se(V)
    return stats.AuditReport(
        "variance super-martingale", verdict, integral.max_deviation_se,
        {"integral_form": integral.to_dict(), "monotone": mono,
         "mean_Va_initial": mean_v[0], "mean_Va_final": mean_v[-1]})


def monotone_check(values: np.ndarray, t: np.ndarray, *, n_sigma: float = 3.0,
                   checkpoints: int = 8) -> dict:
    """Paired test that the ensemble mean never rises between checkpoints."""
    idx = np.concatenate([[0], stats.checkpoint_indices(len(t), checkpoints)])
    steps = values[:, idx[1:]] - values[:, idx[:-1]]
    mean, se = stats.mean_and_se(steps)
    se = np.nan_to_num(se)
    tol = 1e-12 * max(np.abs(values).max(), 1.0)
    crit = stats.critical_value(n_sigma, len(values))
    rises = mean - (0.0 if np.isnan(crit) else crit) * se - tol
    return {"passed": bool(np.all(rises <= 0)), "times": t[idx],
            "mean_increments": mean, "increment_se": se}


def projection_martingale_audit(records, n: int, lam: float, *,
                                n_sigma: float = 3.0, checkpoints: int = 8
                                ) -> stats.AuditReport:
    """P_n,t - l^2 int [(n+1) P_{n+1} - n P_n] du has constant mean."""
    t = _times(records)
    P = stats.stack_series(records, f"P{n}")
    P1 = stats.stack_series(records, f"P{n + 1}")
    integral, err = stats.cumulative_integral((n + 1) * P1 - n * P, t)
    resid = P - P[:, :1] - lam ** 2 * integral
    atol = lam ** 2 * err.max(axis=0) + 1e-12
    mean_p, _ = stats.mean_and_se(P)
    return stats.zero_mean_check(
        f"projection martingale P{n}", resid, t, atol=atol, n_sigma=n_sigma,
        checkpoints=checkpoints,
        extra={"mean_P_initial": mean_p[0], "mean_P_final": mean_p[-1]})


def energy_ceiling_check(records, omega: float, branch_alphas: Sequence[complex],
                         n_sigma: float = 5.0) -> dict:
    """max_t <H>_t may not exceed the most energetic initial branch."""
    H = stats.stack_series(records, "H")
    top = max(omega * (abs(a) ** 2 + 0.5) for a in branch_alphas)
    mean, se = stats.mean_and_se(H)
    se = np.nan_to_num(se)
    worst = float(H.max())
    return {"passed": bool(np.all(mean <= top + n_sigma * se + 1e-9)),
            "ceiling": top, "max_path_energy": worst}


# --- Born-rule experiment --------------------------------------------------

@dataclass
class BornResult:
    branch_alphas: list[complex]
    expected: np.ndarray
    counts: np.ndarray
    frequencies: np.ndarray
    standard_errors: np.ndarray
    unclassified: int
    n_paths: int
    T: float
    dt: float
    ensemble: Ensemble | None = field(default=None, repr=False)

    @property
    def unclassified_fraction(self) -> float:
        return self.unclassified / self.n_paths

    @property
    def audit_ok(self) -> bool:
        return self.unclassified_fraction <= 0.05

    def z_scores(self) -> np.ndarray:
        se = np.sqrt(self.expected * (1 - self.expected) / self.n_paths)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.frequencies - self.expected) / se
        return np.where(se > 0, z, np.where(self.frequencies == self.expected, 0.0, np.inf))

    def to_dict(self) -> dict:
        return stats._jsonable({
            "branch_alphas": [complex(a) for a in self.branch_alphas],
            "expected": self.expected, "counts": self.counts,
            "frequencies": self.frequencies,
            "standard_errors": self.standard_errors,
            "unclassified": self.unclassified, "n_paths": self.n_paths,
            "T": self.T, "dt": self.dt})


def evolved_alpha(alpha0: complex, p: OscillatorParams, t: float) -> complex:
    return alpha0 * np.exp((-1j * p.omega - 0.5 * p.lam ** 2) * t)


def classify_branch(s: StateVector, candidates: Sequence[np.ndarray],
                    threshold: float = 0.9) -> int:
    """Index of the most faithful candidate coherent state, or -1."""
    fids = [abs(np.vdot(c, s.amplitudes)) ** 2 for c in candidates]
    best = int(np.argmax(fids))
    return best if fids[best] >= threshold else -1


def born_probability_experiment(p: OscillatorParams,
                                branch_alphas: Sequence[complex],
                                weights: Sequence[complex], n_paths: int,
                                seed: int, *, T: float | None = None,
                                dt: float | None = None, workers: int = 1,
                                threshold: float = 0.9,
                                recorder=None) -> BornResult:
    """Run the reduction from a superposition of coherent branches and count outcomes.

    Default horizon is 8 tau_R with tau_R = 1 / (l^2 <N>_0).
    """
    if n_paths < 100:
        raise ValueError("the Born experiment needs at least 100 paths")
    if len(branch_alphas) != len(weights) or len(branch_alphas) < 2:
        raise ValueError("need matching branch eigenvalues and weights")
    for i, a in enumerate(branch_alphas):
        for b in branch_alphas[i + 1:]:
            if math.exp(-abs(a - b) ** 2) >= 1e-6:
                raise ValueError("branch states are not approximately orthogonal")
    psi0 = branch_superposition(branch_alphas, weights, p.n_max)
    if T is None or dt is None:
        n0 = number(psi0)
        tau = reduction_timescale_physical(n0, p.lam, p.omega)[0] if n0 > 0 else 1.0
        T = 8 * tau if T is None else T
        dt = default_timestep(p, tau) if dt is None else dt
    ens = run_ensemble(psi0, build_model(p), T, dt, seed, n_paths,
                       recorder, workers=workers)
    return tabulate_branches(ens, p, branch_alphas, weights, T, dt, threshold)


def tabulate_branches(ens: Ensemble, p: OscillatorParams,
                      branch_alphas: Sequence[complex], weights: Sequence[complex],
                      T: float, dt: float, threshold: float = 0.9) -> BornResult:
    """Classify each final state against the decayed branch coherent states."""
    cands = []
    for a in branch_alphas:
        c = coherent_amplitudes(evolved_alpha(a, p, T), p.n_max)
        cands.append(c / np.linalg.norm(c))
    labels = np.array([classify_branch(r.final_state, cands, threshold) for r in ens])
    n_paths = len(labels)
    w2 = np.abs(np.asarray(weights, dtype=complex)) ** 2
    counts = np.array([(labels == i).sum() for i in range(len(branch_alphas))])
    freqs = counts / n_paths
    se = np.sqrt(freqs * (1 - freqs) / n_paths)
    return BornResult(list(branch_alphas), w2 / w2.sum(), counts, freqs, se,
                      int((labels < 0).sum()), n_paths, T, dt, ens)
