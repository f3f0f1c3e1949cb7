"""Real scalar field on a periodic 1D lattice with per-site reduction noise.

Sites x = 0..L-1 (unit spacing), momenta p_k = 2 pi k / L folded into
(-pi, pi], dispersion w_p = sqrt(m^2 + p^2).  Only the ``modes`` listed in
the config are kept, each truncated to ``n_max`` levels.  The positive
frequency part is

    phi+(x) = sum_p (2 w_p L)^(-1/2) e^{i p x} a_p,      phi-(x) = phi+(x)^dag

and each site carries one channel beta_x = l (phi+(x) - <phi(x)>/2).  The
evolution is written in the Schroedinger picture: H0 = sum_p w_p N_p sits in
the drift and the site operators are time independent.

Because sum_x phi-(x) phi+(x) = sum_p N_p / (2 w_p) on the lattice, the
simultaneous update separates an exact diagonal generator from the
state-dependent remainder, as in the oscillator model.  Sequential and
random-permutation orderings advance one site at a time with plain
site-wise Euler-Maruyama increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, partial
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator

from . import stats
from .fock import StateVector, lower, occupation_grid, raise_, vacuum
from .noise import trajectory_key
from .sde_engine import (DiffusionModel, Ensemble, observable_recorder,
                         run_ensemble, run_trajectory, step_count)

DEFAULT_DIM_CAP = 10 ** 5


class Ordering(str, Enum):
    SIMULTANEOUS = "simultaneous"
    SEQUENTIAL = "sequential"
    RANDOM = "random"


@dataclass(frozen=True)
class OrderingPolicy:
    """How site increments are applied within one global time step.

    ``RANDOM`` draws a fresh site permutation every step, keyed by
    (``seed``, step), so it is reproducible and shared across trajectories.
    """

    kind: Ordering = Ordering.SIMULTANEOUS
    seed: int = 0

    @classmethod
    def simultaneous(cls) -> OrderingPolicy:
        return cls(Ordering.SIMULTANEOUS)

    @classmethod
    def sequential(cls) -> OrderingPolicy:
        return cls(Ordering.SEQUENTIAL)

    @classmethod
    def random_permutation(cls, seed: int) -> OrderingPolicy:
        return cls(Ordering.RANDOM, seed)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> OrderingPolicy:
        return cls(Ordering(text.strip().lower()), seed)

    def order(self, n_sites: int, step: int) -> np.ndarray:
        if self.kind is Ordering.RANDOM:
            gen = np.random.Generator(np.random.Philox(
                key=trajectory_key(self.seed, step)))
            return gen.permutation(n_sites)
        return np.arange(n_sites)


@dataclass(frozen=True)
class LatticeConfig:
    L: int = 4
    mass: float = 1.0
    lam: float = 1.0
    n_max: int = 6
    modes: tuple[int, ...] = (0, 1)
    ordering: OrderingPolicy = field(default_factory=OrderingPolicy)
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("need at least one site")
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        modes = tuple(int(k) % self.L for k in self.modes)
        if not modes or len(set(modes)) != len(modes):
            raise ValueError("active modes must be distinct and non-empty")
        object.__setattr__(self, "modes", modes)
        if self.n_max ** len(modes) > self.dim_cap:
            raise ValueError(
                f"tensor dimension {self.n_max}^{len(modes)} exceeds cap {self.dim_cap}")
        if np.any(self.omegas <= 0):
            raise ValueError("every active mode needs w_p > 0 (massless zero mode?)")

    @property
    def momenta(self) -> np.ndarray:
        k = np.asarray(self.modes)
        folded = (k + self.L // 2) % self.L - self.L // 2
        folded = np.where(folded == -self.L / 2, self.L // 2, folded)
        return 2 * np.pi * folded / self.L

    @property
    def omegas(self) -> np.ndarray:
        return np.sqrt(self.mass ** 2 + self.momenta ** 2)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.n_max,) * len(self.modes)

    def replace(self, **changes) -> LatticeConfig:
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class FieldOperators:
    """Matrix-free field operators for one lattice configuration."""

    config: LatticeConfig

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return self.config.dims

    @cached_property
    def profile(self) -> np.ndarray:
        """f[x, j] = (2 w_j L)^(-1/2) e^{i p_j x}; phi+(x) = sum_j f[x, j] a_j."""
        c = self.config
        x = np.arange(c.L)[:, None]
        return np.exp(1j * c.momenta[None, :] * x) / np.sqrt(2 * c.omegas * c.L)

    @cached_property
    def occupations(self) -> np.ndarray:
        return np.stack([occupation_grid(self.dims, j)
                         for j in range(len(self.dims))])

    @cached_property
    def free_energy_diag(self) -> np.ndarray:
        """H0 = sum_p w_p N_p (vacuum energy dropped)."""
        return self.config.omegas @ self.occupations

    @cached_property
    def number_diag(self) -> np.ndarray:
        return self.occupations.sum(axis=0)

    @cached_property
    def site_sum_diag(self) -> np.ndarray:
        """sum_x phi-(x) phi+(x) = sum_p N_p / (2 w_p)."""
        return (1.0 / (2 * self.config.omegas)) @ self.occupations

    def lowered(self, v: np.ndarray) -> np.ndarray:
        return np.stack([lower(v, self.dims, j) for j in range(len(self.dims))])

    def raised(self, v: np.ndarray) -> np.ndarray:
        return np.stack([raise_(v, self.dims, j) for j in range(len(self.dims))])

    def phi_plus(self, v: np.ndarray) -> np.ndarray:
        """Rows phi+(x) v for every site, shape (L, dim)."""
        return self.profile @ self.lowered(v)

    def phi_minus(self, v: np.ndarray) -> np.ndarray:
        return self.profile.conj() @ self.raised(v)

    def phi_mean(self, v: np.ndarray) -> np.ndarray:
        """<phi(x)> = 2 Re <phi+(x)>, real by construction."""
        return 2.0 * (self.phi_plus(v) @ v.conj()).real

    def site_operator(self, x: int, kind: str) -> LinearOperator:
        """``phi+``, ``phi-`` or ``phi`` at site x as a LinearOperator."""
        f = self.profile[x]
        plus = lambda v: f @ self.lowered(np.ravel(v))
        minus = lambda v: f.conj() @ self.raised(np.ravel(v))
        size = int(np.prod(self.dims))
        if kind == "phi+":
            mv, rmv = plus, minus
        elif kind == "phi-":
            mv, rmv = minus, plus
        elif kind == "phi":
            mv = rmv = lambda v: plus(v) + minus(v)
        else:
            raise ValueError(f"unknown site operator {kind!r}")
        return LinearOperator((size, size), matvec=mv, rmatvec=rmv,
                              dtype=np.complex128)

    def mode_operator(self, j: int, kind: str) -> LinearOperator:
        from .fock import mode_operator
        return mode_operator(self.dims, j, kind)


# --- model -----------------------------------------------------------------

@dataclass(frozen=True)
class _FieldDrift:
    ops: FieldOperators
    lam: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        pp = self.ops.phi_plus(v)
        c = (pp @ v.conj()).real                  # <phi(x)> / 2
        return self.lam ** 2 * (c @ pp - 0.5 * np.dot(c, c) * v)


@dataclass(frozen=True)
class _FieldDiffusion:
    ops: FieldOperators
    lam: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        pp = self.ops.phi_plus(v)
        c = (pp @ v.conj()).real
        return self.lam * (pp - c[:, None] * v[None, :])


@dataclass(frozen=True)
class _SiteChannel:
    ops: FieldOperators
    lam: float
    x: int

    def __call__(self, v: np.ndarray) -> np.ndarray:
        pp = self.ops.profile[self.x] @ self.ops.lowered(v)
        return self.lam * (pp - np.vdot(v, pp).real * v)


def build_field_model(c: LatticeConfig) -> DiffusionModel:
    """Simultaneous-update field reduction model with one channel per site."""
    ops = FieldOperators(c)
    gen = -1j * ops.free_energy_diag - 0.5 * c.lam ** 2 * ops.site_sum_diag
    return DiffusionModel(
        dims=c.dims, drift=_FieldDrift(ops, c.lam),
        channels=tuple(_SiteChannel(ops, c.lam, x) for x in range(c.L)),
        generator=gen, diffusion=_FieldDiffusion(ops, c.lam),
        params={"kind": "field", "L": c.L, "mass": c.mass, "lam": c.lam,
                "n_max": c.n_max, "modes": list(c.modes)})


@dataclass(frozen=True)
class SiteStepper:
    """Global step built from per-site Euler-Maruyama updates.

    Sites are advanced in the order given by ``ordering``; for the
    simultaneous policy all site increments are evaluated on the same state
    and summed.  The free rotation exp(-i H0 dt) is applied exactly after
    the site updates.
    """

    ops: FieldOperators
    lam: float
    ordering: OrderingPolicy

    def site_increment(self, v: np.ndarray, x: int, dt: float, db: float
                       ) -> np.ndarray:
        lam2 = self.lam ** 2
        f = self.ops.profile[x]
        pp = f @ self.ops.lowered(v)
        c = np.vdot(v, pp).real
        centered = pp - c * v
        mp = f.conj() @ self.ops.raised(pp)       # phi-(x) phi+(x) v
        alpha_v = -0.5 * lam2 * (mp - c * pp) + 0.5 * lam2 * c * centered
        return dt * alpha_v + db * self.lam * centered

    def __call__(self, v: np.ndarray, dt: float, dB: np.ndarray, step: int
                 ) -> np.ndarray:
        L = self.ops.config.L
        order = self.ordering.order(L, step)
        if self.ordering.kind is Ordering.SIMULTANEOUS:
            total = np.zeros_like(v)
            for x in order:
                total += self.site_increment(v, x, dt, dB[x])
            v = _normalize(v + total, step)
        else:
            for x in order:
                v = _normalize(v + self.site_increment(v, x, dt, dB[x]), step)
        return np.exp(-1j * self.ops.free_energy_diag * dt) * v


def _normalize(v: np.ndarray, step: int) -> np.ndarray:
    from .sde_engine import IntegratorBlowup
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or nrm == 0:
        raise IntegratorBlowup(step)
    return v / nrm


def site_stepper(c: LatticeConfig, ordering: OrderingPolicy | None = None
                 ) -> SiteStepper:
    return SiteStepper(FieldOperators(c), c.lam, ordering or c.ordering)


# --- observables -----------------------------------------------------------

def _diag_expect(s: StateVector, diag: np.ndarray) -> float:
    return float(np.dot(diag, np.abs(s.amplitudes) ** 2))


def field_energy(s: StateVector, ops: FieldOperators) -> float:
    return _diag_expect(s, ops.free_energy_diag)


def total_number(s: StateVector, ops: FieldOperators) -> float:
    return _diag_expect(s, ops.number_diag)


def mode_number(s: StateVector, ops: FieldOperators, j: int) -> float:
    return _diag_expect(s, ops.occupations[j])


def mode_mean(s: StateVector, ops: FieldOperators, j: int) -> complex:
    v = s.amplitudes
    return complex(np.vdot(v, lower(v, ops.dims, j)))


def mode_variance(s: StateVector, ops: FieldOperators, j: int) -> float:
    return max(mode_number(s, ops, j) - abs(mode_mean(s, ops, j)) ** 2, 0.0)


def field_mode_covariance_sq(s: StateVector, ops: FieldOperators, j: int) -> float:
    """sum_x |<(phi(x) - <phi(x)>) a_j>|^2."""
    v = s.amplitudes
    av = lower(v, ops.dims, j)
    phi_v = ops.phi_plus(v) + ops.phi_minus(v)       # (L, dim)
    corr = phi_v.conj() @ av                         # <phi(x) a_j>
    mean_phi = (phi_v @ v.conj()).real
    cov = corr - mean_phi * np.vdot(v, av)
    return float(np.sum(np.abs(cov) ** 2))


def field_mean(s: StateVector, ops: FieldOperators) -> np.ndarray:
    return ops.phi_mean(s.amplitudes)


def field_recorder(c: LatticeConfig, extra: dict | None = None):
    """H (free energy), N, and per mode j: N<j>, V<j> and S<j>."""
    ops = FieldOperators(c)
    obs = {"H": partial(field_energy, ops=ops), "N": partial(total_number, ops=ops)}
    for j in range(len(c.modes)):
        obs[f"N{j}"] = partial(mode_number, ops=ops, j=j)
        obs[f"V{j}"] = partial(mode_variance, ops=ops, j=j)
        obs[f"S{j}"] = partial(field_mode_covariance_sq, ops=ops, j=j)
    if extra:
        obs.update(extra)
    return observable_recorder(obs)


def energy_number_recorder(c: LatticeConfig):
    ops = FieldOperators(c)
    return observable_recorder({"H": partial(field_energy, ops=ops),
                                "N": partial(total_number, ops=ops)})


# --- states ----------------------------------------------------------------

def lattice_vacuum(c: LatticeConfig) -> StateVector:
    return vacuum(c.dims)


def fock_excitation(c: LatticeConfig, occupations: Sequence[int]) -> StateVector:
    from .fock import basis_state
    return basis_state(tuple(occupations), c.dims)


def lattice_coherent(c: LatticeConfig, alphas: Sequence[complex]) -> StateVector:
    """Product of single-mode coherent states, one eigenvalue per active mode."""
    from .fock import coherent_state, product_state
    return product_state([coherent_state(a, c.n_max) for a in alphas])


# --- ensembles -------------------------------------------------------------

def run_field_ensemble(c: LatticeConfig, psi0: StateVector, T: float, dt: float,
                       seed: int, n_paths: int, recorder=None, *,
                       ordering: OrderingPolicy | None = None,
                       workers: int = 1, **kwargs) -> Ensemble:
    """Ensemble under ``ordering`` (default: the config's policy).

    The simultaneous policy uses the generic exponential scheme unless
    ``site_wise=True`` asks for the per-site Euler stepper.
    """
    ordering = ordering or c.ordering
    site_wise = kwargs.pop("site_wise", ordering.kind is not Ordering.SIMULTANEOUS)
    model = build_field_model(c)
    stepper = site_stepper(c, ordering) if site_wise else None
    return run_ensemble(psi0, model, T, dt, seed, n_paths, recorder,
                        workers=workers, stepper=stepper, **kwargs)


# --- audits ----------------------------------------------------------------

def energy_loss_audit(records, lam: float, *, omega_min: float | None = None,
                      frozen_horizon: float | None = None,
                      n_sigma: float = 3.0, checkpoints: int = 8
                      ) -> stats.AuditReport:
    """E[<H>_t] = <H>_0 - l^2/2 int E[<N>] du, plus the frozen-state slope.

    The frozen check compares E[<H>_t] with <H>_0 - l^2 <N>_0 t / 2 at
    ``frozen_horizon`` (default: the first checkpoint).  Since E[<N>_u]
    decays no faster than rate l^2 / (2 w_min), the neglected second-order
    term is at most l^4 <N>_0 t^2 / (8 w_min); it is added to the allowance
    when ``omega_min`` is given.
    """
    t = records[0].times
    H = stats.stack_series(records, "H")
    N = stats.stack_series(records, "N")
    integral, err = stats.cumulative_integral(N, t)
    resid = H - H[:, :1] + 0.5 * lam ** 2 * integral
    atol = 0.5 * lam ** 2 * err.max(axis=0) + 1e-9 * max(np.abs(H).max(), 1.0)
    exact = stats.zero_mean_check("field energy loss", resid, t, atol=atol,
                                  n_sigma=n_sigma, checkpoints=checkpoints)
    if frozen_horizon is None:
        k = stats.checkpoint_indices(len(t), checkpoints)[0]
    else:
        k = int(np.argmin(np.abs(t - frozen_horizon)))
    drop = H[:, k] - H[:, 0]
    m, se = stats.mean_and_se(drop)
    n0 = float(N[:, 0].mean())
    predicted = -0.5 * lam ** 2 * n0 * t[k]
    remainder = 0.0 if omega_min is None else lam ** 4 * n0 * t[k] ** 2 / (8 * omega_min)
    excess = max(abs(m - predicted) - remainder, 0.0)
    frozen_z = excess / se if se > 0 else (0.0 if excess <= 1e-12 else math.inf)
    frozen_ok = bool(frozen_z <= stats.critical_value(n_sigma, len(drop)))
    slope, slope_se = m / t[k], se / t[k]
    verdict = stats.PASS if exact.passed and frozen_ok else stats.FAIL
    return stats.AuditReport(
        "field energy loss", verdict, max(exact.max_deviation_se, frozen_z),
        {"integral_form": exact.to_dict(), "frozen_horizon": t[k],
         "frozen_slope": slope, "frozen_slope_se": slope_se,
         "predicted_slope": -0.5 * lam ** 2 * n0, "frozen_z": frozen_z,
         "frozen_passed": frozen_ok, "frozen_remainder_bound": remainder,
         "initial_number": n0})


def field_reduction_timescale(c: LatticeConfig, mode_numbers: Sequence[float]) -> float:
    """1 / (l^2 sum_p N0(p) / (2 w_p))."""
    rate = c.lam ** 2 * float(np.dot(mode_numbers, 1.0 / (2 * c.omegas)))
    return math.inf if rate == 0 else 1.0 / rate


def mode_variance_audit(records, c: LatticeConfig, j: int, *,
                        n_sigma: float = 3.0, checkpoints: int = 8
                        ) -> stats.AuditReport:
    """Super-martingale property of V[a_p] and its integral form."""
    from .oscillator import monotone_check
    t = records[0].times
    V = stats.stack_series(records, f"V{j}")
    S = stats.stack_series(records, f"S{j}")
    w = c.omegas[j]
    iv, ev = stats.cumulative_integral(V, t)
    is_, es = stats.cumulative_integral(S, t)
    lam2 = c.lam ** 2
    resid = V - V[:, :1] + lam2 / (2 * w) * iv + lam2 * is_
    atol = (lam2 / (2 * w) * ev + lam2 * es).max(axis=0) + 1e-9 * max(V.max(), 1.0)
    integral = stats.zero_mean_check(f"mode {j} variance integral form", resid, t,
                                     atol=atol, n_sigma=n_sigma,
                                     checkpoints=checkpoints)
    mono = monotone_check(V, t, n_sigma=n_sigma, checkpoints=checkpoints)
    mean_v, _ = stats.mean_and_se(V)
    fitted = _efold_time(mean_v, t)
    n0 = [float(stats.stack_series(records, f"N{i}")[:, 0].mean())
          for i in range(len(c.modes))]
    verdict = stats.PASS if integral.passed and mono["passed"] else stats.FAIL
    return stats.AuditReport(
        f"mode {j} variance super-martingale", verdict,
        integral.max_deviation_se,
        {"integral_form": integral.to_dict(), "monotone": mono,
         "fitted_efold_time": fitted,
         "predicted_timescale": field_reduction_timescale(c, n0),
         "mean_V_initial": mean_v[0], "mean_V_final": mean_v[-1]})


def _efold_time(mean: np.ndarray, t: np.ndarray) -> float:
    if mean[0] <= 0:
        return math.nan
    below = np.nonzero(mean <= mean[0] / math.e)[0]
    if not below.size:
        return math.inf
    k = below[0]
    # linear interpolation of the crossing
    y0, y1 = mean[k - 1], mean[k]
    target = mean[0] / math.e
    return float(t[k - 1] + (y0 - target) / (y0 - y1) * (t[k] - t[k - 1]))


def vacuum_stability_audit(c: LatticeConfig, T: float, dt: float, seed: int,
                           n_paths: int, *, psi0: StateVector | None = None,
                           orderings: Sequence[OrderingPolicy] | None = None,
                           tol: float = 1e-10, workers: int = 1
                           ) -> stats.AuditReport:
    """<N>_t stays at zero from the lattice vacuum, for every ordering."""
    vac = lattice_vacuum(c)
    if psi0 is not None and not np.allclose(psi0.amplitudes, vac.amplitudes * (
            psi0.amplitudes[0] / vac.amplitudes[0] if vac.amplitudes[0] else 1), atol=1e-14):
        raise ValueError("vacuum stability audit requires the lattice vacuum")
    orderings = orderings or [OrderingPolicy.simultaneous(),
                              OrderingPolicy.sequential(),
                              OrderingPolicy.random_permutation(seed)]
    worst = 0.0
    per = {}
    for pol in orderings:
        ens = run_field_ensemble(c, vac, T, dt, seed, n_paths,
                                 energy_number_recorder(c), ordering=pol,
                                 workers=workers)
        m = float(max(np.abs(r["N"]).max() for r in ens))
        per[pol.kind.value] = m
        worst = max(worst, m)
    verdict = stats.PASS if worst <= tol else stats.FAIL
    return stats.AuditReport("vacuum stability", verdict, 0.0 if worst <= tol else math.inf,
                             {"max_number": worst, "tolerance": tol,
                              "per_ordering": per, "n_paths": n_paths,
                              "steps": step_count(T, dt)})


# --- foliation (ordering) comparison ---------------------------------------

@dataclass
class FoliationReport:
    lams: np.ndarray
    deltas: np.ndarray
    delta_ses: np.ndarray
    means: dict
    exponent: float
    exponent_se: float
    indistinguishable_from_zero: bool
    inconclusive: bool
    policies: tuple[str, str]
    tolerance: float = 0.0

    @property
    def passed(self) -> bool:
        if self.indistinguishable_from_zero:
            return True
        if not np.isfinite(self.exponent):
            return False
        se = self.exponent_se if np.isfinite(self.exponent_se) else 0.0
        return self.exponent + 2 * se >= 3 - self.tolerance

    def to_dict(self) -> dict:
        return stats._jsonable({
            "lams": self.lams, "deltas": self.deltas, "delta_ses": self.delta_ses,
            "means": self.means, "exponent": self.exponent,
            "exponent_se": self.exponent_se,
            "indistinguishable_from_zero": self.indistinguishable_from_zero,
            "inconclusive": self.inconclusive, "policies": list(self.policies),
            "passed": self.passed})


def final_value(rec, name: str) -> float:
    return float(np.real(rec[name][-1]))


def foliation_comparison(c: LatticeConfig, psi0: StateVector,
                         observable: str | Callable[[StateVector], float],
                         T: float, dt: float, lam_list: Sequence[float],
                         seed: int, n_paths: int, *,
                         policies: tuple[OrderingPolicy, OrderingPolicy] | None = None,
                         n_sigma: float = 3.0, tolerance: float = 0.0
                         ) -> FoliationReport:
    """Ordering dependence of E[<O>_T] as a function of the coupling.

    Both policies see identical increments per (path, step, site), so the
    per-path differences are paired.  The fitted exponent of Delta(l) is
    expected to be >= 3 (no second-order ordering dependence).
    """
    lams = np.asarray(lam_list, dtype=float)
    if len(lams) < 3:
        raise ValueError("need at least three coupling values")
    ratios = lams[1:] / lams[:-1]
    if np.any(lams <= 0) or not np.allclose(ratios, ratios[0], rtol=1e-6):
        raise ValueError("couplings must be positive and geometrically spaced")
    policies = policies or (OrderingPolicy.simultaneous(), OrderingPolicy.sequential())
    if callable(observable):
        obs_fn = observable
    else:
        obs_fn = _named_field_observable(c, observable)
    n_steps = step_count(T, dt)
    deltas, ses, means = [], [], {p.kind.value: [] for p in policies}
    from .noise import NoisePath
    for lam in lams:
        cl = c.replace(lam=float(lam))
        model = build_field_model(cl)
        vals = np.empty((len(policies), n_paths))
        for i in range(n_paths):
            inc = NoisePath(seed, i, c.L, dt).increments(n_steps)
            for k, pol in enumerate(policies):
                rec = run_trajectory(psi0, model, T, dt, seed, None,
                                     trajectory=i, increments=inc,
                                     stepper=site_stepper(cl, pol),
                                     leakage_threshold=1.0)
                vals[k, i] = float(np.real(obs_fn(rec.final_state)))
        for k, pol in enumerate(policies):
            means[pol.kind.value].append(float(vals[k].mean()))
        d = vals[0] - vals[1]
        m, se = stats.mean_and_se(d)
        deltas.append(abs(float(m)))
        ses.append(float(se) if np.isfinite(se) else 0.0)
    deltas, ses = np.array(deltas), np.array(ses)
    resolved = deltas > n_sigma * ses
    zero_like = bool(not resolved.any())
    from .sde_engine import _fit_loglog
    use = resolved & (deltas > 0)
    if use.sum() >= 2:
        exponent, exponent_se = _fit_loglog(lams[use], deltas[use], ses[use])
    else:
        exponent, exponent_se = math.nan, math.nan
    inconclusive = bool(not zero_like and use.sum() < len(lams))
    return FoliationReport(lams, deltas, ses, means, exponent, exponent_se,
                           zero_like, inconclusive,
                           tuple(p.kind.value for p in policies), tolerance)


def _named_field_observable(c: LatticeConfig, name: str):
    ops = FieldOperators(c)
    table = {"H": partial(field_energy, ops=ops), "N": partial(total_number, ops=ops)}
    for j in range(len(c.modes)):
        table[f"N{j}"] = partial(mode_number, ops=ops, j=j)
        table[f"V{j}"] = partial(mode_variance, ops=ops, j=j)
    if name not in table:
        raise KeyError(f"unknown field observable {name!r}")
    return table[name]
