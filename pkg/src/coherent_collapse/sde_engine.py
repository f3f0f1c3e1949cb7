"""Ito integrator for state diffusions d|psi> = a(psi) dt + sum_k b_k(psi) dB_k.

Two stepping schemes share one update formula:

``"euler"``
    Plain Euler-Maruyama, ``psi + (G psi + drift(psi)) dt + sum_k b_k(psi) dB_k``.
``"exponential"``
    The state-independent diagonal part ``G`` of the drift (free rotation
    and number damping) is exponentiated exactly around the same
    Euler-Maruyama increment of the remaining terms.

Both are weak order one.  The exponential form keeps large-occupation
rotations exact, which plain Euler cannot do at practical step sizes.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .fock import StateVector, top_level_mass
from .noise import NoisePath, coarsen

SCHEMES = ("exponential", "euler")
FORMS = ("physical", "linear")

Recorder = Callable[[int, float, StateVector], Mapping[str, complex]]


class IntegratorBlowup(FloatingPointError):
    def __init__(self, step: int, message: str = "non-finite amplitudes"):
        super().__init__(f"step {step}: {message}")
        self.step = step


class TruncationLeakageError(RuntimeError):
    def __init__(self, step: int, leakage: float, threshold: float):
        super().__init__(
            f"step {step}: top-level mass {leakage:.3e} exceeds {threshold:.1e}")
        self.step = step
        self.leakage = leakage


@dataclass(frozen=True)
class DiffusionModel:
    """Drift and diffusion functionals acting on flat amplitude vectors.

    ``drift(v)`` returns the state-dependent part of ``alpha(psi) psi``;
    ``generator`` holds the diagonal of the state-independent part, so the
    full drift is ``generator * v + drift(v)``.  ``channels[k](v)`` returns
    ``beta_k(psi) psi``.  All callables must be picklable for process pools.
    """

    dims: tuple[int, ...]
    drift: Callable[[np.ndarray], np.ndarray]
    channels: tuple[Callable[[np.ndarray], np.ndarray], ...]
    generator: np.ndarray | None = None
    diffusion: Callable[[np.ndarray], np.ndarray] | None = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.channels:
            raise ValueError("a diffusion model needs at least one channel")
        object.__setattr__(self, "dims", tuple(self.dims))
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.generator is not None:
            g = np.asarray(self.generator, dtype=np.complex128).reshape(-1)
            if g.size != self.dim:
                raise ValueError("generator diagonal does not match dims")
            g.setflags(write=False)
            object.__setattr__(self, "generator", g)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    def diffuse(self, v: np.ndarray) -> np.ndarray:
        """Stack of all channel actions, shape (channel_count, dim)."""
        if self.diffusion is not None:
            return self.diffusion(v)
        return np.stack([ch(v) for ch in self.channels])


def _increment(model: DiffusionModel, v: np.ndarray, dt: float,
               dB: np.ndarray, scheme: str) -> np.ndarray:
    new = v + dt * model.drift(v) + dB @ model.diffuse(v)
    if model.generator is None:
        return new
    if scheme == "exponential":
        return np.exp(model.generator * dt) * new
    if scheme == "euler":
        return new + dt * model.generator * v
    raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def _as_increments(increments, k: int) -> np.ndarray:
    dB = np.asarray(increments, dtype=float).reshape(-1)
    if dB.size != k:
        raise ValueError(f"expected {k} increments, got {dB.size}")
    return dB


def step_physical_raw(v: np.ndarray, model: DiffusionModel, dt: float,
                      dB: np.ndarray, scheme: str = "exponential",
                      renormalize: bool = True, step: int = 0) -> np.ndarray:
    new = _increment(model, v, dt, dB, scheme)
    nrm = np.linalg.norm(new)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise IntegratorBlowup(step)
    return new / nrm if renormalize else new


def step_physical(psi: StateVector, model: DiffusionModel, dt: float,
                  increments, scheme: str = "exponential",
                  renormalize: bool = True) -> StateVector:
    """One normalized step of the physical-measure (nonlinear) equation."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return psi
    dB = _as_increments(increments, model.channel_count)
    return StateVector(
        step_physical_raw(psi.amplitudes, model, dt, dB, scheme, renormalize),
        psi.dims)


def step_linear(phi: StateVector, model: DiffusionModel, dt: float,
                increments, scheme: str = "exponential"
                ) -> tuple[StateVector, float]:
    """One step of the linear equation under Q-Brownian increments.

    Returns the unnormalized state and its weight <phi|phi>.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return phi, phi.norm() ** 2
    dB = _as_increments(increments, model.channel_count)
    new = _increment(model, phi.amplitudes, dt, dB, scheme)
    if not np.all(np.isfinite(new)):
        raise IntegratorBlowup(0)
    weight = float(np.vdot(new, new).real)
    return StateVector(new, phi.dims), weight


@dataclass
class TrajectoryRecord:
    """Recorded observables along one noise path."""

    times: np.ndarray
    series: dict[str, np.ndarray]
    final_state: StateVector
    leakage: np.ndarray
    weights: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        lengths = {k: len(v) for k, v in self.series.items()}
        lengths["leakage"] = len(self.leakage)
        if self.weights is not None:
            lengths["weights"] = len(self.weights)
        bad = {k: m for k, m in lengths.items() if m != n}
        if bad:
            raise ValueError(f"series lengths {bad} differ from {n} time points")

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[name]

    def columns(self, names: Sequence[str] | None = None) -> list[str]:
        out = ["t"]
        for name in names or list(self.series):
            if np.iscomplexobj(self.series[name]):
                out += [f"{name}.re", f"{name}.im"]
            else:
                out.append(name)
        return out

    def to_csv(self, target=None, names: Sequence[str] | None = None) -> str:
        """Header row plus one row per time point; returns the text."""
        names = list(names or self.series)
        cols = [self.times]
        for name in names:
            s = self.series[name]
            cols += [s.real, s.imag] if np.iscomplexobj(s) else [s]
        buf = io.StringIO()
        buf.write(",".join(self.columns(names)) + "\n")
        for row in zip(*cols):
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        text = buf.getvalue()
        _write_text(target, text)
        return text

    def to_json_dict(self) -> dict:
        def enc(arr):
            if np.iscomplexobj(arr):
                return {"re": arr.real.tolist(), "im": arr.imag.tolist()}
            return np.asarray(arr, dtype=float).tolist()

        return {
            "metadata": self.metadata,
            "times": enc(self.times),
            "series": {k: enc(v) for k, v in self.series.items()},
            "leakage": enc(self.leakage),
            "weights": None if self.weights is None else enc(self.weights),
        }

    def to_json(self, target=None) -> str:
        text = json.dumps(self.to_json_dict(), sort_keys=True)
        _write_text(target, text)
        return text

    @classmethod
    def from_json_dict(cls, data: dict, dims: Sequence[int] = (1,)
                       ) -> TrajectoryRecord:
        """Rebuild the recorded series; the final state is not serialized."""
        def dec(x):
            if isinstance(x, dict):
                return np.asarray(x["re"]) + 1j * np.asarray(x["im"])
            return np.asarray(x, dtype=float)

        dims = tuple(dims)
        placeholder = np.zeros(int(np.prod(dims)), dtype=complex)
        placeholder[0] = 1.0
        return cls(
            times=dec(data["times"]),
            series={k: dec(v) for k, v in data["series"].items()},
            final_state=StateVector(placeholder, dims),
            leakage=dec(data["leakage"]),
            weights=None if data.get("weights") is None else dec(data["weights"]),
            metadata=dict(data.get("metadata", {})),
        )


def _write_text(target, text: str) -> None:
    if target is None:
        return
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)


def step_count(T: float, dt: float) -> int:
    if not T > 0:
        raise ValueError("T must be positive")
    if not (0 < dt <= T):
        raise ValueError("need 0 < dt <= T")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def run_trajectory(psi0: StateVector, model: DiffusionModel, T: float,
                   dt: float, seed: int, recorder: Recorder | None = None, *,
                   trajectory: int = 0, form: str = "physical",
                   scheme: str = "exponential",
                   leakage_threshold: float = 1e-6,
                   increments: np.ndarray | None = None,
                   stepper: Callable | None = None) -> TrajectoryRecord:
    """Integrate one trajectory and record observables at every step.

    ``form="linear"`` integrates the unnormalized equation under Q-Brownian
    increments (``model`` must then be the linear model); the recorder sees
    the normalized state and the weight series <phi|phi> is kept.
    ``increments`` overrides the seeded noise (shape (n_steps, channels)).
    ``stepper(v, dt, dB, step)`` replaces the generic physical step, which
    lets lattice models impose their own site ordering.
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}")
    if form == "physical" and not psi0.is_normalized:
        raise ValueError("physical trajectories start from a normalized state")
    if psi0.dims != model.dims:
        raise ValueError(f"state dims {psi0.dims} != model dims {model.dims}")
    n_steps = step_count(T, dt)
    k = model.channel_count
    if increments is None:
        increments = NoisePath(seed, trajectory, k, dt).increments(n_steps)
    elif increments.shape != (n_steps, k):
        raise ValueError(f"increments shape {increments.shape} != {(n_steps, k)}")

    dims = psi0.dims
    times = dt * np.arange(n_steps + 1)
    rows: list[Mapping[str, complex]] = []
    leakage = np.empty(n_steps + 1)
    weights = np.empty(n_steps + 1) if form == "linear" else None
    v = np.array(psi0.amplitudes)

    def observe(step: int, vec: np.ndarray) -> None:
        nrm = np.linalg.norm(vec)
        unit = vec / nrm if form == "linear" else vec
        if weights is not None:
            weights[step] = nrm ** 2
        leak = float(top_level_mass(unit, dims).max())
        leakage[step] = leak
        if leak > leakage_threshold:
            raise TruncationLeakageError(step, leak, leakage_threshold)
        if recorder is not None:
            rows.append(recorder(step, times[step], StateVector(unit, dims)))

    observe(0, v)
    for step in range(1, n_steps + 1):
        dB = increments[step - 1]
        if form == "linear":
            v = _increment(model, v, dt, dB, scheme)
            if not np.all(np.isfinite(v)):
                raise IntegratorBlowup(step)
        elif stepper is not None:
            v = stepper(v, dt, dB, step)
        else:
            v = step_physical_raw(v, model, dt, dB, scheme, step=step)
        observe(step, v)

    series: dict[str, np.ndarray] = {}
    if rows:
        for name in rows[0]:
            vals = [r[name] for r in rows]
            series[name] = np.asarray(vals)
    final = v / np.linalg.norm(v) if form == "linear" else v
    meta = {"seed": int(seed), "trajectory": int(trajectory), "dt": float(dt),
            "T": float(T), "form": form, "scheme": scheme}
    return TrajectoryRecord(times, series, StateVector(final, dims), leakage,
                            weights, meta)


def observable_recorder(observables: Mapping[str, Callable[[StateVector], complex]]
                        ) -> Recorder:
    """Recorder evaluating named state functionals at every step."""
    return _ObservableRecorder(dict(observables))


@dataclass(frozen=True)
class _ObservableRecorder:
    observables: dict

    def __call__(self, step: int, t: float, state: StateVector) -> dict:
        return {name: fn(state) for name, fn in self.observables.items()}


# --- discretization order --------------------------------------------------

@dataclass
class WeakOrderReport:
    dts: np.ndarray
    means: np.ndarray
    standard_errors: np.ndarray
    errors: np.ndarray             # vs reference, or successive differences
    error_ses: np.ndarray
    exponent: float
    exponent_se: float
    reference: float | None
    inconclusive: bool

    def within(self, lo: float, hi: float) -> bool:
        return (not self.inconclusive) and lo <= self.exponent <= hi

    def to_dict(self) -> dict:
        return {
            "dts": self.dts.tolist(), "means": self.means.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "errors": self.errors.tolist(), "error_ses": self.error_ses.tolist(),
            "exponent": self.exponent, "exponent_se": self.exponent_se,
            "reference": self.reference, "inconclusive": self.inconclusive,
        }


def _fit_loglog(x: np.ndarray, y: np.ndarray, yse: np.ndarray
                ) -> tuple[float, float]:
    """Slope of log y against log x with its standard error."""
    lx, ly = np.log(x), np.log(y)
    if len(x) == 2:
        return float((ly[0] - ly[1]) / (lx[0] - lx[1])), math.nan
    if np.all(yse > 0):
        # delta method: sd(log y) ~ se / y
        coef, cov = np.polyfit(lx, ly, 1, w=y / yse, cov="unscaled")
        return float(coef[0]), float(np.sqrt(cov[0, 0]))
    if len(x) > 3:
        coef, cov = np.polyfit(lx, ly, 1, cov=True)
        return float(coef[0]), float(np.sqrt(cov[0, 0]))
    return float(np.polyfit(lx, ly, 1)[0]), math.nan


def weak_order_check(model: DiffusionModel, psi0: StateVector,
                     observable: Callable[[StateVector], float], T: float,
                     seed: int, n_paths: int, dt_list: Sequence[float], *,
                     reference: float | None = None,
                     scheme: str = "exponential",
                     significance: float = 3.0) -> WeakOrderReport:
    """Fit the weak convergence exponent of E[observable(psi_T)].

    Every path is driven by one fine Brownian path; coarser levels use its
    block sums, so level differences are strongly coupled.  Without an exact
    ``reference`` the exponent comes from successive level differences.
    """
    dts = np.asarray(dt_list, dtype=float)
    if len(dts) < 3:
        raise ValueError("need at least three step sizes")
    if not np.allclose(dts[:-1] / dts[1:], 2.0, rtol=1e-9):
        raise ValueError("each step size must halve the previous one")
    if n_paths < 2:
        raise ValueError("need at least two paths for standard errors")
    n_fine = step_count(T, dts[-1])
    values = np.empty((n_paths, len(dts)))
    for i in range(n_paths):
        fine = NoisePath(seed, i, model.channel_count, dts[-1]).increments(n_fine)
        for j, dt in enumerate(dts):
            inc = coarsen(fine, 2 ** (len(dts) - 1 - j))
            rec = run_trajectory(psi0, model, T, dt, seed, increments=inc,
                                 trajectory=i, scheme=scheme,
                                 leakage_threshold=1.0)
            values[i, j] = float(np.real(observable(rec.final_state)))
    n = n_paths
    means = values.mean(axis=0)
    ses = values.std(axis=0, ddof=1) / np.sqrt(n)
    if reference is not None:
        errs = np.abs(means - reference)
        err_ses = ses
        x = dts
    else:
        d = values[:, :-1] - values[:, 1:]
        errs = np.abs(d.mean(axis=0))
        err_ses = d.std(axis=0, ddof=1) / np.sqrt(n)
        x = dts[:-1]
    inconclusive = bool(np.any(errs <= significance * err_ses) or np.any(errs == 0))
    if np.any(errs == 0):
        exponent, exponent_se = math.nan, math.nan
    else:
        exponent, exponent_se = _fit_loglog(x, errs, err_ses)
    return WeakOrderReport(dts, means, ses, errs, err_ses, exponent,
                           exponent_se, reference, inconclusive)


# --- ensembles -------------------------------------------------------------

@dataclass
class Ensemble:
    """Trajectories sorted by index; failed indices map to their error text."""

    records: list[TrajectoryRecord]
    failures: dict[int, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


def _run_indexed(args) -> tuple[int, TrajectoryRecord | None, str | None]:
    index, psi0, model, T, dt, seed, recorder, kwargs = args
    try:
        rec = run_trajectory(psi0, model, T, dt, seed, recorder,
                             trajectory=index, **kwargs)
        return index, rec, None
    except (IntegratorBlowup, TruncationLeakageError) as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def run_ensemble(psi0: StateVector, model: DiffusionModel, T: float, dt: float,
                 seed: int, n_paths: int, recorder: Recorder | None = None, *,
                 workers: int = 1, first_index: int = 0,
                 on_error: str = "raise", **kwargs) -> Ensemble:
    """Run trajectories ``first_index .. first_index + n_paths - 1``.

    Each trajectory's noise is keyed by (seed, index), so the result does
    not depend on ``workers``.  With ``on_error="record"`` integrator
    blowups and leakage aborts are collected instead of raised.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if on_error not in ("raise", "record"):
        raise ValueError("on_error must be 'raise' or 'record'")
    jobs = [(first_index + i, psi0, model, T, dt, seed, recorder, kwargs)
            for i in range(n_paths)]
    if workers <= 1:
        results = [_run_indexed(j) for j in jobs]
    else:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_indexed, jobs, chunksize=max(1, n_paths // (4 * workers))))
    results.sort(key=lambda r: r[0])
    failures = {i: err for i, _, err in results if err is not None}
    if failures and on_error == "raise":
        i = min(failures)
        raise RuntimeError(f"trajectory {i} failed: {failures[i]}")
    return Ensemble([rec for _, rec, _ in results if rec is not None], failures)
