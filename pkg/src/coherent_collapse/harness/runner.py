"""Experiment orchestration, ensemble summaries and persisted artifacts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import fermion_induced as fi
from .. import field_lattice as fl
from .. import oscillator as osc
from .. import stats
from ..fock import StateVector, superpose
from ..sde_engine import run_ensemble, weak_order_check
from .config import ConfigError, PulseSection, RunConfig


# --- summaries -------------------------------------------------------------

@dataclass
class EnsembleSummary:
    experiment: str
    name: str
    n_paths: int
    times: np.ndarray | None = None
    means: dict[str, np.ndarray] = field(default_factory=dict)
    standard_errors: dict[str, np.ndarray | None] = field(default_factory=dict)
    branches: dict | None = None
    audits: list[stats.AuditReport] = field(default_factory=list)
    failures: dict[int, str] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if any(a.verdict == stats.FAIL for a in self.audits):
            return stats.FAIL
        if self.audits and all(a.verdict == stats.INCONCLUSIVE for a in self.audits):
            return stats.INCONCLUSIVE
        return stats.PASS

    @property
    def exit_code(self) -> int:
        return 1 if self.verdict == stats.FAIL else 0

    def to_dict(self) -> dict:
        return stats._jsonable({
            "experiment": self.experiment, "name": self.name,
            "n_paths": self.n_paths, "completed_paths": self.n_paths - len(self.failures),
            "times": self.times, "means": self.means,
            "standard_errors": self.standard_errors, "branches": self.branches,
            "audits": [a.to_dict() for a in self.audits],
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
            "verdict": self.verdict, "extras": self.extras})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def text(self) -> str:
        lines = [f"{self.name} ({self.experiment}): {self.n_paths} paths, "
                 f"{len(self.failures)} failed"]
        if self.branches:
            freqs = ", ".join(f"{l}: {f:.3f}" for l, f in
                              zip(self.branches["labels"], self.branches["frequencies"]))
            lines.append(f"branch frequencies: {freqs} "
                         f"(unclassified {self.branches['unclassified']})")
        lines += [a.text().splitlines()[0] for a in self.audits]
        lines.append(f"overall: {self.verdict.upper()}")
        return "\n".join(lines)


def _columns(records, name: str) -> dict[str, np.ndarray]:
    vals = stats.stack_series(records, name)
    if np.iscomplexobj(vals):
        return {f"{name}.re": vals.real, f"{name}.im": vals.imag}
    return {name: vals}


def summarize(records: Sequence, names: Sequence[str] | None = None, *,
              experiment: str = "ensemble", name: str = "summary") -> EnsembleSummary:
    """Per-time means and standard errors for each observable.

    A single record yields its own values as the mean and ``None`` for the
    standard errors.  Misaligned time grids raise ValueError.
    """
    records = list(records)
    if not records:
        raise ValueError("summarize needs at least one record")
    names = list(names) if names else list(records[0].series)
    out = EnsembleSummary(experiment, name, len(records), times=records[0].times)
    for n in names:
        for col, vals in _columns(records, n).items():
            m, se = stats.mean_and_se(vals)
            out.means[col] = m
            out.standard_errors[col] = None if len(records) < 2 else se
    return out


# --- state construction ----------------------------------------------------

def parse_field_initial(text: str, c: fl.LatticeConfig) -> StateVector:
    """``vacuum``, ``fock: n0, n1, ...``, ``coherent: a0, a1, ...``, joined by ``&``."""
    terms = [t.strip() for t in text.split("&") if t.strip()]
    if not terms:
        raise ConfigError("field.initial", "empty initial state")
    states = []
    for term in terms:
        kind, _, args = term.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "vacuum":
                states.append(fl.lattice_vacuum(c))
                continue
            vals = [complex(a.strip().replace(" ", "")) for a in args.split(",") if a.strip()]
            if len(vals) != len(c.modes):
                raise ConfigError("field.initial",
                                  f"{kind} needs one value per active mode ({len(c.modes)})")
            if kind == "fock":
                occ = [int(v.real) for v in vals]
                if any(v.imag or v.real != int(v.real) or not 0 <= v.real < c.n_max
                       for v in vals):
                    raise ConfigError("field.initial", "occupations must be integers below n_max")
                states.append(fl.fock_excitation(c, occ))
            elif kind == "coherent":
                states.append(fl.lattice_coherent(c, vals))
            else:
                raise ConfigError("field.initial", f"unknown state kind {kind!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("field.initial", str(exc)) from None
    return states[0] if len(states) == 1 else superpose(states, [1.0] * len(states))


def lattice_config(cfg: RunConfig, lam: float | None = None) -> fl.LatticeConfig:
    f = cfg.field
    try:
        return fl.LatticeConfig(L=f.L, mass=f.mass, lam=f.lam if lam is None else lam,
                                n_max=f.n_max, modes=f.modes,
                                ordering=fl.OrderingPolicy.parse(f.ordering, cfg.seed))
    except ValueError as exc:
        raise ConfigError("field", str(exc)) from None


def oscillator_params(cfg: RunConfig) -> osc.OscillatorParams:
    o = cfg.oscillator
    try:
        return osc.OscillatorParams(omega=o.omega, lam=o.lam, n_max=o.n_max)
    except ValueError as exc:
        raise ConfigError("oscillator", str(exc)) from None


def build_pulse(sec: PulseSection, c: fl.LatticeConfig, path: str = "pulse") -> fi.CurrentPulse:
    try:
        pulse = fi.CurrentPulse(amplitude=sec.amplitude, profile=sec.profile,
                                envelope=sec.envelope, center=sec.center,
                                width=sec.width, t_end=sec.t_end)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None
    if sec.target_alpha is not None:
        peak = float(np.max(np.abs(fi.alphas_of(pulse, c, pulse.t_end))))
        if peak == 0:
            raise ConfigError(f"{path}.target_alpha", "pulse drives no mode")
        pulse = pulse.scaled(sec.target_alpha / peak)
    return pulse


# --- experiments -----------------------------------------------------------

@dataclass
class RunResult:
    summary: EnsembleSummary
    records: list = field(default_factory=list)
    columns: tuple[str, ...] = ()


def _oscillator(cfg: RunConfig) -> RunResult:
    p = oscillator_params(cfg)
    o = cfg.oscillator
    try:
        psi0 = osc.branch_superposition(o.branches, o.weights, p.n_max)
    except ValueError as exc:
        raise ConfigError("oscillator.branches", str(exc)) from None
    rec = osc.standard_recorder(p, (0, 1))
    ens = run_ensemble(psi0, osc.build_model(p), cfg.T, cfg.dt, cfg.seed, cfg.n_paths,
                       rec, workers=cfg.workers, scheme=o.scheme, on_error="record")
    columns = cfg.recorded_observables
    summary = _summary_or_empty(ens.records, columns, cfg)
    summary.failures = dict(ens.failures)
    if ens.records:
        audits = [osc.energy_drift_audit(ens.records, p.omega, p.lam),
                  osc.variance_supermartingale_audit(ens.records, p.lam),
                  osc.projection_martingale_audit(ens.records, 0, p.lam)]
        if len(o.branches) >= 2:
            born = osc.tabulate_branches(ens, p, o.branches, o.weights, cfg.T, cfg.dt,
                                         o.threshold)
            summary.branches = {
                "labels": [_alpha_label(a) for a in o.branches],
                "counts": born.counts, "frequencies": born.frequencies,
                "expected": born.expected, "standard_errors": born.standard_errors,
                "unclassified": born.unclassified}
            audits.append(_born_audit(born))
        summary.audits = audits
        summary.extras["energy_ceiling"] = osc.energy_ceiling_check(
            ens.records, p.omega, o.branches)
        n0 = osc.number(psi0)
        summary.extras["reduction_timescale"] = (
            osc.reduction_timescale_physical(n0, p.lam, p.omega)[0] if n0 > 0 else None)
    return RunResult(summary, ens.records, columns)


def _alpha_label(a: complex) -> str:
    a = complex(a)
    return f"alpha={a.real:g}" if a.imag == 0 else f"alpha={a:g}"


def _born_audit(born: osc.BornResult) -> stats.AuditReport:
    z = born.z_scores()
    details = {"z_scores": z, "unclassified_fraction": born.unclassified_fraction}
    if born.n_paths < 100:
        details["reason"] = "fewer than 100 paths"
        return stats.AuditReport("Born-rule frequencies", stats.INCONCLUSIVE,
                                 math.nan, details)
    ok = born.audit_ok and bool(np.all(z <= 3))
    return stats.AuditReport("Born-rule frequencies", stats.PASS if ok else stats.FAIL,
                             float(np.max(z)), details)


def _summary_or_empty(records, columns, cfg) -> EnsembleSummary:
    if records:
        return summarize(records, columns, experiment=cfg.experiment, name=cfg.name)
    return EnsembleSummary(cfg.experiment, cfg.name, cfg.n_paths)


def _field(cfg: RunConfig) -> RunResult:
    c = lattice_config(cfg)
    psi0 = parse_field_initial(cfg.field.initial, c)
    ens = fl.run_field_ensemble(c, psi0, cfg.T, cfg.dt, cfg.seed, cfg.n_paths,
                                fl.field_recorder(c), workers=cfg.workers,
                                on_error="record", leakage_threshold=1e-6)
    columns = cfg.recorded_observables
    summary = _summary_or_empty(ens.records, columns, cfg)
    summary.failures = dict(ens.failures)
    summary.n_paths = cfg.n_paths
    if ens.records:
        audits = [fl.energy_loss_audit(ens.records, c.lam, omega_min=float(c.omegas.min()))]
        audits += [fl.mode_variance_audit(ens.records, c, j) for j in range(len(c.modes))]
        vac = fl.lattice_vacuum(c)
        if abs(psi0 @ vac) ** 2 > 1 - 1e-14:
            worst = float(max(np.abs(r["N"]).max() for r in ens.records))
            audits.append(stats.AuditReport(
                "vacuum stability", stats.PASS if worst <= 1e-10 else stats.FAIL,
                0.0 if worst <= 1e-10 else math.inf,
                {"max_number": worst, "tolerance": 1e-10}))
        summary.audits = audits
        n0 = [fl.mode_number(psi0, fl.FieldOperators(c), j) for j in range(len(c.modes))]
        summary.extras["reduction_timescale"] = fl.field_reduction_timescale(c, n0)
    return RunResult(summary, ens.records, columns)


def _fermion(cfg: RunConfig) -> RunResult:
    c = lattice_config(cfg)
    pulse = build_pulse(cfg.pulse, c)
    summary = EnsembleSummary(cfg.experiment, cfg.name, cfg.n_paths)
    t_end = pulse.t_end
    alphas = fi.alphas_of(pulse, c, t_end)
    psi = fi.evolve_with_current(pulse, c, t_end, cfg.pulse.dt)
    resid = [fi.coherence_residual(psi, c, j, a) for j, a in enumerate(alphas)]
    worst = float(max(resid))
    summary.audits.append(stats.AuditReport(
        "current-driven coherence", stats.PASS if worst < 1e-3 else stats.FAIL,
        0.0, {"max_residual": worst, "tolerance": 1e-3}))
    summary.extras.update({"alphas": [complex(a) for a in alphas],
                           "residuals": resid,
                           "hermiticity_violation": fi.hermiticity_violation(pulse, c)})
    if cfg.pulse_b is not None:
        pulse_b = build_pulse(cfg.pulse_b, c, "pulse.b")
        try:
            res = fi.induced_reduction_demo(pulse, pulse_b, cfg.fermion.weights,
                                            cfg.fermion.lam, c, cfg.T, cfg.dt,
                                            cfg.n_paths, cfg.seed, pulse_dt=cfg.pulse.dt,
                                            threshold=cfg.fermion.threshold,
                                            workers=cfg.workers)
        except fi.IndistinguishableBranches as exc:
            raise ConfigError("pulse.b", str(exc)) from None
        d = res.to_dict()
        summary.branches = {"labels": d["labels"], "counts": d["counts"],
                            "frequencies": d["frequencies"], "expected": d["expected"],
                            "standard_errors": d["standard_errors"],
                            "unclassified": d["unreduced"]}
        if cfg.fermion.lam == 0:
            verdict = stats.PASS if res.unreduced == res.n_paths else stats.FAIL
            name = "unreduced without coupling"
        else:
            verdict = stats.PASS if res.matches_born() else stats.FAIL
            name = "induced Born frequencies"
        summary.audits.append(stats.AuditReport(name, verdict, 0.0, d))
    return RunResult(summary)


def _foliation(cfg: RunConfig) -> RunResult:
    c = lattice_config(cfg)
    psi0 = parse_field_initial(cfg.field.initial, c)
    policies = tuple(fl.OrderingPolicy.parse(p, cfg.seed) for p in cfg.foliation.policies)
    try:
        rep = fl.foliation_comparison(c, psi0, cfg.foliation.observable, cfg.T, cfg.dt,
                                      cfg.foliation.lams, cfg.seed, cfg.n_paths,
                                      policies=policies)
    except KeyError as exc:
        raise ConfigError("foliation.observable", str(exc)) from None
    summary = EnsembleSummary(cfg.experiment, cfg.name, cfg.n_paths)
    verdict = stats.PASS if rep.passed else (
        stats.INCONCLUSIVE if rep.inconclusive else stats.FAIL)
    summary.audits.append(stats.AuditReport("foliation independence", verdict,
                                            0.0, rep.to_dict()))
    return RunResult(summary)


def _convergence(cfg: RunConfig) -> RunResult:
    p = oscillator_params(cfg)
    o = cfg.oscillator
    psi0 = osc.branch_superposition(o.branches, o.weights, p.n_max)
    obs = {"H": partial(osc.energy, omega=p.omega), "N": osc.number,
           "Va": osc.variance_a}
    if cfg.convergence.observable not in obs:
        raise ConfigError("convergence.observable", f"choose from {', '.join(obs)}")
    try:
        rep = weak_order_check(osc.build_model(p), psi0, obs[cfg.convergence.observable],
                               cfg.T, cfg.seed, cfg.n_paths, cfg.convergence.dts,
                               scheme=cfg.convergence.scheme)
    except ValueError as exc:
        raise ConfigError("convergence", str(exc)) from None
    summary = EnsembleSummary(cfg.experiment, cfg.name, cfg.n_paths)
    if rep.inconclusive:
        verdict = stats.INCONCLUSIVE
    else:
        verdict = stats.PASS if rep.within(0.7, 1.3) else stats.FAIL
    summary.audits.append(stats.AuditReport("weak order", verdict, 0.0, rep.to_dict()))
    return RunResult(summary)


EXPERIMENT_RUNNERS = {"oscillator": _oscillator, "field": _field, "fermion": _fermion,
                      "foliation": _foliation, "convergence": _convergence}


def execute(cfg: RunConfig) -> RunResult:
    return EXPERIMENT_RUNNERS[cfg.experiment](cfg)


def run(cfg: RunConfig, out: str | Path | None = None, *, figures: bool = True
        ) -> EnsembleSummary:
    """Execute ``cfg`` and persist artifacts under ``out`` (or ``cfg.out``)."""
    result = execute(cfg)
    target = out if out is not None else cfg.out
    if target is not None:
        write_artifacts(result, Path(target), figures=figures)
    return result.summary


# --- persistence -----------------------------------------------------------

def write_artifacts(result: RunResult, out: Path, *, figures: bool = True) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if result.records:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for rec in result.records:
            idx = rec.metadata.get("trajectory", 0)
            path = tdir / f"path_{idx:05d}.csv"
            rec.to_csv(path, names=list(result.columns))
            written.append(path)
    path = out / "summary.json"
    path.write_text(result.summary.to_json())
    written.append(path)
    if figures and result.records:
        from .figures import write_observable_figures
        written += write_observable_figures(result, out / "figures")
    return written
