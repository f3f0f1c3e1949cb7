"""Run configuration: a sectioned ``key = value`` text format.

Grammar (see README for the full reference)::

    config   := section+
    section  := "[" name "]" NEWLINE (entry | comment)*
    entry    := key "=" value
    comment  := ("#" | ";") text
    value    := scalar | scalar ("," scalar)+

Scalars are integers, floats or Python-style complex literals (``1+2j``).
Section names: ``run`` (required), ``oscillator``, ``field``, ``pulse``,
``pulse.b``, ``fermion``, ``foliation``, ``convergence``.  Unknown sections
or keys are errors, reported with their ``section.key`` path.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any

EXPERIMENTS = ("oscillator", "field", "fermion", "foliation", "convergence")

OSCILLATOR_OBSERVABLES = ("H", "N", "Va", "Cov", "a", "P0", "P1")
SCHEMES = ("exponential", "euler")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending ``section.key``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def field_observables(n_modes: int) -> tuple[str, ...]:
    names = ["H", "N"]
    for j in range(n_modes):
        names += [f"N{j}", f"V{j}", f"S{j}"]
    return tuple(names)


# --- scalar parsing --------------------------------------------------------

def _number(text: str, path: str, kind=float):
    text = text.strip()
    try:
        if kind is int:
            return int(text)
        if kind is complex:
            return complex(text.replace(" ", ""))
        return float(text)
    except ValueError:
        raise ConfigError(path, f"expected {kind.__name__}, got {text!r}") from None


def _list(text: str, path: str, kind=float) -> tuple:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise ConfigError(path, "expected a non-empty list")
    return tuple(_number(t, path, kind) for t in items)


def _names(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


class _Section:
    """Typed access to one section that remembers which keys were consumed."""

    def __init__(self, name: str, data: dict[str, str]):
        self.name = name
        self.data = data
        self.used: set[str] = set()

    def path(self, key: str) -> str:
        return f"{self.name}.{key}"

    def raw(self, key: str, default=None, required: bool = False):
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(self.path(key), "is required")
            return default
        return self.data[key]

    def get(self, key: str, default=None, kind=float, required: bool = False):
        raw = self.raw(key, None, required)
        return default if raw is None else _number(raw, self.path(key), kind)

    def get_list(self, key: str, default=None, kind=float, required: bool = False):
        raw = self.raw(key, None, required)
        return default if raw is None else _list(raw, self.path(key), kind)

    def get_str(self, key: str, default=None, required: bool = False):
        raw = self.raw(key, None, required)
        return default if raw is None else raw.strip()

    def finish(self) -> None:
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(self.path(extra[0]), "unknown key")


# --- typed sections --------------------------------------------------------

@dataclass(frozen=True)
class OscillatorSection:
    omega: float = 1.0
    lam: float = 0.5
    n_max: int = 128
    branches: tuple[complex, ...] = (0j, 8 + 0j)
    weights: tuple[complex, ...] = (1 + 0j, 1 + 0j)
    scheme: str = "exponential"
    threshold: float = 0.9


@dataclass(frozen=True)
class FieldSection:
    L: int = 4
    mass: float = 1.0
    lam: float = 1.0
    n_max: int = 6
    modes: tuple[int, ...] = (0, 1)
    ordering: str = "simultaneous"
    initial: str = "fock: 1, 0"


@dataclass(frozen=True)
class PulseSection:
    envelope: str = "gaussian"
    amplitude: float = 1.0
    center: float = 1.5
    width: float = 0.5
    t_end: float = 3.0
    profile: tuple[complex, ...] = (1 + 0j,)
    dt: float = 0.01
    target_alpha: float | None = None    # rescale amplitude to this max |alpha|


@dataclass(frozen=True)
class FermionSection:
    weights: tuple[complex, ...] = (1 + 0j, 1 + 0j)
    lam: float = 1.0
    threshold: float = 0.9


@dataclass(frozen=True)
class FoliationSection:
    lams: tuple[float, ...] = (0.1, 0.2, 0.4)
    observable: str = "H"
    policies: tuple[str, ...] = ("simultaneous", "sequential")


@dataclass(frozen=True)
class ConvergenceSection:
    dts: tuple[float, ...] = (0.02, 0.01, 0.005, 0.0025)
    scheme: str = "euler"
    observable: str = "H"


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int
    n_paths: int
    T: float
    dt: float
    workers: int = 1
    out: str | None = None
    observables: tuple[str, ...] = ()
    oscillator: OscillatorSection = dc_field(default_factory=OscillatorSection)
    field: FieldSection = dc_field(default_factory=FieldSection)
    pulse: PulseSection = dc_field(default_factory=PulseSection)
    pulse_b: PulseSection | None = None
    fermion: FermionSection = dc_field(default_factory=FermionSection)
    foliation: FoliationSection = dc_field(default_factory=FoliationSection)
    convergence: ConvergenceSection = dc_field(default_factory=ConvergenceSection)
    name: str = "run"

    def with_overrides(self, *, seed: int | None = None, n_paths: int | None = None,
                       out: str | None = None, workers: int | None = None) -> RunConfig:
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if n_paths is not None:
            changes["n_paths"] = n_paths
        if out is not None:
            changes["out"] = out
        if workers is not None:
            changes["workers"] = workers
        cfg = replace(self, **changes)
        validate(cfg)
        return cfg

    def available_observables(self) -> tuple[str, ...]:
        if self.experiment == "field":
            return field_observables(len(self.field.modes))
        if self.experiment == "oscillator":
            return OSCILLATOR_OBSERVABLES
        return ()

    def default_observables(self) -> tuple[str, ...]:
        if self.experiment == "oscillator":
            return ("H", "N", "Va", "P0")
        if self.experiment == "field":
            return ("H", "N") + tuple(f"V{j}" for j in range(len(self.field.modes)))
        return ()

    @property
    def recorded_observables(self) -> tuple[str, ...]:
        return self.observables or self.default_observables()


def _read_oscillator(s: _Section) -> OscillatorSection:
    d = OscillatorSection()
    return OscillatorSection(
        omega=s.get("omega", d.omega), lam=s.get("lam", d.lam),
        n_max=s.get("n_max", d.n_max, int),
        branches=s.get_list("branches", d.branches, complex),
        weights=s.get_list("weights", d.weights, complex),
        scheme=s.get_str("scheme", d.scheme),
        threshold=s.get("threshold", d.threshold))


def _read_field(s: _Section) -> FieldSection:
    d = FieldSection()
    return FieldSection(
        L=s.get("L", d.L, int), mass=s.get("mass", d.mass), lam=s.get("lam", d.lam),
        n_max=s.get("n_max", d.n_max, int), modes=s.get_list("modes", d.modes, int),
        ordering=s.get_str("ordering", d.ordering),
        initial=s.get_str("initial", d.initial))


def _read_pulse(s: _Section) -> PulseSection:
    d = PulseSection()
    return PulseSection(
        envelope=s.get_str("envelope", d.envelope),
        amplitude=s.get("amplitude", d.amplitude), center=s.get("center", d.center),
        width=s.get("width", d.width), t_end=s.get("t_end", d.t_end),
        profile=s.get_list("profile", d.profile, complex), dt=s.get("dt", d.dt),
        target_alpha=s.get("target_alpha"))


def _read_fermion(s: _Section) -> FermionSection:
    d = FermionSection()
    return FermionSection(weights=s.get_list("weights", d.weights, complex),
                          lam=s.get("lam", d.lam),
                          threshold=s.get("threshold", d.threshold))


def _read_foliation(s: _Section) -> FoliationSection:
    d = FoliationSection()
    pol = s.get_str("policies")
    return FoliationSection(lams=s.get_list("lams", d.lams),
                            observable=s.get_str("observable", d.observable),
                            policies=_names(pol) if pol else d.policies)


def _read_convergence(s: _Section) -> ConvergenceSection:
    d = ConvergenceSection()
    return ConvergenceSection(dts=s.get_list("dts", d.dts),
                              scheme=s.get_str("scheme", d.scheme),
                              observable=s.get_str("observable", d.observable))


_READERS = {
    "oscillator": _read_oscillator, "field": _read_field, "pulse": _read_pulse,
    "pulse.b": _read_pulse, "fermion": _read_fermion, "foliation": _read_foliation,
    "convergence": _read_convergence,
}


def parse_config(text: str, name: str = "run") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str                     # keys are case sensitive (L, T)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    sections = {n: _Section(n, dict(parser[n])) for n in parser.sections()}
    for n in sections:
        if n != "run" and n not in _READERS:
            raise ConfigError(n, "unknown section")
    if "run" not in sections:
        raise ConfigError("run", "section is required")
    run = sections["run"]
    experiment = run.get_str("experiment", required=True)
    seed = run.get("seed", kind=int, required=True)
    n_paths = run.get("n_paths", 1, int)
    T = run.get("T", required=True)
    dt = run.get("dt", required=True)
    workers = run.get("workers", 1, int)
    out = run.get_str("out")
    obs = run.get_str("observables")
    typed = {n: _READERS[n](s) for n, s in sections.items() if n != "run"}
    for s in sections.values():
        s.finish()
    cfg = RunConfig(
        experiment=experiment, seed=seed, n_paths=n_paths, T=T, dt=dt,
        workers=workers, out=out, observables=_names(obs) if obs else (),
        oscillator=typed.get("oscillator", OscillatorSection()),
        field=typed.get("field", FieldSection()),
        pulse=typed.get("pulse", PulseSection()),
        pulse_b=typed.get("pulse.b"),
        fermion=typed.get("fermion", FermionSection()),
        foliation=typed.get("foliation", FoliationSection()),
        convergence=typed.get("convergence", ConvergenceSection()),
        name=name)
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text, name=p.stem)


def validate(cfg: RunConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("run.experiment",
                          f"unknown experiment {cfg.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if cfg.n_paths < 1:
        raise ConfigError("run.n_paths", "must be at least 1")
    if cfg.workers < 1:
        raise ConfigError("run.workers", "must be at least 1")
    if not cfg.T > 0:
        raise ConfigError("run.T", "must be positive")
    if not cfg.dt > 0:
        raise ConfigError("run.dt", "must be positive")
    ratio = cfg.T / cfg.dt
    if abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0):
        raise ConfigError("run.dt", "T must be an integer multiple of dt")
    available = cfg.available_observables()
    for name in cfg.observables:
        if name not in available:
            raise ConfigError("run.observables",
                              f"{name!r} is not defined for experiment {cfg.experiment!r}")
    o = cfg.oscillator
    if len(o.branches) != len(o.weights):
        raise ConfigError("oscillator.weights", "needs one weight per branch")
    if o.scheme not in SCHEMES:
        raise ConfigError("oscillator.scheme", f"choose from {', '.join(SCHEMES)}")
    if o.omega <= 0:
        raise ConfigError("oscillator.omega", "must be positive")
    if o.lam < 0:
        raise ConfigError("oscillator.lam", "must be nonnegative")
    if o.n_max < 2:
        raise ConfigError("oscillator.n_max", "must be at least 2")
    f = cfg.field
    if f.L < 1:
        raise ConfigError("field.L", "must be at least 1")
    if f.ordering not in ("simultaneous", "sequential", "random"):
        raise ConfigError("field.ordering", "choose from simultaneous, sequential, random")
    if cfg.experiment == "fermion":
        if len(cfg.pulse.profile) != len(f.modes):
            raise ConfigError("pulse.profile", "needs one weight per active field mode")
        if cfg.pulse_b is not None:
            if len(cfg.pulse_b.profile) != len(f.modes):
                raise ConfigError("pulse.b.profile", "needs one weight per active field mode")
            if len(cfg.fermion.weights) != 2:
                raise ConfigError("fermion.weights", "needs exactly two weights")
    if cfg.experiment == "foliation":
        if len(cfg.foliation.lams) < 3:
            raise ConfigError("foliation.lams", "needs at least three couplings")
        if len(cfg.foliation.policies) != 2:
            raise ConfigError("foliation.policies", "needs exactly two policies")
    if cfg.experiment == "convergence":
        if len(cfg.convergence.dts) < 3:
            raise ConfigError("convergence.dts", "needs at least three step sizes")
        if cfg.convergence.scheme not in SCHEMES:
            raise ConfigError("convergence.scheme", f"choose from {', '.join(SCHEMES)}")
