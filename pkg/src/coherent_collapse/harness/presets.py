"""Named run configurations, written in the same text format as config files."""

from __future__ import annotations

from .config import RunConfig, parse_config

PRESETS: dict[str, tuple[str, str]] = {}


def _preset(name: str, description: str, text: str) -> None:
    PRESETS[name] = (description, text.strip() + "\n")


_preset("fig1-fig2", "five oscillator paths from |0> + |alpha=8>: energy and variance", """
[run]
experiment = oscillator
seed = 1
n_paths = 5
T = 8.0
dt = 0.01
observables = H, Va, N, P0, P1

[oscillator]
omega = 1.0
lam = 0.5
n_max = 128
branches = 0, 8
weights = 1, 1
""")

_preset("born-100", "Born-rule frequencies over 100 paths, |0> + |alpha=8>", """
[run]
experiment = oscillator
seed = 20240
n_paths = 100
T = 1.0
dt = 0.00125
observables = H, N, Va, P0, P1

[oscillator]
omega = 1.0
lam = 0.5
n_max = 128
branches = 0, 8
weights = 1, 1
""")

_preset("coherent-decay", "a single coherent branch |alpha=8> losing energy", """
[run]
experiment = oscillator
seed = 7
n_paths = 20
T = 4.0
dt = 0.01
observables = H, N, Va, a

[oscillator]
omega = 1.0
lam = 0.5
n_max = 128
branches = 8
weights = 1
""")

_preset("field-energy", "lattice field, one particle in the zero mode: energy loss law", """
[run]
experiment = field
seed = 11
n_paths = 400
T = 1.0
dt = 0.01
observables = H, N, N0, N1

[field]
L = 4
mass = 1.0
lam = 1.0
n_max = 6
modes = 0, 1
initial = fock: 1, 0
""")

_preset("field-variance", "lattice field, vacuum & two-particle superposition: variance reduction", """
[run]
experiment = field
seed = 12
n_paths = 300
T = 3.0
dt = 0.01
observables = H, N, V0, S0

[field]
L = 4
mass = 1.0
lam = 1.0
n_max = 6
modes = 0, 1
initial = fock: 0, 0 & fock: 2, 0
""")

_preset("vacuum", "lattice vacuum under reduction noise: no particle creation", """
[run]
experiment = field
seed = 3
n_paths = 20
T = 2.0
dt = 0.01
observables = H, N

[field]
L = 4
mass = 1.0
lam = 1.0
n_max = 6
modes = 0, 1
initial = vacuum
""")

_preset("foliation", "ordering-policy dependence on 2 sites / 2 modes", """
[run]
experiment = foliation
seed = 5
n_paths = 200
T = 1.0
dt = 0.02

[field]
L = 2
mass = 1.0
n_max = 8
modes = 0, 1
initial = coherent: 0, 0 & coherent: 1.2, 0.8

[foliation]
lams = 0.1, 0.2, 0.4
observable = H
policies = simultaneous, sequential
""")

_preset("fermion", "current pulse driving the field vacuum into |alpha| = 1.5", """
[run]
experiment = fermion
seed = 1
n_paths = 1
T = 3.0
dt = 0.01

[field]
L = 2
mass = 1.0
lam = 0.0
n_max = 24
modes = 0

[pulse]
envelope = gaussian
center = 1.5
width = 0.5
t_end = 3.0
profile = 1
target_alpha = 1.5
""")

_preset("induced-reduction", "two opposite pulses superposed, then field reduction", """
[run]
experiment = fermion
seed = 3
n_paths = 100
T = 4.0
dt = 0.01

[field]
L = 2
mass = 1.0
n_max = 32
modes = 0

[pulse]
center = 1.5
width = 0.5
t_end = 3.0
profile = 1
target_alpha = 2.0

[pulse.b]
center = 1.5
width = 0.5
t_end = 3.0
profile = -1
target_alpha = 2.0

[fermion]
weights = 1, 1
lam = 1.0
""")

_preset("convergence", "weak order of Euler-Maruyama on the oscillator, <H>_T", """
[run]
experiment = convergence
seed = 101
n_paths = 400
T = 1.0
dt = 0.0025

[oscillator]
omega = 1.0
lam = 0.5
n_max = 24
branches = 0, 1
weights = 1, 1

[convergence]
dts = 0.02, 0.01, 0.005, 0.0025
scheme = euler
observable = H
""")


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return PRESETS[name][1]


def load_preset(name: str) -> RunConfig:
    return parse_config(preset_text(name), name=name)
