"""Stochastic reduction toward coherent states: oscillator, lattice field and
current-induced coherence, with a trajectory integrator and audit harness."""

from . import fermion_induced, field_lattice, fock, noise, oscillator, sde_engine, stats

__version__ = "0.1.0"

__all__ = ["fermion_induced", "field_lattice", "fock", "noise", "oscillator",
           "sde_engine", "stats"]
